#include "strsparse/datasets.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "strsparse/kernels.hpp"

namespace strs {

Dataset make_blobs(std::int64_t per_class, std::int64_t classes, std::int64_t dim,
                   double noise, std::uint64_t seed) {
    Rng rng(seed);
    // well-separated unit-scale cluster centers
    std::vector<Tensor> centers;
    for (std::int64_t c = 0; c < classes; ++c) {
        Tensor m({dim});
        double norm = 0;
        for (std::int64_t i = 0; i < dim; ++i) {
            m[i] = rng.normal();
            norm += m[i] * m[i];
        }
        norm = std::sqrt(norm);
        for (std::int64_t i = 0; i < dim; ++i) m[i] = 2.0 * m[i] / norm;
        centers.push_back(std::move(m));
    }
    Dataset ds;
    const std::int64_t n = per_class * classes;
    ds.inputs = Tensor({n, dim});
    ds.labels.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t c = i % classes;
        ds.labels[static_cast<std::size_t>(i)] = static_cast<int>(c);
        for (std::int64_t j = 0; j < dim; ++j)
            ds.inputs.at2(i, j) = centers[static_cast<std::size_t>(c)][j] + noise * rng.normal();
    }
    return ds;
}

Dataset make_pattern_images(std::int64_t per_class, std::int64_t img, double noise,
                            std::uint64_t seed) {
    Rng rng(seed);
    const std::int64_t classes = 4;
    const std::int64_t n = per_class * classes;
    Dataset ds;
    ds.inputs = Tensor({n, 1, img, img});
    ds.labels.resize(static_cast<std::size_t>(n));
    const double mid = static_cast<double>(img - 1) / 2.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t c = i % classes;
        ds.labels[static_cast<std::size_t>(i)] = static_cast<int>(c);
        const std::int64_t phase = static_cast<std::int64_t>(rng.bounded(2));
        const std::int64_t period = 2 + static_cast<std::int64_t>(rng.bounded(2));
        for (std::int64_t y = 0; y < img; ++y) {
            for (std::int64_t x = 0; x < img; ++x) {
                double v = 0;
                switch (c) {
                    case 0: v = ((y / period + phase) % 2 == 0) ? 1.0 : -1.0; break;
                    case 1: v = ((x / period + phase) % 2 == 0) ? 1.0 : -1.0; break;
                    case 2: v = (((x + y) / period + phase) % 2 == 0) ? 1.0 : -1.0; break;
                    case 3: {
                        const double dy = static_cast<double>(y) - mid;
                        const double dx = static_cast<double>(x) - mid;
                        v = std::sqrt(dx * dx + dy * dy) <= static_cast<double>(img) / 3.0
                                ? 1.0
                                : -1.0;
                        break;
                    }
                    default: break;
                }
                ds.inputs.at4(i, 0, y, x) = v + noise * rng.normal();
            }
        }
    }
    return ds;
}

SeqDataset make_sequence_task(std::int64_t per_class, std::int64_t steps, std::int64_t dim,
                              double noise, std::uint64_t seed) {
    Rng rng(seed);
    // one fixed signal direction; class flips the drift sign
    Tensor u({dim});
    double norm = 0;
    for (std::int64_t i = 0; i < dim; ++i) {
        u[i] = rng.normal();
        norm += u[i] * u[i];
    }
    norm = std::sqrt(norm);
    for (std::int64_t i = 0; i < dim; ++i) u[i] /= norm;

    SeqDataset ds;
    const std::int64_t n = per_class * 2;
    for (std::int64_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        const double drift = label == 0 ? -1.0 : 1.0;
        Tensor seq({steps, dim});
        for (std::int64_t t = 0; t < steps; ++t)
            for (std::int64_t j = 0; j < dim; ++j)
                seq.at2(t, j) = drift * u[j] + noise * rng.normal();
        ds.sequences.push_back(std::move(seq));
        ds.labels.push_back(label);
    }
    return ds;
}

SparseRegressionProblem SparseRegressionProblem::generate(std::int64_t d, std::int64_t n,
                                                          std::int64_t r, std::uint64_t seed) {
    if (r > d) throw std::invalid_argument("sparse regression: r must be <= d");
    for (std::uint64_t attempt_seed = seed;; ++attempt_seed) {
        Rng rng(attempt_seed);
        SparseRegressionProblem prob;
        prob.d = d;
        prob.n = n;
        prob.r = r;
        prob.seed_used = attempt_seed;
        prob.design = Tensor({n, d});
        for (std::int64_t i = 0; i < n * d; ++i) prob.design[i] = rng.normal();

        std::vector<std::int64_t> idx(static_cast<std::size_t>(d));
        for (std::int64_t i = 0; i < d; ++i) idx[static_cast<std::size_t>(i)] = i;
        rng.shuffle(idx);
        prob.support.assign(idx.begin(), idx.begin() + r);
        std::sort(prob.support.begin(), prob.support.end());

        prob.targets = Tensor({n, 1});
        for (std::int64_t i = 0; i < n; ++i) {
            double y = 0;
            for (int j : prob.support) y += prob.design.at2(i, j);
            prob.targets.at2(i, 0) = y;
        }

        // degenerate design (row rank < n): Gram Cholesky breaks down
        if (n <= d) {
            Tensor gram({n, n});
            for (std::int64_t i = 0; i < n; ++i)
                for (std::int64_t j = 0; j < n; ++j)
                    gram.at2(i, j) = kern::ops().dot(prob.design.data() + i * d,
                                                     prob.design.data() + j * d,
                                                     static_cast<std::size_t>(d));
            bool ok = true;
            for (std::int64_t k = 0; k < n && ok; ++k) {
                double diag = gram.at2(k, k);
                for (std::int64_t j = 0; j < k; ++j) diag -= gram.at2(k, j) * gram.at2(k, j);
                if (diag <= 1e-9 * static_cast<double>(d)) {
                    ok = false;
                    break;
                }
                const double l = std::sqrt(diag);
                gram.at2(k, k) = l;
                for (std::int64_t i = k + 1; i < n; ++i) {
                    double v = gram.at2(i, k);
                    for (std::int64_t j = 0; j < k; ++j) v -= gram.at2(i, j) * gram.at2(k, j);
                    gram.at2(i, k) = v / l;
                }
            }
            if (!ok) continue;
        }
        return prob;
    }
}

Dataset SparseRegressionProblem::as_dataset() const {
    Dataset ds;
    ds.inputs = design;
    ds.targets = targets;
    ds.regression = true;
    return ds;
}

namespace {

std::uint32_t read_be32(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error(path + ": truncated IDX header");
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

}  // namespace

Tensor load_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open IDX image file: " + path);
    const std::uint32_t magic = read_be32(in, path);
    if (magic != 0x00000803u)
        throw std::runtime_error(path + ": bad IDX image magic (expected 0x00000803)");
    const std::int64_t count = read_be32(in, path);
    const std::int64_t rows = read_be32(in, path);
    const std::int64_t cols = read_be32(in, path);
    Tensor out({count, 1, rows, cols});
    std::vector<unsigned char> buf(static_cast<std::size_t>(rows * cols));
    for (std::int64_t i = 0; i < count; ++i) {
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
            throw std::runtime_error(path + ": truncated IDX image data");
        for (std::int64_t j = 0; j < rows * cols; ++j)
            out[i * rows * cols + j] = static_cast<double>(buf[static_cast<std::size_t>(j)]) / 255.0;
    }
    return out;
}

std::vector<int> load_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open IDX label file: " + path);
    const std::uint32_t magic = read_be32(in, path);
    if (magic != 0x00000801u)
        throw std::runtime_error(path + ": bad IDX label magic (expected 0x00000801)");
    const std::int64_t count = read_be32(in, path);
    std::vector<unsigned char> buf(static_cast<std::size_t>(count));
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
        throw std::runtime_error(path + ": truncated IDX label data");
    return std::vector<int>(buf.begin(), buf.end());
}

Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                         bool allow_synthetic_fallback, std::uint64_t seed) {
    std::ifstream probe_img(images_path, std::ios::binary);
    std::ifstream probe_lbl(labels_path, std::ios::binary);
    if (!probe_img || !probe_lbl) {
        if (allow_synthetic_fallback) return make_pattern_images(128, 16, 0.3, seed);
        throw std::runtime_error("IDX dataset not found; expected images at '" + images_path +
                                 "' and labels at '" + labels_path +
                                 "' (synthetic fallback disabled)");
    }
    probe_img.close();
    probe_lbl.close();
    Dataset ds;
    ds.inputs = load_idx_images(images_path);
    ds.labels = load_idx_labels(labels_path);
    if (ds.inputs.dim(0) != static_cast<std::int64_t>(ds.labels.size()))
        throw std::runtime_error("IDX image/label count mismatch: " +
                                 std::to_string(ds.inputs.dim(0)) + " images vs " +
                                 std::to_string(ds.labels.size()) + " labels");
    return ds;
}

}  // namespace strs
