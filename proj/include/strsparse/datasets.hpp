#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "strsparse/rng.hpp"
#include "strsparse/tensor.hpp"
#include "strsparse/train.hpp"

namespace strs {

/// Gaussian class clusters over flat features.
Dataset make_blobs(std::int64_t per_class, std::int64_t classes, std::int64_t dim,
                   double noise, std::uint64_t seed);

/// Procedurally generated 1-channel img x img pattern images, four classes
/// (horizontal stripes, vertical stripes, checkerboard, center disc) plus
/// pixel noise.
Dataset make_pattern_images(std::int64_t per_class, std::int64_t img, double noise,
                            std::uint64_t seed);

/// Binary sequence classification: class-dependent low-dimensional drift
/// buried in noise, solvable by a low-rank recurrence.
SeqDataset make_sequence_task(std::int64_t per_class, std::int64_t steps, std::int64_t dim,
                              double noise, std::uint64_t seed);

/// Noiseless underdetermined regression y = X w*, X_ij ~ N(0,1), w* has r
/// unit entries. Regenerates (seed+1, ...) while X has row rank < n.
struct SparseRegressionProblem {
    Tensor design;            // [n, d]
    Tensor targets;           // [n, 1]
    std::vector<int> support; // indices of the r true nonzeros
    std::int64_t d = 0, n = 0, r = 0;
    std::uint64_t seed_used = 0;

    static SparseRegressionProblem generate(std::int64_t d, std::int64_t n, std::int64_t r,
                                            std::uint64_t seed);
    Dataset as_dataset() const;
};

/// IDX image file reader (magic 0x00000803), values scaled to [0,1];
/// returns [N, 1, rows, cols].
Tensor load_idx_images(const std::string& path);
/// IDX label file reader (magic 0x00000801).
std::vector<int> load_idx_labels(const std::string& path);

/// Dataset from IDX image/label files. Missing files raise an error naming
/// both expected paths; with allow_synthetic_fallback the pattern-image task
/// is generated instead.
Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                         bool allow_synthetic_fallback, std::uint64_t seed);

}  // namespace strs
