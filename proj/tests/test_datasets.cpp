#include "strsparse/datasets.hpp"

#include <filesystem>
#include <fstream>

#include "doctest.h"

using namespace strs;

TEST_CASE("blobs are deterministic and well-formed") {
    const Dataset a = make_blobs(10, 3, 8, 0.5, 42);
    const Dataset b = make_blobs(10, 3, 8, 0.5, 42);
    REQUIRE(a.size() == 30);
    CHECK(a.inputs.shape() == std::vector<std::int64_t>{30, 8});
    for (std::int64_t i = 0; i < a.inputs.numel(); ++i) CHECK(a.inputs[i] == b.inputs[i]);
    CHECK(a.labels == b.labels);
    const Dataset c = make_blobs(10, 3, 8, 0.5, 43);
    bool same = true;
    for (std::int64_t i = 0; i < a.inputs.numel() && same; ++i)
        same = a.inputs[i] == c.inputs[i];
    CHECK(!same);
}

TEST_CASE("pattern images cover four classes") {
    const Dataset d = make_pattern_images(6, 16, 0.2, 7);
    REQUIRE(d.size() == 24);
    CHECK(d.inputs.shape() == std::vector<std::int64_t>{24, 1, 16, 16});
    int seen[4] = {0, 0, 0, 0};
    for (int l : d.labels) {
        REQUIRE(l >= 0);
        REQUIRE(l < 4);
        seen[l]++;
    }
    for (int s : seen) CHECK(s == 6);
}

TEST_CASE("sequence task shape and labels") {
    const SeqDataset d = make_sequence_task(5, 7, 4, 0.3, 9);
    REQUIRE(d.sequences.size() == 10);
    for (const Tensor& s : d.sequences) CHECK(s.shape() == std::vector<std::int64_t>{7, 4});
    int ones = 0;
    for (int l : d.labels) ones += l;
    CHECK(ones == 5);
}

TEST_CASE("sparse regression problem is noiseless on its support") {
    const auto prob = SparseRegressionProblem::generate(50, 20, 4, 11);
    REQUIRE(prob.support.size() == 4);
    CHECK(prob.design.shape() == std::vector<std::int64_t>{20, 50});
    for (std::int64_t i = 0; i < 20; ++i) {
        double y = 0;
        for (int j : prob.support) y += prob.design.at2(i, j);
        CHECK(prob.targets.at2(i, 0) == y);
    }
    // r = 0 gives the all-zero target
    const auto zero = SparseRegressionProblem::generate(10, 5, 0, 12);
    for (std::int64_t i = 0; i < 5; ++i) CHECK(zero.targets.at2(i, 0) == 0.0);
}

TEST_CASE("idx files round trip") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "strsparse_test_idx";
    fs::create_directories(dir);
    const std::string img_path = (dir / "img.idx").string();
    const std::string lbl_path = (dir / "lbl.idx").string();
    {
        std::ofstream img(img_path, std::ios::binary);
        const unsigned char header[] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3};
        img.write(reinterpret_cast<const char*>(header), sizeof header);
        for (int i = 0; i < 12; ++i) {
            const unsigned char v = static_cast<unsigned char>(i * 20);
            img.write(reinterpret_cast<const char*>(&v), 1);
        }
        std::ofstream lbl(lbl_path, std::ios::binary);
        const unsigned char lheader[] = {0, 0, 8, 1, 0, 0, 0, 2};
        lbl.write(reinterpret_cast<const char*>(lheader), sizeof lheader);
        const unsigned char labels[] = {3, 1};
        lbl.write(reinterpret_cast<const char*>(labels), 2);
    }
    const Tensor imgs = load_idx_images(img_path);
    CHECK(imgs.shape() == std::vector<std::int64_t>{2, 1, 2, 3});
    CHECK(imgs[0] == 0.0);
    CHECK(imgs[1] == doctest::Approx(20.0 / 255.0));
    const std::vector<int> labels = load_idx_labels(lbl_path);
    CHECK(labels == std::vector<int>{3, 1});

    const Dataset ds = load_idx_dataset(img_path, lbl_path, false, 1);
    CHECK(ds.size() == 2);
    CHECK(ds.labels[0] == 3);

    // bad magic is rejected
    CHECK_THROWS_WITH_AS(load_idx_labels(img_path), doctest::Contains("magic"),
                         std::runtime_error);
}

TEST_CASE("missing idx files: named error or synthetic fallback") {
    CHECK_THROWS_WITH_AS(load_idx_dataset("/nonexistent/images.idx", "/nonexistent/labels.idx",
                                          false, 1),
                         doctest::Contains("/nonexistent/images.idx"), std::runtime_error);
    const Dataset fallback =
        load_idx_dataset("/nonexistent/images.idx", "/nonexistent/labels.idx", true, 1);
    CHECK(fallback.size() > 0);
    CHECK(fallback.inputs.rank() == 4);
}
