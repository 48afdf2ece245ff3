#include "strsparse/tensor.hpp"

#include <cmath>

#include "doctest.h"
#include "strsparse/rng.hpp"
#include "testutil.hpp"

using namespace strs;
using test::random_tensor;

namespace {

/// Naive ijk matrix product, independent of the kernel path.
Tensor matmul_naive(const Tensor& a, const Tensor& b) {
    Tensor c({a.dim(0), b.dim(1)});
    for (std::int64_t i = 0; i < a.dim(0); ++i)
        for (std::int64_t j = 0; j < b.dim(1); ++j) {
            double acc = 0;
            for (std::int64_t k = 0; k < a.dim(1); ++k) acc += a.at2(i, k) * b.at2(k, j);
            c.at2(i, j) = acc;
        }
    return c;
}

/// Explicit 6-nested-loop cross-correlation (groups=1 reference).
Tensor conv2d_reference(const Tensor& input, const Tensor& kernel, std::int64_t stride,
                        std::int64_t padding) {
    const std::int64_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::int64_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    const std::int64_t oh = (h + 2 * padding - kh) / stride + 1;
    const std::int64_t ow = (w + 2 * padding - kw) / stride + 1;
    Tensor out({cout, oh, ow});
    for (std::int64_t co = 0; co < cout; ++co)
        for (std::int64_t oy = 0; oy < oh; ++oy)
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                double acc = 0;
                for (std::int64_t ci = 0; ci < cin; ++ci)
                    for (std::int64_t dy = 0; dy < kh; ++dy)
                        for (std::int64_t dx = 0; dx < kw; ++dx) {
                            const std::int64_t iy = oy * stride - padding + dy;
                            const std::int64_t ix = ox * stride - padding + dx;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                            acc += input.at3(ci, iy, ix) * kernel.at4(co, ci, dy, dx);
                        }
                out.at3(co, oy, ox) = acc;
            }
    return out;
}

}  // namespace

TEST_CASE("tensor invariants") {
    CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), ShapeError);
    const Tensor t({2, 3});
    CHECK(t.numel() == 6);
    CHECK(t.shape_str() == "[2,3]");
}

TEST_CASE("matmul examples") {
    // identity case
    const Tensor eye({2, 2}, {1, 0, 0, 1});
    const Tensor m({2, 2}, {3.5, -1.25, 0.5, 9.0});
    const Tensor prod = matmul(eye, m);
    for (std::int64_t i = 0; i < 4; ++i) CHECK(prod[i] == m[i]);

    // hand-computed scalar products
    const Tensor a({2, 2}, {1, 2, 3, 4});
    const Tensor b({2, 1}, {5, 6});
    const Tensor c = matmul(a, b);
    CHECK(c.at2(0, 0) == 17.0);
    CHECK(c.at2(1, 0) == 39.0);

    // scalar case
    const Tensor s = matmul(Tensor({1, 1}, {3}), Tensor({1, 1}, {4}));
    CHECK(s[0] == 12.0);

    CHECK_THROWS_WITH_AS(matmul(Tensor({2, 3}), Tensor({2, 3})),
                         doctest::Contains("[2,3]"), ShapeError);
}

TEST_CASE("matmul associativity on random small matrices") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor a = random_tensor({4, 5}, rng);
        const Tensor b = random_tensor({5, 3}, rng);
        const Tensor c = random_tensor({3, 6}, rng);
        const Tensor left = matmul(matmul(a, b), c);
        const Tensor right = matmul(a, matmul(b, c));
        for (std::int64_t i = 0; i < left.numel(); ++i)
            CHECK(test::rel_err(left[i], right[i]) < 1e-12);
    }
}

TEST_CASE("matmul agrees with the naive reference") {
    Rng rng(12);
    const Tensor a = random_tensor({7, 9}, rng);
    const Tensor b = random_tensor({9, 4}, rng);
    const Tensor got = matmul(a, b);
    const Tensor want = matmul_naive(a, b);
    for (std::int64_t i = 0; i < got.numel(); ++i)
        CHECK(test::rel_err(got[i], want[i]) < 1e-12);
}

TEST_CASE("conv2d identity kernel") {
    Rng rng(13);
    const Tensor input = random_tensor({1, 5, 5}, rng);
    Tensor kernel({1, 1, 1, 1}, {1.0});
    const Tensor out = conv2d(input, kernel, 1, 0, 1);
    REQUIRE(out.same_shape(input));
    for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(out[i] == input[i]);
}

TEST_CASE("conv2d geometry matches the conv1 accounting row") {
    // 3x224x224 through a 64x3x7x7 stride-2 pad-3 kernel -> 64x112x112
    const Tensor input({3, 224, 224});
    const Tensor kernel({64, 3, 7, 7});
    const Conv2dGeom g = conv2d_geometry(input, kernel, 2, 3, 1);
    CHECK(g.out_h == 112);
    CHECK(g.out_w == 112);
    CHECK(112 * 112 * 9408 == 118013952);
}

TEST_CASE("conv2d all-zero kernel annihilates") {
    Rng rng(14);
    const Tensor input = random_tensor({2, 6, 6}, rng);
    const Tensor kernel({3, 2, 3, 3});
    const Tensor out = conv2d(input, kernel, 1, 1, 1);
    for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("conv2d equals the 6-nested-loop reference") {
    Rng rng(15);
    for (int trial = 0; trial < 8; ++trial) {
        const std::int64_t stride = 1 + static_cast<std::int64_t>(rng.bounded(2));
        const std::int64_t padding = static_cast<std::int64_t>(rng.bounded(3));
        const Tensor input = random_tensor({4, 8, 8}, rng);
        const Tensor kernel = random_tensor({3, 4, 3, 3}, rng);
        const Tensor got = conv2d(input, kernel, stride, padding, 1);
        const Tensor want = conv2d_reference(input, kernel, stride, padding);
        REQUIRE(got.same_shape(want));
        for (std::int64_t i = 0; i < got.numel(); ++i)
            CHECK(test::rel_err(got[i], want[i]) < 1e-12);
    }
}

TEST_CASE("depthwise conv2d splits channels") {
    Rng rng(16);
    const Tensor input = random_tensor({3, 6, 6}, rng);
    const Tensor kernel = random_tensor({3, 1, 3, 3}, rng);
    const Tensor got = conv2d(input, kernel, 1, 1, 3);
    // per-channel reference: each output channel sees only its own input
    for (std::int64_t c = 0; c < 3; ++c) {
        Tensor in1({1, 6, 6});
        std::copy(input.data() + c * 36, input.data() + (c + 1) * 36, in1.data());
        Tensor k1({1, 1, 3, 3});
        std::copy(kernel.data() + c * 9, kernel.data() + (c + 1) * 9, k1.data());
        const Tensor want = conv2d_reference(in1, k1, 1, 1);
        for (std::int64_t i = 0; i < 36; ++i)
            CHECK(test::rel_err(got[c * 36 + i], want[i]) < 1e-12);
    }
}

TEST_CASE("conv2d rejects invalid geometry") {
    CHECK_THROWS_AS(conv2d(Tensor({3, 4, 4}), Tensor({2, 2, 3, 3}), 1, 0, 1), ShapeError);
    CHECK_THROWS_AS(conv2d(Tensor({3, 2, 2}), Tensor({2, 3, 5, 5}), 1, 0, 1), ShapeError);
    CHECK_THROWS_AS(conv2d(Tensor({3, 4, 4}), Tensor({2, 1, 3, 3}), 1, 0, 2), ShapeError);
}

TEST_CASE("elementwise suite") {
    const Tensor x({3}, {-1, 0, 2});
    const Tensor r = relu(x);
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 0.0);
    CHECK(r[2] == 2.0);

    const Tensor sg = sign(Tensor({3}, {-3, 0, 5}));
    CHECK(sg[0] == -1.0);
    CHECK(sg[1] == 0.0);
    CHECK(sg[2] == 1.0);

    const Tensor h = hadamard(Tensor({3}, {1, 2, 3}), Tensor({3}, {4, 5, 6}));
    CHECK(h[0] == 4.0);
    CHECK(h[1] == 10.0);
    CHECK(h[2] == 18.0);

    CHECK_THROWS_AS(hadamard(Tensor({3}), Tensor({4})), ShapeError);
}

TEST_CASE("relu and sign properties") {
    Rng rng(17);
    const Tensor x = random_tensor({257}, rng, -3.0, 3.0);
    const Tensor r = relu(x);
    const Tensor reconstructed = hadamard(sign(x), abs(x));
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        CHECK(r[i] >= 0.0);
        CHECK(reconstructed[i] == x[i]);
    }
}

TEST_CASE("sum_axes reduces the chosen axes") {
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    const int ax0[] = {0};
    const Tensor by_col = sum_axes(t, ax0);
    REQUIRE(by_col.shape() == std::vector<std::int64_t>{3});
    CHECK(by_col[0] == 5.0);
    CHECK(by_col[1] == 7.0);
    CHECK(by_col[2] == 9.0);
    const int ax1[] = {1};
    const Tensor by_row = sum_axes(t, ax1);
    CHECK(by_row[0] == 6.0);
    CHECK(by_row[1] == 15.0);
    const int both[] = {0, 1};
    CHECK(sum_axes(t, both)[0] == 21.0);
    CHECK(sum(t) == 21.0);
}
