#include "strsparse/kernels.hpp"

#include <cstring>
#include <vector>

#include "doctest.h"
#include "strsparse/rng.hpp"

using namespace strs;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// exercises full vector blocks plus every tail length
const std::size_t kSizes[] = {1, 2, 3, 4, 5, 7, 8, 16, 33, 127, 1024};

template <typename F>
void for_each_variant(F&& f) {
    f(kern::scalar::kOps);
#ifdef STRS_KERNELS_AVX2
    if (kern::avx2::supported()) f(kern::avx2::kOps);
#endif
#ifdef STRS_KERNELS_NEON
    f(kern::neon::kOps);
#endif
}

}  // namespace

TEST_CASE("simd variants are bit-identical to the scalar reference") {
    Rng rng(42);
    for (std::size_t n : kSizes) {
        const auto w = random_vec(n, rng);
        const auto g = random_vec(n, rng);
        const auto wt = [&] {
            std::vector<double> v(n);
            kern::scalar::kOps.soft_threshold(v.data(), w.data(), n, 0.7);
            return v;
        }();
        const auto alphas = random_vec(n, rng, 0.0, 1.5);

        std::vector<double> ref_out(n), ref_p = w, ref_v = g;
        kern::scalar::kOps.soft_threshold(ref_out.data(), w.data(), n, 0.7);
        const double ref_dot = kern::scalar::kOps.dot(w.data(), g.data(), n);
        const double ref_sum = kern::scalar::kOps.sum(w.data(), n);
        const double ref_inner = kern::scalar::kOps.support_inner(g.data(), w.data(), wt.data(), n);
        kern::scalar::kOps.sgd_update(ref_p.data(), ref_v.data(), g.data(), n, 0.1, 1e-4, 0.9);

        for_each_variant([&](const kern::Ops& ops) {
            CAPTURE(ops.name);
            CAPTURE(n);
            std::vector<double> out(n);

            ops.soft_threshold(out.data(), w.data(), n, 0.7);
            CHECK(std::memcmp(out.data(), ref_out.data(), n * sizeof(double)) == 0);

            std::vector<double> ref2(n);
            ops.soft_threshold_pw(out.data(), w.data(), alphas.data(), n);
            kern::scalar::kOps.soft_threshold_pw(ref2.data(), w.data(), alphas.data(), n);
            CHECK(std::memcmp(out.data(), ref2.data(), n * sizeof(double)) == 0);

            ops.hadamard(out.data(), w.data(), g.data(), n);
            kern::scalar::kOps.hadamard(ref2.data(), w.data(), g.data(), n);
            CHECK(std::memcmp(out.data(), ref2.data(), n * sizeof(double)) == 0);

            ops.relu(out.data(), w.data(), n);
            kern::scalar::kOps.relu(ref2.data(), w.data(), n);
            CHECK(std::memcmp(out.data(), ref2.data(), n * sizeof(double)) == 0);

            ops.mask_nonzero(out.data(), g.data(), wt.data(), n);
            kern::scalar::kOps.mask_nonzero(ref2.data(), g.data(), wt.data(), n);
            CHECK(std::memcmp(out.data(), ref2.data(), n * sizeof(double)) == 0);

            ops.mask_positive(out.data(), g.data(), w.data(), n);
            kern::scalar::kOps.mask_positive(ref2.data(), g.data(), w.data(), n);
            CHECK(std::memcmp(out.data(), ref2.data(), n * sizeof(double)) == 0);

            CHECK(ops.dot(w.data(), g.data(), n) == ref_dot);
            CHECK(ops.sum(w.data(), n) == ref_sum);
            CHECK(ops.support_inner(g.data(), w.data(), wt.data(), n) == ref_inner);
            CHECK(ops.count_zeros(wt.data(), n) ==
                  kern::scalar::kOps.count_zeros(wt.data(), n));

            std::vector<double> p = w, v = g;
            ops.sgd_update(p.data(), v.data(), g.data(), n, 0.1, 1e-4, 0.9);
            CHECK(std::memcmp(p.data(), ref_p.data(), n * sizeof(double)) == 0);
            CHECK(std::memcmp(v.data(), ref_v.data(), n * sizeof(double)) == 0);
        });
    }
}

TEST_CASE("matmul variants agree bitwise across shapes") {
    Rng rng(7);
    const std::size_t shapes[][3] = {{1, 1, 1}, {2, 3, 4}, {5, 7, 9}, {8, 8, 8}, {13, 31, 6}};
    for (const auto& s : shapes) {
        const auto a = random_vec(s[0] * s[1], rng);
        const auto b = random_vec(s[1] * s[2], rng);
        std::vector<double> ref(s[0] * s[2]);
        kern::scalar::kOps.matmul(ref.data(), a.data(), b.data(), s[0], s[1], s[2]);
        for_each_variant([&](const kern::Ops& ops) {
            CAPTURE(ops.name);
            std::vector<double> c(s[0] * s[2]);
            ops.matmul(c.data(), a.data(), b.data(), s[0], s[1], s[2]);
            CHECK(std::memcmp(c.data(), ref.data(), c.size() * sizeof(double)) == 0);
        });
    }
}

TEST_CASE("dispatch honors the override environment variable") {
    // whatever was selected must be one of the registered variants
    const kern::Ops& active = kern::ops();
    bool known = std::strcmp(active.name, "scalar") == 0;
#ifdef STRS_KERNELS_AVX2
    known = known || std::strcmp(active.name, "avx2") == 0;
#endif
#ifdef STRS_KERNELS_NEON
    known = known || std::strcmp(active.name, "neon") == 0;
#endif
    CHECK(known);
}
