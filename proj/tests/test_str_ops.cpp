#include "strsparse/str_ops.hpp"

#include <cmath>

#include "doctest.h"
#include "strsparse/rng.hpp"
#include "testutil.hpp"

using namespace strs;
using test::central_diff;
using test::random_tensor;
using test::rel_err;

TEST_CASE("threshold function values") {
    const ThresholdFn sig{ThresholdKind::kSigmoid, 1.0};
    CHECK(g_eval(sig, 0.0) == 0.5);
    // far-negative initialization keeps the threshold at exactly zero
    CHECK(g_eval(sig, -3200.0) == 0.0);
    CHECK(g_eval(sig, -746.0) == 0.0);
    CHECK(g_eval(sig, 40.0) == doctest::Approx(1.0));

    const ThresholdFn expo{ThresholdKind::kExponential, 1.0};
    CHECK(g_eval(expo, 0.0) == 1.0);
    CHECK(g_eval(expo, -10.0) == doctest::Approx(std::exp(-10.0)));

    const ThresholdFn sig2{ThresholdKind::kSigmoid, 0.25};
    CHECK(g_eval(sig2, 0.0) == doctest::Approx(0.125));
    for (double s : {-5.0, -1.0, 0.0, 2.0}) {
        CHECK(g_eval(sig2, s) > 0.0);
        CHECK(g_eval(sig2, s) < 0.25);
    }
}

TEST_CASE("threshold derivative: analytic values and finite differences") {
    const ThresholdFn sig{ThresholdKind::kSigmoid, 1.0};
    CHECK(g_prime(sig, 0.0) == doctest::Approx(0.25).epsilon(1e-14));
    const ThresholdFn expo{ThresholdKind::kExponential, 1.0};
    CHECK(g_prime(expo, 0.0) == 1.0);

    for (const ThresholdFn fn : {ThresholdFn{ThresholdKind::kSigmoid, 1.0},
                                 ThresholdFn{ThresholdKind::kSigmoid, 0.5},
                                 ThresholdFn{ThresholdKind::kExponential, 1.0},
                                 ThresholdFn{ThresholdKind::kExponential, 2.0}}) {
        for (double s : {-2.0, -1.0, 0.0, 1.0}) {
            const double fd = central_diff([&](double x) { return g_eval(fn, x); }, s, 1e-6);
            CHECK(rel_err(g_prime(fn, s), fd) <= 1e-7);
        }
    }
    // strictly increasing everywhere
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const double s = rng.uniform(-30.0, 5.0);
        CHECK(g_prime(ThresholdFn{ThresholdKind::kSigmoid, 1.0}, s) > 0.0);
        CHECK(g_prime(ThresholdFn{ThresholdKind::kExponential, 1.0}, s) > 0.0);
    }
}

TEST_CASE("soft threshold pointwise examples") {
    CHECK(soft_threshold(3.0, 2.0) == 1.0);
    CHECK(soft_threshold(-3.0, 2.0) == -1.0);
    CHECK(soft_threshold(1.5, 2.0) == 0.0);
    CHECK(soft_threshold(2.0, 2.0) == 0.0);  // boundary maps to zero
    CHECK(soft_threshold(0.0, 0.0) == 0.0);
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        const double w = rng.uniform(-5.0, 5.0);
        CHECK(soft_threshold(w, 0.0) == w);
    }
}

TEST_CASE("soft threshold: shrinkage, Lipschitz continuity, zero-iff predicate") {
    // dyadic-rational inputs keep every subtraction exact, so the predicates
    // are checked with no tolerance
    Rng rng(5);
    auto dyadic = [&](double range) {
        const double step = 0x1.0p-20;
        const std::uint64_t n = static_cast<std::uint64_t>(2.0 * range / step);
        return static_cast<double>(rng.bounded(n)) * step - range;
    };
    for (int i = 0; i < 10000; ++i) {
        const double w = dyadic(4.0);
        const double w2 = dyadic(4.0);
        const double alpha = std::fabs(dyadic(3.0));
        const double y = soft_threshold(w, alpha);
        CHECK(std::fabs(y) <= std::fabs(w));                                   // shrinkage
        CHECK(std::fabs(y - soft_threshold(w2, alpha)) <= std::fabs(w - w2));  // 1-Lipschitz
        CHECK((y == 0.0) == (std::fabs(w) <= alpha));
    }
}

TEST_CASE("str_forward broadcasts by granularity") {
    // per-layer alpha = 0 is the identity
    Rng rng(6);
    const Tensor w = random_tensor({3, 4}, rng);
    StrParam p0 = StrParam::make(Granularity::kPerLayer, w, -1e9, {});
    const Tensor same = str_forward(w, p0);
    for (std::int64_t i = 0; i < w.numel(); ++i) CHECK(same[i] == w[i]);

    // alpha = 0.5 on a hand-built vector
    const Tensor v({3}, {1.0, -0.5, 0.2});
    StrParam p = StrParam::make(Granularity::kPerLayer, v, 0.0, {});  // sigmoid(0) = 0.5
    const Tensor vt = str_forward(v, p);
    CHECK(vt[0] == doctest::Approx(0.5));
    CHECK(vt[1] == 0.0);
    CHECK(vt[2] == 0.0);

    // per-channel limit cases
    const Tensor cw({2, 3}, {0.3, -0.4, 0.2, 0.5, -0.1, 0.6});
    StrParam pc = StrParam::make(Granularity::kPerChannel, cw, 0.0, {});
    pc.s[0] = -1e9;  // alpha ~ 0
    pc.s[1] = 1e9;   // alpha ~ k = 1 >= max|w|
    const Tensor ct = str_forward(cw, pc);
    for (std::int64_t j = 0; j < 3; ++j) {
        CHECK(ct.at2(0, j) == cw.at2(0, j));
        CHECK(ct.at2(1, j) == 0.0);
    }

    // per-weight
    StrParam pw = StrParam::make(Granularity::kPerWeight, cw, -1e9, {});
    pw.s.at2(0, 1) = 1e9;
    const Tensor wt = str_forward(cw, pw);
    CHECK(wt.at2(0, 1) == 0.0);
    CHECK(wt.at2(0, 0) == cw.at2(0, 0));

    // shape mismatch
    StrParam bad = StrParam::make(Granularity::kPerChannel, cw, 0.0, {});
    bad.s = Tensor({5});
    CHECK_THROWS_AS(str_forward(cw, bad), ShapeError);
}

TEST_CASE("monotone sparsification in s") {
    Rng rng(7);
    const Tensor w = random_tensor({128}, rng, -0.9, 0.9);
    StrParam p = StrParam::make(Granularity::kPerLayer, w, -8.0, {});
    double prev = -1;
    for (double s = -8.0; s <= 10.0; s += 0.25) {
        p.s[0] = s;
        const double sp = sparsity(str_forward(w, p));
        CHECK(sp >= prev);
        prev = sp;
    }
    CHECK(prev == 1.0);  // sigmoid(10) > 0.9 >= max|w|
}

TEST_CASE("support shrinks under repeated application") {
    Rng rng(8);
    const Tensor w = random_tensor({200}, rng);
    StrParam p = StrParam::make(Granularity::kPerLayer, w, -1.0, {});
    const Tensor once = str_forward(w, p);
    const Tensor twice = str_forward(once, p);
    for (std::int64_t i = 0; i < w.numel(); ++i) {
        if (twice[i] != 0.0) CHECK(once[i] != 0.0);  // support(S(S(w))) within support(S(w))
        if (once[i] != 0.0) CHECK(std::fabs(twice[i]) < std::fabs(once[i]));
    }
}

TEST_CASE("grad_w masks by the support") {
    const Tensor g({3}, {1, 1, 1});
    const Tensor wt({3}, {0.5, 0.0, 0.0});
    const Tensor gw = grad_w(g, wt);
    CHECK(gw[0] == 1.0);
    CHECK(gw[1] == 0.0);
    CHECK(gw[2] == 0.0);

    Rng rng(9);
    const Tensor dense = random_tensor({64}, rng);
    const Tensor g2 = random_tensor({64}, rng);
    const Tensor all = grad_w(g2, dense);  // no exact zeros in a random tensor
    for (std::int64_t i = 0; i < 64; ++i) CHECK(all[i] == g2[i]);
    const Tensor zero({64});
    const Tensor none = grad_w(g2, zero);
    for (std::int64_t i = 0; i < 64; ++i) CHECK(none[i] == 0.0);
    CHECK_THROWS_AS(grad_w(Tensor({3}), Tensor({4})), ShapeError);
}

TEST_CASE("grad_s analytic form on a single weight") {
    const Tensor w({1}, {2.0});
    StrParam p =
        StrParam::make(Granularity::kPerLayer, w, 0.0, {ThresholdKind::kExponential, 1.0});
    const Tensor g({1}, {1.0});
    const Tensor gs = grad_s(g, w, p);
    // ds = -g'(s) * (1 * sign(2) * 1{|2|>1}) = -g'(0) = -1
    CHECK(gs[0] == doctest::Approx(-1.0));

    // all weights pruned -> zero gradient
    StrParam phi =
        StrParam::make(Granularity::kPerLayer, w, 2.0, {ThresholdKind::kExponential, 1.0});
    CHECK(grad_s(g, w, phi)[0] == 0.0);  // alpha = e^2 > 2
}

namespace {

/// Loss L(s) = <G, str_forward(W, p(s))>; analytic dL/ds vs central differences.
/// Returns false when the random instance violates the margin condition.
bool check_grad_s_fd(Granularity gran, ThresholdKind kind, Rng& rng) {
    const Tensor w = random_tensor({6, 10}, rng);
    const Tensor g = random_tensor({6, 10}, rng);
    StrParam p = StrParam::make(gran, w, 0.0, {kind, 1.0});
    for (std::int64_t i = 0; i < p.s.numel(); ++i) p.s[i] = rng.uniform(-2.5, -0.5);

    const Tensor alphas = p.thresholds();
    for (std::int64_t i = 0; i < w.numel(); ++i) {
        const double alpha =
            gran == Granularity::kPerWeight
                ? alphas[i]
                : (gran == Granularity::kPerChannel ? alphas[i / 10] : alphas[0]);
        if (std::fabs(std::fabs(w[i]) - alpha) <= 1e-3) return false;
    }

    const Tensor analytic = grad_s(g, w, p);
    for (std::int64_t j = 0; j < p.s.numel(); ++j) {
        auto loss = [&](double sval) {
            StrParam q = p;
            q.s[j] = sval;
            const Tensor wt = str_forward(w, q);
            double acc = 0;
            for (std::int64_t i = 0; i < wt.numel(); ++i) acc += g[i] * wt[i];
            return acc;
        };
        const double fd = central_diff(loss, p.s[j], 1e-6);
        CHECK(rel_err(analytic[j], fd) <= 1e-5);
    }
    return true;
}

}  // namespace

TEST_CASE("grad_s matches finite differences across granularities") {
    Rng rng(10);
    int checked = 0;
    for (int trial = 0; trial < 60 && checked < 100; ++trial) {
        checked += check_grad_s_fd(Granularity::kPerLayer, ThresholdKind::kSigmoid, rng);
        checked += check_grad_s_fd(Granularity::kPerChannel, ThresholdKind::kSigmoid, rng);
        checked += check_grad_s_fd(Granularity::kPerWeight, ThresholdKind::kExponential, rng);
        checked += check_grad_s_fd(Granularity::kGlobal, ThresholdKind::kSigmoid, rng);
    }
    CHECK(checked >= 100);  // margin-passing instances actually verified
}

TEST_CASE("sparsity counts exact zeros") {
    CHECK(sparsity(Tensor({4})) == 1.0);
    CHECK(sparsity(Tensor({4}, {1, 2, 3, 4})) == 0.0);
    CHECK(sparsity(Tensor({4}, {0, 1, 0, 2})) == 0.5);
    CHECK(nonzero_count(Tensor({4}, {0, 1, 0, 2})) == 2);
}
