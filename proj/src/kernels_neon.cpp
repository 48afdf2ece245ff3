#include "strsparse/kernels.hpp"

#ifdef STRS_KERNELS_NEON

#include <arm_neon.h>

#include <cmath>

// NEON variants (f64x2). The canonical 4-lane reduction order is kept by
// pairing two accumulators: acc01 holds lanes {0,1} of each 4-block, acc23
// lanes {2,3}. Multiply-accumulate is explicit mul+add, matching scalar.
namespace strs::kern::neon {
namespace {

inline float64x2_t vzero() { return vdupq_n_f64(0.0); }

inline uint64x2_t sign_bits(float64x2_t v) {
    return vandq_u64(vreinterpretq_u64_f64(v), vdupq_n_u64(0x8000000000000000ull));
}

// t > 0 ? t : +0, matching the scalar branch for every bit pattern (vmaxq
// would propagate NaN where the other variants return 0)
inline float64x2_t positive_part(float64x2_t t) {
    return vreinterpretq_f64_u64(
        vandq_u64(vreinterpretq_u64_f64(t), vcgtq_f64(t, vzero())));
}

void soft_threshold_impl(double* dst, const double* w, std::size_t n, double alpha) {
    float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t vw = vld1q_f64(w + i);
        float64x2_t r = positive_part(vsubq_f64(vabsq_f64(vw), va));
        vst1q_f64(dst + i, vreinterpretq_f64_u64(
                               vorrq_u64(vreinterpretq_u64_f64(r), sign_bits(vw))));
    }
    for (; i < n; ++i) {
        double t = std::fabs(w[i]) - alpha;
        double r = t > 0.0 ? t : 0.0;
        dst[i] = std::copysign(r, w[i]);
    }
}

void soft_threshold_pw_impl(double* dst, const double* w, const double* alpha, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t vw = vld1q_f64(w + i);
        float64x2_t r = positive_part(vsubq_f64(vabsq_f64(vw), vld1q_f64(alpha + i)));
        vst1q_f64(dst + i, vreinterpretq_f64_u64(
                               vorrq_u64(vreinterpretq_u64_f64(r), sign_bits(vw))));
    }
    for (; i < n; ++i) {
        double t = std::fabs(w[i]) - alpha[i];
        double r = t > 0.0 ? t : 0.0;
        dst[i] = std::copysign(r, w[i]);
    }
}

void hadamard_impl(double* dst, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(dst + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) dst[i] = a[i] * b[i];
}

void add_impl(double* dst, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(dst + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) dst[i] = a[i] + b[i];
}

void scale_impl(double* dst, const double* x, double c, std::size_t n) {
    float64x2_t vc = vdupq_n_f64(c);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(dst + i, vmulq_f64(vld1q_f64(x + i), vc));
    for (; i < n; ++i) dst[i] = x[i] * c;
}

void axpy_impl(double* y, double a, const double* x, std::size_t n) {
    float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t prod = vmulq_f64(va, vld1q_f64(x + i));
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), prod));
    }
    for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void relu_impl(double* dst, const double* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(dst + i, positive_part(vld1q_f64(x + i)));
    for (; i < n; ++i) dst[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void mask_nonzero_impl(double* dst, const double* g, const double* ref, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        uint64x2_t eq = vceqq_f64(vld1q_f64(ref + i), vzero());
        uint64x2_t keep = veorq_u64(eq, vdupq_n_u64(~0ull));
        vst1q_f64(dst + i, vreinterpretq_f64_u64(
                               vandq_u64(vreinterpretq_u64_f64(vld1q_f64(g + i)), keep)));
    }
    for (; i < n; ++i) dst[i] = ref[i] != 0.0 ? g[i] : 0.0;
}

void mask_positive_impl(double* dst, const double* g, const double* ref, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        uint64x2_t gt = vcgtq_f64(vld1q_f64(ref + i), vzero());
        vst1q_f64(dst + i, vreinterpretq_f64_u64(
                               vandq_u64(vreinterpretq_u64_f64(vld1q_f64(g + i)), gt)));
    }
    for (; i < n; ++i) dst[i] = ref[i] > 0.0 ? g[i] : 0.0;
}

void sgd_update_impl(double* p, double* v, const double* g, std::size_t n,
                     double lr, double wd, double mom) {
    float64x2_t vlr = vdupq_n_f64(lr), vwd = vdupq_n_f64(wd), vmom = vdupq_n_f64(mom);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t vp = vld1q_f64(p + i);
        float64x2_t vv = vld1q_f64(v + i);
        float64x2_t step = vaddq_f64(vld1q_f64(g + i), vmulq_f64(vwd, vp));
        float64x2_t vel = vaddq_f64(vmulq_f64(vmom, vv), step);
        vst1q_f64(v + i, vel);
        vst1q_f64(p + i, vsubq_f64(vp, vmulq_f64(vlr, vel)));
    }
    for (; i < n; ++i) {
        double step = g[i] + wd * p[i];
        double vel = mom * v[i] + step;
        v[i] = vel;
        p[i] = p[i] - lr * vel;
    }
}

void matmul_impl(double* c, const double* a, const double* b,
                 std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            double aik = a[i * k + kk];
            const double* brow = b + kk * n;
            float64x2_t vaik = vdupq_n_f64(aik);
            std::size_t j = 0;
            for (; j + 2 <= n; j += 2) {
                float64x2_t prod = vmulq_f64(vaik, vld1q_f64(brow + j));
                vst1q_f64(crow + j, vaddq_f64(vld1q_f64(crow + j), prod));
            }
            for (; j < n; ++j) crow[j] = crow[j] + aik * brow[j];
        }
    }
}

inline double reduce_lanes(float64x2_t acc01, float64x2_t acc23) {
    double l0 = vgetq_lane_f64(acc01, 0), l1 = vgetq_lane_f64(acc01, 1);
    double l2 = vgetq_lane_f64(acc23, 0), l3 = vgetq_lane_f64(acc23, 1);
    return (l0 + l1) + (l2 + l3);
}

double dot_impl(const double* a, const double* b, std::size_t n) {
    float64x2_t acc01 = vzero(), acc23 = vzero();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
        acc23 = vaddq_f64(acc23, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
    }
    double tail = 0;
    for (; i < n; ++i) tail = tail + a[i] * b[i];
    return reduce_lanes(acc01, acc23) + tail;
}

double sum_impl(const double* x, std::size_t n) {
    float64x2_t acc01 = vzero(), acc23 = vzero();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc01 = vaddq_f64(acc01, vld1q_f64(x + i));
        acc23 = vaddq_f64(acc23, vld1q_f64(x + i + 2));
    }
    double tail = 0;
    for (; i < n; ++i) tail = tail + x[i];
    return reduce_lanes(acc01, acc23) + tail;
}

inline double signed_term(double g, double w, double wt) {
    if (wt == 0.0) return 0.0;
    return w > 0.0 ? g : (w < 0.0 ? -g : 0.0);
}

inline float64x2_t signed_block(const double* g, const double* w, const double* wt) {
    float64x2_t vw = vld1q_f64(w);
    uint64x2_t nz_wt = veorq_u64(vceqq_f64(vld1q_f64(wt), vzero()), vdupq_n_u64(~0ull));
    uint64x2_t nz_w = veorq_u64(vceqq_f64(vw, vzero()), vdupq_n_u64(~0ull));
    uint64x2_t val = veorq_u64(vreinterpretq_u64_f64(vld1q_f64(g)), sign_bits(vw));
    return vreinterpretq_f64_u64(vandq_u64(val, vandq_u64(nz_wt, nz_w)));
}

double support_inner_impl(const double* g, const double* w, const double* wt, std::size_t n) {
    float64x2_t acc01 = vzero(), acc23 = vzero();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc01 = vaddq_f64(acc01, signed_block(g + i, w + i, wt + i));
        acc23 = vaddq_f64(acc23, signed_block(g + i + 2, w + i + 2, wt + i + 2));
    }
    double tail = 0;
    for (; i < n; ++i) tail = tail + signed_term(g[i], w[i], wt[i]);
    return reduce_lanes(acc01, acc23) + tail;
}

std::int64_t count_zeros_impl(const double* x, std::size_t n) {
    std::int64_t z = 0;
    for (std::size_t i = 0; i < n; ++i) z += (x[i] == 0.0);
    return z;
}

}  // namespace

const Ops kOps = {
    soft_threshold_impl, soft_threshold_pw_impl, hadamard_impl, add_impl,
    scale_impl,          axpy_impl,              relu_impl,     mask_nonzero_impl,
    mask_positive_impl,  sgd_update_impl,        matmul_impl,   dot_impl,
    sum_impl,            support_inner_impl,     count_zeros_impl,
    "neon",
};

}  // namespace strs::kern::neon

#endif  // STRS_KERNELS_NEON
