#include "strsparse/kernels.hpp"

#ifdef STRS_KERNELS_AVX2

#include <immintrin.h>

#include <cmath>

// AVX2 variants. Multiply-accumulate stays mul+add (no FMA) and reduction
// lanes map 1:1 onto the scalar reference's four accumulators, so every
// kernel here is bit-identical to the scalar path.
namespace strs::kern::avx2 {
namespace {

const __m256d kSignMask = _mm256_set1_pd(-0.0);
const __m256d kZero = _mm256_setzero_pd();

inline double hsum_lanes(__m256d acc) {
    __m128d lo = _mm256_castpd256_pd128(acc);
    __m128d hi = _mm256_extractf128_pd(acc, 1);
    double l0 = _mm_cvtsd_f64(lo);
    double l1 = _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
    double l2 = _mm_cvtsd_f64(hi);
    double l3 = _mm_cvtsd_f64(_mm_unpackhi_pd(hi, hi));
    return (l0 + l1) + (l2 + l3);
}

void soft_threshold_impl(double* dst, const double* w, std::size_t n, double alpha) {
    __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vw = _mm256_loadu_pd(w + i);
        __m256d mag = _mm256_andnot_pd(kSignMask, vw);
        __m256d r = _mm256_max_pd(_mm256_sub_pd(mag, va), kZero);
        __m256d out = _mm256_or_pd(r, _mm256_and_pd(vw, kSignMask));
        _mm256_storeu_pd(dst + i, out);
    }
    for (; i < n; ++i) {
        double t = std::fabs(w[i]) - alpha;
        double r = t > 0.0 ? t : 0.0;
        dst[i] = std::copysign(r, w[i]);
    }
}

void soft_threshold_pw_impl(double* dst, const double* w, const double* alpha, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vw = _mm256_loadu_pd(w + i);
        __m256d va = _mm256_loadu_pd(alpha + i);
        __m256d mag = _mm256_andnot_pd(kSignMask, vw);
        __m256d r = _mm256_max_pd(_mm256_sub_pd(mag, va), kZero);
        _mm256_storeu_pd(dst + i, _mm256_or_pd(r, _mm256_and_pd(vw, kSignMask)));
    }
    for (; i < n; ++i) {
        double t = std::fabs(w[i]) - alpha[i];
        double r = t > 0.0 ? t : 0.0;
        dst[i] = std::copysign(r, w[i]);
    }
}

void hadamard_impl(double* dst, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) dst[i] = a[i] * b[i];
}

void add_impl(double* dst, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) dst[i] = a[i] + b[i];
}

void scale_impl(double* dst, const double* x, double c, std::size_t n) {
    __m256d vc = _mm256_set1_pd(c);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), vc));
    for (; i < n; ++i) dst[i] = x[i] * c;
}

void axpy_impl(double* y, double a, const double* x, std::size_t n) {
    __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void relu_impl(double* dst, const double* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(dst + i, _mm256_max_pd(_mm256_loadu_pd(x + i), kZero));
    for (; i < n; ++i) dst[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void mask_nonzero_impl(double* dst, const double* g, const double* ref, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d m = _mm256_cmp_pd(_mm256_loadu_pd(ref + i), kZero, _CMP_NEQ_OQ);
        _mm256_storeu_pd(dst + i, _mm256_and_pd(_mm256_loadu_pd(g + i), m));
    }
    for (; i < n; ++i) dst[i] = ref[i] != 0.0 ? g[i] : 0.0;
}

void mask_positive_impl(double* dst, const double* g, const double* ref, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d m = _mm256_cmp_pd(_mm256_loadu_pd(ref + i), kZero, _CMP_GT_OQ);
        _mm256_storeu_pd(dst + i, _mm256_and_pd(_mm256_loadu_pd(g + i), m));
    }
    for (; i < n; ++i) dst[i] = ref[i] > 0.0 ? g[i] : 0.0;
}

void sgd_update_impl(double* p, double* v, const double* g, std::size_t n,
                     double lr, double wd, double mom) {
    __m256d vlr = _mm256_set1_pd(lr);
    __m256d vwd = _mm256_set1_pd(wd);
    __m256d vmom = _mm256_set1_pd(mom);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vp = _mm256_loadu_pd(p + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        __m256d vg = _mm256_loadu_pd(g + i);
        __m256d step = _mm256_add_pd(vg, _mm256_mul_pd(vwd, vp));
        __m256d vel = _mm256_add_pd(_mm256_mul_pd(vmom, vv), step);
        _mm256_storeu_pd(v + i, vel);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(vp, _mm256_mul_pd(vlr, vel)));
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
            __m256d vaik = _mm256_set1_pd(aik);
            std::size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d prod = _mm256_mul_pd(vaik, _mm256_loadu_pd(brow + j));
                _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j), prod));
            }
            for (; j < n; ++j) crow[j] = crow[j] + aik * brow[j];
        }
    }
}

double dot_impl(const double* a, const double* b, std::size_t n) {
    __m256d acc = kZero;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, prod);
    }
    double tail = 0;
    for (; i < n; ++i) tail = tail + a[i] * b[i];
    return hsum_lanes(acc) + tail;
}

double sum_impl(const double* x, std::size_t n) {
    __m256d acc = kZero;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double tail = 0;
    for (; i < n; ++i) tail = tail + x[i];
    return hsum_lanes(acc) + tail;
}

inline double signed_term(double g, double w, double wt) {
    if (wt == 0.0) return 0.0;
    return w > 0.0 ? g : (w < 0.0 ? -g : 0.0);
}

double support_inner_impl(const double* g, const double* w, const double* wt, std::size_t n) {
    __m256d acc = kZero;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vw = _mm256_loadu_pd(w + i);
        __m256d m = _mm256_and_pd(_mm256_cmp_pd(_mm256_loadu_pd(wt + i), kZero, _CMP_NEQ_OQ),
                                  _mm256_cmp_pd(vw, kZero, _CMP_NEQ_OQ));
        __m256d val = _mm256_xor_pd(_mm256_loadu_pd(g + i), _mm256_and_pd(vw, kSignMask));
        acc = _mm256_add_pd(acc, _mm256_and_pd(val, m));
    }
    double tail = 0;
    for (; i < n; ++i) tail = tail + signed_term(g[i], w[i], wt[i]);
    return hsum_lanes(acc) + tail;
}

std::int64_t count_zeros_impl(const double* x, std::size_t n) {
    std::int64_t z = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d m = _mm256_cmp_pd(_mm256_loadu_pd(x + i), kZero, _CMP_EQ_OQ);
        z += __builtin_popcount(static_cast<unsigned>(_mm256_movemask_pd(m)));
    }
    for (; i < n; ++i) z += (x[i] == 0.0);
    return z;
}

}  // namespace

bool supported() { return __builtin_cpu_supports("avx2"); }

const Ops kOps = {
    soft_threshold_impl, soft_threshold_pw_impl, hadamard_impl, add_impl,
    scale_impl,          axpy_impl,              relu_impl,     mask_nonzero_impl,
    mask_positive_impl,  sgd_update_impl,        matmul_impl,   dot_impl,
    sum_impl,            support_inner_impl,     count_zeros_impl,
    "avx2",
};

}  // namespace strs::kern::avx2

#endif  // STRS_KERNELS_AVX2
