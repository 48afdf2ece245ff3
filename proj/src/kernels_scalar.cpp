#include "strsparse/kernels.hpp"

#include <cmath>

// Reference kernels. Reductions accumulate into four lanes (element i goes to
// lane i%4 within each full block of four, tail summed separately) and combine
// as ((l0+l1)+(l2+l3))+tail so that vector variants can reproduce the exact
// rounding sequence.
namespace strs::kern::scalar {
namespace {

void soft_threshold_impl(double* dst, const double* w, std::size_t n, double alpha) {
    for (std::size_t i = 0; i < n; ++i) {
        double t = std::fabs(w[i]) - alpha;
        double r = t > 0.0 ? t : 0.0;
        dst[i] = std::copysign(r, w[i]);
    }
}

void soft_threshold_pw_impl(double* dst, const double* w, const double* alpha, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double t = std::fabs(w[i]) - alpha[i];
        double r = t > 0.0 ? t : 0.0;
        dst[i] = std::copysign(r, w[i]);
    }
}

void hadamard_impl(double* dst, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}

void add_impl(double* dst, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
}

void scale_impl(double* dst, const double* x, double c, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = x[i] * c;
}

void axpy_impl(double* y, double a, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void relu_impl(double* dst, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void mask_nonzero_impl(double* dst, const double* g, const double* ref, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = ref[i] != 0.0 ? g[i] : 0.0;
}

void mask_positive_impl(double* dst, const double* g, const double* ref, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = ref[i] > 0.0 ? g[i] : 0.0;
}

void sgd_update_impl(double* p, double* v, const double* g, std::size_t n,
                     double lr, double wd, double mom) {
    for (std::size_t i = 0; i < n; ++i) {
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
            for (std::size_t j = 0; j < n; ++j) crow[j] = crow[j] + aik * brow[j];
        }
    }
}

double dot_impl(const double* a, const double* b, std::size_t n) {
    double l0 = 0, l1 = 0, l2 = 0, l3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        l0 = l0 + a[i] * b[i];
        l1 = l1 + a[i + 1] * b[i + 1];
        l2 = l2 + a[i + 2] * b[i + 2];
        l3 = l3 + a[i + 3] * b[i + 3];
    }
    double tail = 0;
    for (; i < n; ++i) tail = tail + a[i] * b[i];
    return ((l0 + l1) + (l2 + l3)) + tail;
}

double sum_impl(const double* x, std::size_t n) {
    double l0 = 0, l1 = 0, l2 = 0, l3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        l0 = l0 + x[i];
        l1 = l1 + x[i + 1];
        l2 = l2 + x[i + 2];
        l3 = l3 + x[i + 3];
    }
    double tail = 0;
    for (; i < n; ++i) tail = tail + x[i];
    return ((l0 + l1) + (l2 + l3)) + tail;
}

inline double signed_term(double g, double w, double wt) {
    if (wt == 0.0) return 0.0;
    return w > 0.0 ? g : (w < 0.0 ? -g : 0.0);
}

double support_inner_impl(const double* g, const double* w, const double* wt, std::size_t n) {
    double l0 = 0, l1 = 0, l2 = 0, l3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        l0 = l0 + signed_term(g[i], w[i], wt[i]);
        l1 = l1 + signed_term(g[i + 1], w[i + 1], wt[i + 1]);
        l2 = l2 + signed_term(g[i + 2], w[i + 2], wt[i + 2]);
        l3 = l3 + signed_term(g[i + 3], w[i + 3], wt[i + 3]);
    }
    double tail = 0;
    for (; i < n; ++i) tail = tail + signed_term(g[i], w[i], wt[i]);
    return ((l0 + l1) + (l2 + l3)) + tail;
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
    "scalar",
};

}  // namespace strs::kern::scalar
