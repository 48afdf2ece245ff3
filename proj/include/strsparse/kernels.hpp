#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

// Data-parallel inner loops used by the tensor core. Every kernel exists as a
// scalar reference implementation plus SIMD variants (AVX2 on x86-64, NEON on
// aarch64) selected once at startup from runtime CPU features. All variants
// are bit-identical by construction: elementwise kernels perform the same
// per-lane operations as the scalar loop, multiply-accumulate is written as
// separate mul+add (no FMA contraction), and reductions use a fixed 4-lane
// accumulation order regardless of vector width. Dispatch therefore never
// affects results, only throughput.
namespace strs::kern {

struct Ops {
    // dst[i] = sign(w[i]) * max(|w[i]| - alpha, 0); dst may alias w
    void (*soft_threshold)(double* dst, const double* w, std::size_t n, double alpha);
    // per-element thresholds
    void (*soft_threshold_pw)(double* dst, const double* w, const double* alpha, std::size_t n);
    void (*hadamard)(double* dst, const double* a, const double* b, std::size_t n);
    void (*add)(double* dst, const double* a, const double* b, std::size_t n);
    void (*scale)(double* dst, const double* x, double c, std::size_t n);
    void (*axpy)(double* y, double a, const double* x, std::size_t n);
    void (*relu)(double* dst, const double* x, std::size_t n);
    // dst[i] = ref[i] != 0 ? g[i] : 0
    void (*mask_nonzero)(double* dst, const double* g, const double* ref, std::size_t n);
    // dst[i] = ref[i] > 0 ? g[i] : 0
    void (*mask_positive)(double* dst, const double* g, const double* ref, std::size_t n);
    // v = mom*v + (g + wd*p); p -= lr*v
    void (*sgd_update)(double* p, double* v, const double* g, std::size_t n,
                       double lr, double wd, double mom);
    // row-major C[m x n] = A[m x k] * B[k x n]; C must not alias A or B
    void (*matmul)(double* c, const double* a, const double* b,
                   std::size_t m, std::size_t k, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* x, std::size_t n);
    // sum of g[i]*sign(w[i]) over entries where wt[i] != 0
    double (*support_inner)(const double* g, const double* w, const double* wt, std::size_t n);
    std::int64_t (*count_zeros)(const double* x, std::size_t n);
    const char* name;
};

// Active kernel set. Honors STRSPARSE_KERNELS={auto,scalar,avx2,neon} on
// first use; unavailable requests fall back to scalar.
const Ops& ops();

namespace scalar { extern const Ops kOps; }

#if defined(__x86_64__) || defined(_M_X64)
#define STRS_KERNELS_AVX2 1
namespace avx2 {
extern const Ops kOps;
bool supported();  // runtime CPUID check
}
#endif

#if defined(__aarch64__)
#define STRS_KERNELS_NEON 1
namespace neon { extern const Ops kOps; }
#endif

}  // namespace strs::kern
