#include "strsparse/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace strs::kern {
namespace {

const Ops* select() {
    const char* force = std::getenv("STRSPARSE_KERNELS");
    if (force != nullptr) {
        if (std::strcmp(force, "scalar") == 0) return &scalar::kOps;
#ifdef STRS_KERNELS_AVX2
        if (std::strcmp(force, "avx2") == 0 && avx2::supported()) return &avx2::kOps;
#endif
#ifdef STRS_KERNELS_NEON
        if (std::strcmp(force, "neon") == 0) return &neon::kOps;
#endif
        // unknown or unavailable request: fall through to auto
    }
#ifdef STRS_KERNELS_AVX2
    if (avx2::supported()) return &avx2::kOps;
#endif
#ifdef STRS_KERNELS_NEON
    return &neon::kOps;
#else
    return &scalar::kOps;
#endif
}

}  // namespace

const Ops& ops() {
    static const Ops* active = select();
    return *active;
}

}  // namespace strs::kern
