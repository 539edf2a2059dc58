#include "epideconv/simd/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace epideconv::simd {

namespace {

constexpr KernelTable kScalar{Backend::scalar, &scalar::axpy, &scalar::multiply};
#ifdef EPIDECONV_HAVE_AVX2
constexpr KernelTable kAvx2{Backend::avx2, &avx2::axpy, &avx2::multiply};
#endif
#ifdef EPIDECONV_HAVE_NEON
constexpr KernelTable kNeon{Backend::neon, &neon::axpy, &neon::multiply};
#endif

const KernelTable& select_default() {
    if (const char* env = std::getenv("EPIDECONV_SIMD")) {
        const std::string name{env};
        for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
            if (name == backend_name(b) && backend_supported(b)) {
                return table_for(b);
            }
        }
    }
    if (backend_supported(Backend::avx2)) {
        return table_for(Backend::avx2);
    }
    if (backend_supported(Backend::neon)) {
        return table_for(Backend::neon);
    }
    return kScalar;
}

}  // namespace

std::string_view backend_name(Backend b) noexcept {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "unknown";
}

bool backend_supported(Backend b) noexcept {
    switch (b) {
        case Backend::scalar: return true;
        case Backend::avx2:
#if defined(EPIDECONV_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
        case Backend::neon:
#ifdef EPIDECONV_HAVE_NEON
            return true;
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& table_for(Backend b) {
    if (!backend_supported(b)) {
        throw std::invalid_argument("SIMD backend not available: " + std::string(backend_name(b)));
    }
    switch (b) {
#ifdef EPIDECONV_HAVE_AVX2
        case Backend::avx2: return kAvx2;
#endif
#ifdef EPIDECONV_HAVE_NEON
        case Backend::neon: return kNeon;
#endif
        default: return kScalar;
    }
}

const KernelTable& active() {
    static const KernelTable& chosen = select_default();
    return chosen;
}

void convolve(const KernelTable& kt, std::span<const double> x, std::span<const double> h,
              std::size_t lag0, std::span<double> out) {
    if (out.size() != x.size()) {
        throw std::invalid_argument("convolve: output length must match input length");
    }
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t n = x.size();
    for (std::size_t k = 0; k < h.size(); ++k) {
        const std::size_t shift = lag0 + k;
        if (shift >= n) {
            break;
        }
        kt.axpy(h[k], x.data(), out.data() + shift, n - shift);
    }
}

void correlate(const KernelTable& kt, std::span<const double> g, std::span<const double> h,
               std::size_t lag0, std::span<double> out) {
    if (out.size() != g.size()) {
        throw std::invalid_argument("correlate: output length must match input length");
    }
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t n = g.size();
    for (std::size_t k = 0; k < h.size(); ++k) {
        const std::size_t shift = lag0 + k;
        if (shift >= n) {
            break;
        }
        kt.axpy(h[k], g.data() + shift, out.data(), n - shift);
    }
}

}  // namespace epideconv::simd
