#pragma once
// Data-parallel primitives behind the day-lag convolutions.
//
// Every backend evaluates exactly the same sequence of IEEE multiplies and
// adds per output element (no FMA contraction, no reassociation), so the
// scalar reference and the vector variants agree bit for bit.

#include <cstddef>
#include <span>
#include <string_view>

namespace epideconv::simd {

enum class Backend { scalar, avx2, neon };

struct KernelTable {
    Backend backend;
    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // out[i] = x[i] * y[i]
    void (*multiply)(const double* x, const double* y, double* out, std::size_t n);
};

namespace scalar {
void axpy(double a, const double* x, double* y, std::size_t n);
void multiply(const double* x, const double* y, double* out, std::size_t n);
}  // namespace scalar

#ifdef EPIDECONV_HAVE_AVX2
namespace avx2 {
void axpy(double a, const double* x, double* y, std::size_t n);
void multiply(const double* x, const double* y, double* out, std::size_t n);
}  // namespace avx2
#endif

#ifdef EPIDECONV_HAVE_NEON
namespace neon {
void axpy(double a, const double* x, double* y, std::size_t n);
void multiply(const double* x, const double* y, double* out, std::size_t n);
}  // namespace neon
#endif

std::string_view backend_name(Backend b) noexcept;

/// True when the backend was compiled in and the running CPU supports it.
bool backend_supported(Backend b) noexcept;

/// Table for a specific backend; throws std::invalid_argument if unsupported.
const KernelTable& table_for(Backend b);

/// Best supported backend, chosen once per process. The environment variable
/// EPIDECONV_SIMD=scalar|avx2|neon overrides the automatic choice.
const KernelTable& active();

/// Causal convolution with a lag offset:
///   out[t] = sum_k h[k] * x[t - lag0 - k]   over valid indices (0-based).
/// `out` must have the same length as `x`.
void convolve(const KernelTable& kt, std::span<const double> x, std::span<const double> h,
              std::size_t lag0, std::span<double> out);

/// Adjoint of `convolve`: out[u] = sum_k h[k] * g[u + lag0 + k].
void correlate(const KernelTable& kt, std::span<const double> g, std::span<const double> h,
               std::size_t lag0, std::span<double> out);

inline void convolve(std::span<const double> x, std::span<const double> h, std::size_t lag0,
                     std::span<double> out) {
    convolve(active(), x, h, lag0, out);
}

inline void correlate(std::span<const double> g, std::span<const double> h, std::size_t lag0,
                      std::span<double> out) {
    correlate(active(), g, h, lag0, out);
}

}  // namespace epideconv::simd
