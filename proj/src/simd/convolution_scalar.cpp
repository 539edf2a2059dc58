#include "epideconv/simd/kernels.hpp"

namespace epideconv::simd::scalar {

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = y[i] + a * x[i];
    }
}

void multiply(const double* x, const double* y, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = x[i] * y[i];
    }
}

}  // namespace epideconv::simd::scalar
