#include "epideconv/simd/kernels.hpp"

#include <arm_neon.h>

namespace epideconv::simd::neon {

void axpy(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        // vmulq + vaddq rather than vfmaq: keeps the rounding identical to scalar.
        const float64x2_t p0 = vmulq_f64(va, vld1q_f64(x + i));
        const float64x2_t p1 = vmulq_f64(va, vld1q_f64(x + i + 2));
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), p0));
        vst1q_f64(y + i + 2, vaddq_f64(vld1q_f64(y + i + 2), p1));
    }
    for (; i < n; ++i) {
        y[i] = y[i] + a * x[i];
    }
}

void multiply(const double* x, const double* y, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(out + i, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    }
    for (; i < n; ++i) {
        out[i] = x[i] * y[i];
    }
}

}  // namespace epideconv::simd::neon
