#include "epideconv/kernels.hpp"

#include "epideconv/errors.hpp"
#include "epideconv/format.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace epideconv {

GammaSpec gamma_from_moments(double mean, double sd) {
    if (!(mean > 0.0) || !(sd > 0.0) || !std::isfinite(mean) || !std::isfinite(sd)) {
        throw InvalidParameter("gamma_from_moments: mean and sd must be positive and finite");
    }
    const double var = sd * sd;
    return GammaSpec{mean, sd, mean * mean / var, var / mean};
}

double gamma_cdf(const GammaSpec& spec, double x) {
    if (x <= 0.0) {
        return 0.0;
    }
    return boost::math::gamma_p(spec.shape, x / spec.scale);
}

Kernel::Kernel(std::vector<double> values, std::size_t support_start, double captured_mass)
    : values_(std::move(values)), support_start_(support_start), captured_mass_(captured_mass) {
    if (values_.empty()) {
        throw InvalidParameter("Kernel: empty support");
    }
}

double Kernel::at(std::size_t tau) const noexcept {
    if (tau < support_start_ || tau > last_lag()) {
        return 0.0;
    }
    return values_[tau - support_start_];
}

double Kernel::mean() const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        m += static_cast<double>(support_start_ + i) * values_[i];
    }
    return m;
}

double Kernel::sd() const noexcept {
    const double m = mean();
    double v = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const double d = static_cast<double>(support_start_ + i) - m;
        v += d * d * values_[i];
    }
    return std::sqrt(v);
}

namespace {

/// Gamma mass on [lo, hi); upper-tail differences past the mean keep the far
/// tail free of cancellation.
double interval_mass(const GammaSpec& spec, double lo, double hi) {
    if (lo / spec.scale >= spec.shape) {
        return boost::math::gamma_q(spec.shape, lo / spec.scale) - boost::math::gamma_q(spec.shape, hi / spec.scale);
    }
    return gamma_cdf(spec, hi) - gamma_cdf(spec, lo);
}

}  // namespace

Kernel discretize(const GammaSpec& spec, std::size_t support_start, std::size_t length) {
    if (length < 1) {
        throw InvalidParameter("discretize: length must be at least 1");
    }
    if (support_start > 1) {
        throw InvalidParameter("discretize: support_start must be 0 or 1");
    }
    std::vector<double> values(length);
    for (std::size_t i = 0; i < length; ++i) {
        const double lag = static_cast<double>(support_start + i);
        values[i] = interval_mass(spec, std::max(lag - 0.5, 0.0), lag + 0.5);
    }
    const double captured = gamma_cdf(spec, static_cast<double>(support_start + length) - 0.5);
    double total = std::accumulate(values.begin(), values.end(), 0.0);
    if (!(total > 0.0)) {
        // Support lies entirely in a numerically empty region; fall back to uniform.
        std::fill(values.begin(), values.end(), 1.0);
        total = static_cast<double>(length);
    }
    for (double& v : values) {
        v /= total;
    }
    return Kernel(std::move(values), support_start, captured);
}

KernelPair default_kernels(double death_mean, double death_sd, double gen_mean, double gen_sd,
                           std::size_t death_length, std::size_t gen_length) {
    return KernelPair{discretize(gamma_from_moments(death_mean, death_sd), 0, death_length),
                      discretize(gamma_from_moments(gen_mean, gen_sd), 1, gen_length)};
}

std::string kernel_to_csv(const Kernel& kernel) {
    std::string out = "lag,probability\n";
    for (std::size_t i = 0; i < kernel.length(); ++i) {
        out += std::to_string(kernel.support_start() + i);
        out += ',';
        out += format_double(kernel.values()[i]);
        out += '\n';
    }
    return out;
}

}  // namespace epideconv
