#pragma once
// Gamma-distributed delay kernels discretized to day-lag probability masses.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace epideconv {

/// Moment-matched gamma law. shape = mean^2/sd^2, scale = sd^2/mean.
struct GammaSpec {
    double mean;
    double sd;
    double shape;
    double scale;
};

GammaSpec gamma_from_moments(double mean, double sd);

double gamma_cdf(const GammaSpec& spec, double x);

/// Probability mass over day lags support_start, support_start+1, ...
class Kernel {
public:
    Kernel() = default;
    Kernel(std::vector<double> values, std::size_t support_start, double captured_mass = 1.0);

    std::span<const double> values() const noexcept { return values_; }
    std::size_t support_start() const noexcept { return support_start_; }
    std::size_t length() const noexcept { return values_.size(); }
    /// Last lag with (possibly zero) mass.
    std::size_t last_lag() const noexcept { return support_start_ + values_.size() - 1; }
    /// Mass at lag tau, zero outside the support.
    double at(std::size_t tau) const noexcept;

    /// Gamma mass below the end of the support (one minus the cut tail).
    double captured_mass() const noexcept { return captured_mass_; }
    /// The support ends before 99% of the continuous mass.
    bool truncation_warning() const noexcept { return captured_mass_ < 0.99; }

    double mean() const noexcept;
    double sd() const noexcept;

private:
    std::vector<double> values_;
    std::size_t support_start_ = 0;
    double captured_mass_ = 1.0;
};

/// Day-centered masses CDF(tau+1/2) - CDF(tau-1/2) (lower edge clipped at 0)
/// for tau in [support_start, support_start + length), renormalized to sum
/// to one.
Kernel discretize(const GammaSpec& spec, std::size_t support_start, std::size_t length);

inline constexpr double kDeathDelayMean = 19.3;
inline constexpr double kDeathDelaySd = 9.1;
inline constexpr double kGenerationMean = 6.3;
inline constexpr double kGenerationSd = 4.2;
inline constexpr std::size_t kDeathDelayLength = 60;
inline constexpr std::size_t kGenerationLength = 30;

struct KernelPair {
    Kernel death_delay;  // f, support from lag 0
    Kernel generation;   // w, support from lag 1
};

/// Default infection-to-death and generation-time kernels.
KernelPair default_kernels(double death_mean = kDeathDelayMean, double death_sd = kDeathDelaySd,
                           double gen_mean = kGenerationMean, double gen_sd = kGenerationSd,
                           std::size_t death_length = kDeathDelayLength,
                           std::size_t gen_length = kGenerationLength);

/// Two-column CSV "lag,probability".
std::string kernel_to_csv(const Kernel& kernel);

}  // namespace epideconv
