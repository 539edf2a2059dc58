#pragma once
// Gradient-based deconvolution of daily deaths into scaled incidence.
//
// The optimization variable is theta_t = ln j_t. The objective is the
// weighted Poisson data loss plus gamma times the dynamics loss, with the
// absolute value in the dynamics loss replaced by sqrt(x^2 + eps^2) while
// optimizing. Days up to the early-outbreak cutoff are tied to a straight
// line in theta extrapolated backwards from the days that follow.

#include "epideconv/epi_model.hpp"
#include "epideconv/kernels.hpp"
#include "epideconv/simd/kernels.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace epideconv {

struct FitConfig {
    double gamma = 2.51;
    std::size_t max_iterations = 30000;
    /// Initial Adam step size; decays geometrically to final_step_size.
    double step_size = 0.02;
    double final_step_size = 1e-5;
    /// Relative change between the mean objective of the last two
    /// convergence_window-iteration windows. Only tested once the step size
    /// has decayed to within 10x of final_step_size.
    double convergence_tol = 1e-6;
    std::size_t convergence_window = 200;
    /// Recorded with results; the optimizer itself is deterministic.
    std::uint64_t rng_seed = 0;
    double smooth_abs_epsilon = 1e-6;
    double log_guard = kLogGuard;
    Likelihood likelihood = Likelihood::saturated;
    bool early_trend_constraint = true;
    /// Days after the cutoff whose mean slope is extended backwards.
    std::size_t trend_window = 7;

    /// Throws InvalidParameter on out-of-range fields.
    void validate() const;
};

struct FitResult {
    std::vector<double> incidence;
    std::vector<double> lambda;
    ReproductionSeries reproduction;
    ObjectiveValue losses;
    std::size_t iterations_used = 0;
    bool converged = false;
    /// Last day (1-based) tied to the backward trend; 0 when inactive.
    std::size_t cutoff_index = 0;
    double gamma = 0.0;
};

/// theta_t = ln max(m_{t+d}, 0.1), m the edge-padded centered 7-day moving
/// average of the counts and d the rounded mean infection-to-death delay.
std::vector<double> initial_parameters(std::span<const std::int64_t> counts, const Kernel& death_delay);

/// Last day t (1-based) whose cumulative deaths stay below 1% of the maximum
/// daily count; 0 when no count is positive.
std::size_t early_trend_cutoff(std::span<const std::int64_t> counts);

/// Straight-line tie of the first `cutoff` entries of theta to the slope of
/// the following `window` days.
class TrendConstraint {
public:
    TrendConstraint(std::size_t cutoff, std::size_t window, std::size_t series_length);

    bool active() const noexcept { return active_; }
    std::size_t cutoff() const noexcept { return active_ ? anchor_ : 0; }

    /// Overwrites the constrained entries from the free ones.
    void apply(std::span<double> theta) const;
    /// Maps a gradient over all of theta onto the free entries (chain rule);
    /// constrained entries come back zero.
    void pull_back(std::span<double> grad) const;

private:
    bool active_ = false;
    std::size_t anchor_ = 0;  // 0-based index of first free day
    std::size_t slope_end_ = 0;
};

struct GradientOptions {
    double log_guard = kLogGuard;
    double smooth_abs_epsilon = 1e-6;
    Likelihood likelihood = Likelihood::saturated;
};

/// Objective and analytic gradient with respect to theta, reusing work
/// buffers across calls. Not thread-safe; use one per fit.
class ObjectiveGradient {
public:
    ObjectiveGradient(std::span<const std::int64_t> counts, const Kernel& death_delay,
                      const Kernel& generation, double gamma, GradientOptions options = {},
                      const simd::KernelTable& kernels = simd::active());

    /// Smoothed objective at theta; writes d(objective)/d(theta) into grad.
    /// Throws FitDiverged naming the first non-finite entry.
    ObjectiveValue evaluate(std::span<const double> theta, std::span<double> grad);

private:
    std::span<const std::int64_t> counts_;
    const Kernel& death_delay_;
    const Kernel& generation_;
    double gamma_;
    GradientOptions options_;
    const simd::KernelTable& kernels_;

    std::vector<double> j_, lambda_, s_, log_r_, dlambda_, grad_j_, scratch_, coef_, q_;
};

/// Smoothed objective value, the function `gradient` differentiates.
ObjectiveValue smoothed_objective(std::span<const double> theta, std::span<const std::int64_t> counts,
                                  const Kernel& death_delay, const Kernel& generation, double gamma,
                                  GradientOptions options = {});

std::vector<double> gradient(std::span<const double> theta, std::span<const std::int64_t> counts,
                             const Kernel& death_delay, const Kernel& generation, double gamma,
                             GradientOptions options = {});

/// Deterministic Adam descent on theta under the trend constraint. Starts
/// from initial_parameters() unless a starting point is supplied.
FitResult fit(const DeathSeries& series, const Kernel& death_delay, const Kernel& generation,
              const FitConfig& config, std::span<const double> initial_theta = {});

}  // namespace epideconv
