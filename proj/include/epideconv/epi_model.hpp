#pragma once
// Forward model (incidence -> expected deaths), renewal-equation inversion
// for the reproduction number, and the loss functions of the objective.
//
// Arrays are 0-based: index i holds day i+1 of the analyzed interval.

#include "epideconv/date.hpp"
#include "epideconv/kernels.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace epideconv {

/// Additive guard for logarithms of quantities that can reach zero.
inline constexpr double kLogGuard = 0.1;
/// Denominators below this are treated as zero when no guard is applied.
inline constexpr double kZeroDenominator = 1e-12;

struct DeathSeries {
    Date start_date{};
    std::vector<std::int64_t> counts;
    std::string location;

    std::size_t size() const noexcept { return counts.size(); }
    Date date_of(std::size_t index) const { return add_days(start_date, static_cast<long>(index)); }
};

/// Throws InvalidInput unless T >= 2 and all counts are non-negative.
void validate(const DeathSeries& series);

/// Reproduction number per day. Entry 0 (day 1) has no history and is
/// always undefined; other entries are undefined when their renewal
/// denominator vanishes.
struct ReproductionSeries {
    std::vector<double> values;
    std::vector<std::uint8_t> defined;

    std::size_t size() const noexcept { return values.size(); }
    bool is_defined(std::size_t i) const noexcept { return i < defined.size() && defined[i] != 0; }
    std::size_t undefined_count() const noexcept;
};

/// lambda_t = sum_{tau=0}^{t-1} f_tau j_{t-tau}.
std::vector<double> expected_deaths(std::span<const double> incidence, const Kernel& death_delay);

/// Renewal denominator S_t = sum_{tau>=1} w_tau j_{t-tau}.
std::vector<double> infectiousness(std::span<const double> incidence, const Kernel& generation);

/// R_t = j_t / (S_t + guard). With guard == 0, entries whose denominator is
/// below kZeroDenominator are flagged undefined (value NaN).
ReproductionSeries reproduction_number(std::span<const double> incidence, const Kernel& generation,
                                       double guard = 0.0);

/// n ln(lambda + guard) - lambda - ln(n!), with 0 * ln(.) taken as 0.
double poisson_loglik(std::int64_t n, double lambda, double guard);

/// Per-day log-likelihood used inside the weighted data loss.
enum class Likelihood {
    /// Full Poisson log-likelihood, ln(n!) included.
    exact,
    /// Log-likelihood relative to the saturated model, n ln(lambda/n) + n - lambda
    /// (the Stirling form). Zero at lambda = n for every day, so the weighted
    /// loss is minimized by lambda = n.
    saturated,
};

/// n ln((lambda + guard)/n) + n - lambda, or -lambda when n = 0.
double saturated_loglik(std::int64_t n, double lambda, double guard);

inline double loglik(Likelihood form, std::int64_t n, double lambda, double guard) {
    return form == Likelihood::exact ? poisson_loglik(n, lambda, guard) : saturated_loglik(n, lambda, guard);
}

/// Scale-invariant weighted Poisson loss:
///   -(1/Z) sum_t l(n_t, lambda_t) / (1 + lambda_t),  Z = sum_t 1/(1 + lambda_t).
double data_loss(std::span<const std::int64_t> counts, std::span<const double> lambda, double guard,
                 Likelihood form = Likelihood::saturated);

/// ln R_{t+1} - ln R_t for t = 2..T-1 (1-based), i.e. T-2 entries; entry k
/// is the transition into day k+3. Requires strictly positive incidence.
std::vector<double> log_r_increments(std::span<const double> incidence, const Kernel& generation);

/// Mean absolute day-over-day change of ln R_t over t = 2..T-1.
double dynamics_loss(std::span<const double> incidence, const Kernel& generation);

struct ObjectiveValue {
    double total = 0.0;
    double data = 0.0;
    double dynamics = 0.0;
};

/// data_loss + gamma * dynamics_loss, with exact absolute values.
ObjectiveValue objective(std::span<const double> incidence, std::span<const std::int64_t> counts,
                         const Kernel& death_delay, const Kernel& generation, double gamma,
                         double log_guard = kLogGuard, Likelihood form = Likelihood::saturated);

}  // namespace epideconv
