#pragma once
// Synthetic epidemics with known reproduction-number steps: renewal-equation
// incidence driven by a piecewise-constant R, observed through Poisson deaths.

#include "epideconv/date.hpp"
#include "epideconv/epi_model.hpp"
#include "epideconv/kernels.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace epideconv {

struct RSegment {
    std::size_t start_day;  // 1-based, inclusive
    double value;
};

struct Scenario {
    std::string name = "scenario";
    std::size_t days = 0;
    /// Incidence for days 1..seed_incidence.size(); the renewal recursion
    /// takes over afterwards.
    std::vector<double> seed_incidence;
    std::vector<RSegment> r_profile;
    double death_mean = kDeathDelayMean;
    double death_sd = kDeathDelaySd;
    std::size_t death_length = kDeathDelayLength;
    double gen_mean = kGenerationMean;
    double gen_sd = kGenerationSd;
    std::size_t gen_length = kGenerationLength;
    std::uint64_t rng_seed = 1;
    Date start_date = Date{std::chrono::year{2020} / 3 / 1};

    /// Throws InvalidInput when segments do not tile [1, days] or values are invalid.
    void validate() const;
    KernelPair kernels() const;
    /// R in effect on a 1-based day.
    double r_on(std::size_t day) const;
    /// Days (1-based) on which R steps to a new value.
    std::vector<std::size_t> change_days() const;
};

struct GroundTruth {
    std::vector<double> incidence;
    std::vector<double> lambda;
    std::vector<double> r;  // profile value per day
    std::vector<std::size_t> change_days;
};

inline constexpr double kIncidenceCeiling = 1e12;

/// Deterministic renewal recursion j_t = R_t sum_{tau>=1} w_tau j_{t-tau}.
std::vector<double> simulate_incidence(const Scenario& scenario, double ceiling = kIncidenceCeiling);

GroundTruth ground_truth(const Scenario& scenario);

/// Seed-deterministic Poisson variates that do not depend on the standard
/// library's distribution implementations: inversion below mean 30,
/// Hormann's transformed rejection (PTRS) above.
class PoissonSampler {
public:
    explicit PoissonSampler(std::uint64_t seed) : engine_(seed) {}
    std::int64_t operator()(double mean);
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();

private:
    std::int64_t inversion(double mean);
    std::int64_t transformed_rejection(double mean);
    std::mt19937_64 engine_;
};

/// n_t ~ Poisson(lambda_t) with lambda = expected_deaths(incidence, f).
DeathSeries sample_deaths(std::span<const double> incidence, const Kernel& death_delay, std::uint64_t seed,
                          Date start_date = Date{std::chrono::year{2020} / 3 / 1},
                          std::string location = "synthetic");

/// Convenience: ground truth plus deaths drawn with the scenario's seed.
DeathSeries simulate_deaths(const Scenario& scenario);

/// Asymptotic exponential growth rate g with R sum_tau w_tau e^{-g tau} = 1.
double renewal_growth_rate(double r, const Kernel& generation);

/// 7-day exponential ramp at the growth rate implied by `initial_r`,
/// ending at `target` on its last day.
std::vector<double> seed_ramp(double target, double initial_r, const Kernel& generation,
                              std::size_t days = 7);

/// Scenario with seeds scaled so that max_t lambda_t equals peak_lambda.
Scenario scaled_scenario(std::string name, std::size_t days, std::vector<RSegment> profile,
                         double peak_lambda, std::uint64_t seed);

/// Canonical scenarios: "single_step", "double_step", "low_incidence".
std::vector<Scenario> make_benchmark_suite();
Scenario benchmark_scenario(const std::string& name);

std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const std::string& text);

}  // namespace epideconv
