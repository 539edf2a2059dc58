#include "epideconv/epi_model.hpp"

#include "epideconv/errors.hpp"
#include "epideconv/simd/kernels.hpp"

#include <cmath>
#include <limits>

namespace epideconv {

void validate(const DeathSeries& series) {
    if (series.counts.size() < 2) {
        throw InvalidInput("death series needs at least 2 days");
    }
    for (std::size_t i = 0; i < series.counts.size(); ++i) {
        if (series.counts[i] < 0) {
            throw InvalidInput("negative death count at day index " + std::to_string(i));
        }
    }
}

std::size_t ReproductionSeries::undefined_count() const noexcept {
    std::size_t c = 0;
    for (auto d : defined) {
        c += d == 0 ? 1 : 0;
    }
    return c;
}

std::vector<double> expected_deaths(std::span<const double> incidence, const Kernel& death_delay) {
    if (death_delay.support_start() != 0) {
        throw InvalidInput("expected_deaths: death-delay kernel must start at lag 0");
    }
    std::vector<double> lambda(incidence.size());
    simd::convolve(incidence, death_delay.values(), 0, lambda);
    return lambda;
}

std::vector<double> infectiousness(std::span<const double> incidence, const Kernel& generation) {
    if (generation.support_start() != 1) {
        throw InvalidInput("generation-time kernel must start at lag 1");
    }
    std::vector<double> s(incidence.size());
    simd::convolve(incidence, generation.values(), 1, s);
    return s;
}

ReproductionSeries reproduction_number(std::span<const double> incidence, const Kernel& generation,
                                       double guard) {
    if (incidence.size() < 2) {
        throw InvalidInput("reproduction_number: need at least 2 days");
    }
    const auto s = infectiousness(incidence, generation);
    ReproductionSeries r;
    r.values.assign(incidence.size(), std::numeric_limits<double>::quiet_NaN());
    r.defined.assign(incidence.size(), 0);
    for (std::size_t t = 1; t < incidence.size(); ++t) {
        const double denom = s[t] + guard;
        if (guard <= 0.0 && denom < kZeroDenominator) {
            continue;
        }
        r.values[t] = incidence[t] / denom;
        r.defined[t] = 1;
    }
    return r;
}

double poisson_loglik(std::int64_t n, double lambda, double guard) {
    const double nd = static_cast<double>(n);
    const double log_term = n == 0 ? 0.0 : nd * std::log(lambda + guard);
    return log_term - lambda - std::lgamma(nd + 1.0);
}

double saturated_loglik(std::int64_t n, double lambda, double guard) {
    if (n == 0) {
        return -lambda;
    }
    const double nd = static_cast<double>(n);
    return nd * (std::log(lambda + guard) - std::log(nd)) + nd - lambda;
}

double data_loss(std::span<const std::int64_t> counts, std::span<const double> lambda, double guard,
                 Likelihood form) {
    if (counts.size() != lambda.size()) {
        throw InvalidInput("data_loss: length mismatch");
    }
    double z = 0.0;
    double acc = 0.0;
    for (std::size_t t = 0; t < counts.size(); ++t) {
        const double w = 1.0 / (1.0 + lambda[t]);
        z += w;
        acc += w * loglik(form, counts[t], lambda[t], guard);
    }
    if (z == 0.0) {
        return 0.0;
    }
    const double loss = -acc / z;
    return loss == 0.0 ? 0.0 : loss;
}

std::vector<double> log_r_increments(std::span<const double> incidence, const Kernel& generation) {
    const std::size_t n = incidence.size();
    if (n < 3) {
        throw InvalidInput("dynamics loss needs at least 3 days");
    }
    const auto s = infectiousness(incidence, generation);
    std::vector<double> log_r(n);
    for (std::size_t t = 1; t < n; ++t) {
        log_r[t] = std::log(incidence[t]) - std::log(s[t]);
    }
    std::vector<double> d(n - 2);
    for (std::size_t t = 1; t + 1 < n; ++t) {
        d[t - 1] = log_r[t + 1] - log_r[t];
    }
    return d;
}

double dynamics_loss(std::span<const double> incidence, const Kernel& generation) {
    const auto d = log_r_increments(incidence, generation);
    double acc = 0.0;
    for (double x : d) {
        acc += std::abs(x);
    }
    return acc / static_cast<double>(d.size());
}

ObjectiveValue objective(std::span<const double> incidence, std::span<const std::int64_t> counts,
                         const Kernel& death_delay, const Kernel& generation, double gamma,
                         double log_guard, Likelihood form) {
    if (gamma < 0.0) {
        throw InvalidParameter("objective: gamma must be non-negative");
    }
    if (incidence.size() != counts.size()) {
        throw InvalidInput("objective: length mismatch");
    }
    ObjectiveValue v;
    v.data = data_loss(counts, expected_deaths(incidence, death_delay), log_guard, form);
    v.dynamics = dynamics_loss(incidence, generation);
    v.total = v.data + gamma * v.dynamics;
    return v;
}

}  // namespace epideconv
