#include "epideconv/fitter.hpp"

#include "epideconv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace epideconv {

void FitConfig::validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw InvalidParameter("gamma must be a finite non-negative number");
    }
    if (max_iterations < 1) {
        throw InvalidParameter("max_iterations must be at least 1");
    }
    if (!(step_size > 0.0) || !(final_step_size > 0.0)) {
        throw InvalidParameter("step sizes must be positive");
    }
    if (!(convergence_tol > 0.0)) {
        throw InvalidParameter("convergence_tol must be positive");
    }
    if (convergence_window < 1) {
        throw InvalidParameter("convergence_window must be at least 1");
    }
    if (!(smooth_abs_epsilon > 0.0)) {
        throw InvalidParameter("smooth_abs_epsilon must be positive");
    }
    if (!(log_guard >= 0.0)) {
        throw InvalidParameter("log_guard must be non-negative");
    }
    if (trend_window < 2) {
        throw InvalidParameter("trend_window must be at least 2");
    }
}

std::vector<double> initial_parameters(std::span<const std::int64_t> counts, const Kernel& death_delay) {
    const std::size_t n = counts.size();
    if (n < 2) {
        throw InvalidInput("initial_parameters: need at least 2 days");
    }
    auto padded = [&](std::ptrdiff_t i) {
        i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1);
        return static_cast<double>(counts[static_cast<std::size_t>(i)]);
    };
    std::vector<double> smooth(n);
    for (std::size_t t = 0; t < n; ++t) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -3; k <= 3; ++k) {
            acc += padded(static_cast<std::ptrdiff_t>(t) + k);
        }
        smooth[t] = acc / 7.0;
    }
    const auto shift = static_cast<std::size_t>(std::lround(death_delay.mean()));
    std::vector<double> theta(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double m = smooth[std::min(t + shift, n - 1)];
        theta[t] = std::log(std::max(m, 0.1));
    }
    return theta;
}

std::size_t early_trend_cutoff(std::span<const std::int64_t> counts) {
    std::int64_t peak = 0;
    for (auto c : counts) {
        peak = std::max(peak, c);
    }
    if (peak <= 0) {
        return 0;
    }
    const double threshold = 0.01 * static_cast<double>(peak);
    double cumulative = 0.0;
    std::size_t last = 0;
    for (std::size_t t = 0; t < counts.size(); ++t) {
        cumulative += static_cast<double>(counts[t]);
        if (cumulative < threshold) {
            last = t + 1;
        } else {
            break;
        }
    }
    return last;
}

TrendConstraint::TrendConstraint(std::size_t cutoff, std::size_t window, std::size_t series_length) {
    if (cutoff == 0 || series_length == 0 || cutoff >= series_length) {
        return;
    }
    anchor_ = cutoff;
    slope_end_ = std::min(cutoff + window - 1, series_length - 1);
    active_ = slope_end_ > anchor_;
}

void TrendConstraint::apply(std::span<double> theta) const {
    if (!active_) {
        return;
    }
    const double span = static_cast<double>(slope_end_ - anchor_);
    const double slope = (theta[slope_end_] - theta[anchor_]) / span;
    for (std::size_t i = 0; i < anchor_; ++i) {
        theta[i] = theta[anchor_] - slope * static_cast<double>(anchor_ - i);
    }
}

void TrendConstraint::pull_back(std::span<double> grad) const {
    if (!active_) {
        return;
    }
    const double span = static_cast<double>(slope_end_ - anchor_);
    double to_anchor = 0.0;
    double to_end = 0.0;
    for (std::size_t i = 0; i < anchor_; ++i) {
        const double r = static_cast<double>(anchor_ - i) / span;
        to_anchor += grad[i] * (1.0 + r);
        to_end -= grad[i] * r;
        grad[i] = 0.0;
    }
    grad[anchor_] += to_anchor;
    grad[slope_end_] += to_end;
}

ObjectiveGradient::ObjectiveGradient(std::span<const std::int64_t> counts, const Kernel& death_delay,
                                     const Kernel& generation, double gamma, GradientOptions options,
                                     const simd::KernelTable& kernels)
    : counts_(counts),
      death_delay_(death_delay),
      generation_(generation),
      gamma_(gamma),
      options_(options),
      kernels_(kernels) {
    if (death_delay.support_start() != 0 || generation.support_start() != 1) {
        throw InvalidInput("kernels must start at lag 0 (death delay) and lag 1 (generation)");
    }
    const std::size_t n = counts.size();
    if (n < 3) {
        throw InvalidInput("objective gradient needs at least 3 days");
    }
    for (auto* v : {&j_, &lambda_, &s_, &log_r_, &dlambda_, &grad_j_, &scratch_, &coef_, &q_}) {
        v->assign(n, 0.0);
    }
}

ObjectiveValue ObjectiveGradient::evaluate(std::span<const double> theta, std::span<double> grad) {
    const std::size_t n = counts_.size();
    if (theta.size() != n || grad.size() != n) {
        throw InvalidInput("gradient: parameter length mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(theta[i])) {
            throw FitDiverged("non-finite parameter at day index " + std::to_string(i), 0,
                              static_cast<std::ptrdiff_t>(i));
        }
        j_[i] = std::exp(theta[i]);
    }

    // Data term.
    simd::convolve(kernels_, j_, death_delay_.values(), 0, lambda_);
    const double guard = options_.log_guard;
    double z = 0.0;
    double wl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 1.0 / (1.0 + lambda_[i]);
        z += w;
        wl += w * loglik(options_.likelihood, counts_[i], lambda_[i], guard);
    }
    const double data = -wl / z;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 1.0 / (1.0 + lambda_[i]);
        const double nd = static_cast<double>(counts_[i]);
        const double l = loglik(options_.likelihood, counts_[i], lambda_[i], guard);
        const double dl = (counts_[i] == 0 ? 0.0 : nd / (lambda_[i] + guard)) - 1.0;
        dlambda_[i] = -(w * dl - w * w * (l + data)) / z;
    }
    simd::correlate(kernels_, dlambda_, death_delay_.values(), 0, grad_j_);

    // Dynamics term: ln R_t = theta_t - ln S_t, increments D_k = lnR_{k+2} - lnR_{k+1}.
    simd::convolve(kernels_, j_, generation_.values(), 1, s_);
    for (std::size_t i = 1; i < n; ++i) {
        log_r_[i] = theta[i] - std::log(s_[i]);
    }
    const double eps2 = options_.smooth_abs_epsilon * options_.smooth_abs_epsilon;
    const double norm = 1.0 / static_cast<double>(n - 2);
    double dyn = 0.0;
    std::fill(coef_.begin(), coef_.end(), 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double d = log_r_[i + 1] - log_r_[i];
        const double a = std::sqrt(d * d + eps2);
        dyn += a;
        const double da = d / a * norm;
        coef_[i + 1] += da;
        coef_[i] -= da;
    }
    dyn *= norm;
    for (std::size_t i = 0; i < n; ++i) {
        q_[i] = i == 0 ? 0.0 : -gamma_ * coef_[i] / s_[i];
    }
    simd::correlate(kernels_, q_, generation_.values(), 1, scratch_);
    for (std::size_t i = 0; i < n; ++i) {
        grad_j_[i] += scratch_[i];
    }
    kernels_.multiply(grad_j_.data(), j_.data(), grad.data(), n);
    for (std::size_t i = 1; i < n; ++i) {
        grad[i] += gamma_ * coef_[i];
    }

    ObjectiveValue v{data + gamma_ * dyn, data, dyn};
    if (!std::isfinite(v.total)) {
        std::ptrdiff_t bad = -1;
        for (std::size_t i = 0; i < n && bad < 0; ++i) {
            if (!std::isfinite(lambda_[i]) || !std::isfinite(log_r_[i])) {
                bad = static_cast<std::ptrdiff_t>(i);
            }
        }
        throw FitDiverged("non-finite objective", 0, bad);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(grad[i])) {
            throw FitDiverged("non-finite gradient at day index " + std::to_string(i), 0,
                              static_cast<std::ptrdiff_t>(i));
        }
    }
    return v;
}

ObjectiveValue smoothed_objective(std::span<const double> theta, std::span<const std::int64_t> counts,
                                  const Kernel& death_delay, const Kernel& generation, double gamma,
                                  GradientOptions options) {
    std::vector<double> grad(theta.size());
    ObjectiveGradient og(counts, death_delay, generation, gamma, options);
    return og.evaluate(theta, grad);
}

std::vector<double> gradient(std::span<const double> theta, std::span<const std::int64_t> counts,
                             const Kernel& death_delay, const Kernel& generation, double gamma,
                             GradientOptions options) {
    std::vector<double> grad(theta.size());
    ObjectiveGradient og(counts, death_delay, generation, gamma, options);
    og.evaluate(theta, grad);
    return grad;
}

FitResult fit(const DeathSeries& series, const Kernel& death_delay, const Kernel& generation,
              const FitConfig& config, std::span<const double> initial_theta) {
    config.validate();
    validate(series);
    const std::size_t n = series.size();
    if (n < 3) {
        throw InvalidInput("fit: need at least 3 days");
    }
    std::span<const std::int64_t> counts = series.counts;

    std::vector<double> theta;
    if (initial_theta.empty()) {
        theta = initial_parameters(counts, death_delay);
    } else if (initial_theta.size() != n) {
        throw InvalidInput("fit: starting point length mismatch");
    } else {
        theta.assign(initial_theta.begin(), initial_theta.end());
    }
    const TrendConstraint constraint(config.early_trend_constraint ? early_trend_cutoff(counts) : 0,
                                     config.trend_window, n);
    constraint.apply(theta);

    ObjectiveGradient og(counts, death_delay, generation, config.gamma,
                         GradientOptions{config.log_guard, config.smooth_abs_epsilon, config.likelihood});

    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double adam_eps = 1e-8;
    std::vector<double> grad(n), m(n, 0.0), v(n, 0.0);
    std::vector<double> history;
    history.reserve(config.max_iterations + 1);

    const double decay = config.max_iterations > 1
                             ? std::log(config.final_step_size / config.step_size) /
                                   static_cast<double>(config.max_iterations - 1)
                             : 0.0;
    double b1 = 1.0;
    double b2 = 1.0;
    bool converged = false;
    std::size_t iter = 0;
    while (iter < config.max_iterations) {
        ObjectiveValue value;
        try {
            value = og.evaluate(theta, grad);
        } catch (const FitDiverged& e) {
            throw FitDiverged(std::string("fit diverged: ") + e.what(), iter, e.index());
        }
        history.push_back(value.total);
        // Mean objective over the latest window against the window before it;
        // single iterates are too noisy near the non-smooth optimum.
        const std::size_t w = config.convergence_window;
        const double lr = config.step_size * std::exp(decay * static_cast<double>(iter));
        if (lr <= 10.0 * config.final_step_size && history.size() >= 2 * w) {
            const std::size_t h = history.size();
            double recent = 0.0;
            double previous = 0.0;
            for (std::size_t q = 0; q < w; ++q) {
                recent += history[h - 1 - q];
                previous += history[h - 1 - w - q];
            }
            recent /= static_cast<double>(w);
            previous /= static_cast<double>(w);
            if (std::abs(recent - previous) <= config.convergence_tol * std::max(std::abs(recent), 1e-12)) {
                converged = true;
                break;
            }
        }
        constraint.pull_back(grad);

        b1 *= beta1;
        b2 *= beta2;
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            const double mhat = m[i] / (1.0 - b1);
            const double vhat = v[i] / (1.0 - b2);
            theta[i] -= lr * mhat / (std::sqrt(vhat) + adam_eps);
        }
        constraint.apply(theta);
        ++iter;
    }

    FitResult result;
    result.gamma = config.gamma;
    result.incidence.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        result.incidence[i] = std::exp(theta[i]);
    }
    result.lambda = expected_deaths(result.incidence, death_delay);
    result.reproduction = reproduction_number(result.incidence, generation);
    result.losses = objective(result.incidence, counts, death_delay, generation, config.gamma,
                               config.log_guard, config.likelihood);
    if (!std::isfinite(result.losses.total)) {
        throw FitDiverged("fit diverged: non-finite final objective", iter);
    }
    result.iterations_used = iter;
    result.converged = converged;
    result.cutoff_index = constraint.cutoff();
    return result;
}

}  // namespace epideconv
