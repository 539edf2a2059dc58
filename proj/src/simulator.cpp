#include "epideconv/simulator.hpp"

#include "epideconv/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace epideconv {

void Scenario::validate() const {
    if (days < 2) {
        throw InvalidInput("scenario needs at least 2 days");
    }
    if (seed_incidence.empty() || seed_incidence.size() >= days) {
        throw InvalidInput("seed window must be non-empty and shorter than the scenario");
    }
    for (double s : seed_incidence) {
        if (!(s >= 0.0) || !std::isfinite(s)) {
            throw InvalidInput("seed incidence must be finite and non-negative");
        }
    }
    if (r_profile.empty() || r_profile.front().start_day != 1) {
        throw InvalidInput("R profile must start on day 1");
    }
    for (std::size_t i = 0; i < r_profile.size(); ++i) {
        if (!(r_profile[i].value >= 0.0) || !std::isfinite(r_profile[i].value)) {
            throw InvalidInput("R values must be finite and non-negative");
        }
        if (i > 0 && r_profile[i].start_day <= r_profile[i - 1].start_day) {
            throw InvalidInput("R segments must have strictly increasing start days");
        }
        if (r_profile[i].start_day > days) {
            throw InvalidInput("R segment starts after the last day");
        }
    }
}

KernelPair Scenario::kernels() const {
    return default_kernels(death_mean, death_sd, gen_mean, gen_sd, death_length, gen_length);
}

double Scenario::r_on(std::size_t day) const {
    double r = r_profile.front().value;
    for (const auto& seg : r_profile) {
        if (seg.start_day <= day) {
            r = seg.value;
        }
    }
    return r;
}

std::vector<std::size_t> Scenario::change_days() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i < r_profile.size(); ++i) {
        if (r_profile[i].value != r_profile[i - 1].value) {
            out.push_back(r_profile[i].start_day);
        }
    }
    return out;
}

std::vector<double> simulate_incidence(const Scenario& scenario, double ceiling) {
    scenario.validate();
    const Kernel w = scenario.kernels().generation;
    const auto wv = w.values();
    std::vector<double> j(scenario.days, 0.0);
    std::copy(scenario.seed_incidence.begin(), scenario.seed_incidence.end(), j.begin());
    for (std::size_t t = scenario.seed_incidence.size(); t < scenario.days; ++t) {
        double s = 0.0;
        for (std::size_t k = 0; k < wv.size() && k + 1 <= t; ++k) {
            s = s + wv[k] * j[t - 1 - k];
        }
        j[t] = scenario.r_on(t + 1) * s;
        if (!(j[t] <= ceiling)) {
            throw ScenarioExplodes("scenario '" + scenario.name + "' exceeds incidence ceiling on day " +
                                   std::to_string(t + 1));
        }
    }
    return j;
}

GroundTruth ground_truth(const Scenario& scenario) {
    GroundTruth g;
    g.incidence = simulate_incidence(scenario);
    g.lambda = expected_deaths(g.incidence, scenario.kernels().death_delay);
    g.r.resize(scenario.days);
    for (std::size_t t = 0; t < scenario.days; ++t) {
        g.r[t] = scenario.r_on(t + 1);
    }
    g.change_days = scenario.change_days();
    return g;
}

double PoissonSampler::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::int64_t PoissonSampler::operator()(double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) {
        throw InvalidParameter("Poisson mean must be finite and non-negative");
    }
    if (mean == 0.0) {
        return 0;
    }
    return mean < 30.0 ? inversion(mean) : transformed_rejection(mean);
}

std::int64_t PoissonSampler::inversion(double mean) {
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::int64_t k = 0;
    while (u > cdf && k < 1000) {
        ++k;
        p *= mean / static_cast<double>(k);
        cdf += p;
    }
    return k;
}

std::int64_t PoissonSampler::transformed_rejection(double mean) {
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = uniform() - 0.5;
        const double v = uniform();
        const double us = 0.5 - std::abs(u);
        const auto k = static_cast<std::int64_t>(std::floor((2.0 * a / us + b) * u + mean + 0.43));
        if (us >= 0.07 && v <= vr) {
            return k;
        }
        if (k < 0 || (us < 0.013 && v > us)) {
            continue;
        }
        const double kd = static_cast<double>(k);
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -mean + kd * loglam - std::lgamma(kd + 1.0)) {
            return k;
        }
    }
}

DeathSeries sample_deaths(std::span<const double> incidence, const Kernel& death_delay, std::uint64_t seed,
                          Date start_date, std::string location) {
    const auto lambda = expected_deaths(incidence, death_delay);
    PoissonSampler draw(seed);
    DeathSeries out;
    out.start_date = start_date;
    out.location = std::move(location);
    out.counts.reserve(lambda.size());
    for (double l : lambda) {
        out.counts.push_back(draw(std::max(l, 0.0)));
    }
    return out;
}

DeathSeries simulate_deaths(const Scenario& scenario) {
    const auto j = simulate_incidence(scenario);
    return sample_deaths(j, scenario.kernels().death_delay, scenario.rng_seed, scenario.start_date,
                         scenario.name);
}

double renewal_growth_rate(double r, const Kernel& generation) {
    if (!(r > 0.0)) {
        throw InvalidParameter("renewal_growth_rate: R must be positive");
    }
    auto residual = [&](double g) {
        double acc = 0.0;
        for (std::size_t k = 0; k < generation.length(); ++k) {
            acc += generation.values()[k] * std::exp(-g * static_cast<double>(generation.support_start() + k));
        }
        return r * acc - 1.0;
    };
    // residual is strictly decreasing in g.
    double lo = -1.0;
    double hi = 1.0;
    while (residual(lo) < 0.0) {
        lo *= 2.0;
    }
    while (residual(hi) > 0.0) {
        hi *= 2.0;
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (residual(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<double> seed_ramp(double target, double initial_r, const Kernel& generation, std::size_t days) {
    const double g = renewal_growth_rate(initial_r, generation);
    std::vector<double> seeds(days);
    for (std::size_t k = 0; k < days; ++k) {
        seeds[k] = target * std::exp(-g * static_cast<double>(days - 1 - k));
    }
    return seeds;
}

Scenario scaled_scenario(std::string name, std::size_t days, std::vector<RSegment> profile,
                         double peak_lambda, std::uint64_t seed) {
    Scenario s;
    s.name = std::move(name);
    s.days = days;
    s.r_profile = std::move(profile);
    s.rng_seed = seed;
    s.seed_incidence = seed_ramp(1.0, s.r_profile.front().value, s.kernels().generation);
    const auto g = ground_truth(s);
    const double peak = *std::max_element(g.lambda.begin(), g.lambda.end());
    // The renewal recursion and the death convolution are linear in the seeds.
    for (double& x : s.seed_incidence) {
        x *= peak_lambda / peak;
    }
    return s;
}

std::vector<Scenario> make_benchmark_suite() {
    return {
        scaled_scenario("single_step", 150, {{1, 2.5}, {40, 0.7}}, 100.0, 1),
        // Trough between the waves stays above ~10 deaths/day.
        scaled_scenario("double_step", 200, {{1, 2.5}, {40, 0.7}, {120, 1.3}}, 1000.0, 1),
        scaled_scenario("low_incidence", 200, {{1, 1.5}, {40, 0.7}, {110, 1.3}}, 0.15, 1),
    };
}

Scenario benchmark_scenario(const std::string& name) {
    for (auto& s : make_benchmark_suite()) {
        if (s.name == name) {
            return s;
        }
    }
    throw InvalidInput("unknown benchmark scenario: " + name);
}

std::string scenario_to_json(const Scenario& s) {
    nlohmann::ordered_json j;
    j["name"] = s.name;
    j["days"] = s.days;
    j["start_date"] = format_date(s.start_date);
    j["seed_incidence"] = s.seed_incidence;
    auto profile = nlohmann::ordered_json::array();
    for (const auto& seg : s.r_profile) {
        profile.push_back({{"start_day", seg.start_day}, {"R", seg.value}});
    }
    j["r_profile"] = profile;
    j["death_delay"] = {{"mean", s.death_mean}, {"sd", s.death_sd}, {"length", s.death_length}};
    j["generation"] = {{"mean", s.gen_mean}, {"sd", s.gen_sd}, {"length", s.gen_length}};
    j["rng_seed"] = s.rng_seed;
    return j.dump(2) + "\n";
}

Scenario scenario_from_json(const std::string& text) {
    Scenario s;
    try {
        const auto j = nlohmann::json::parse(text);
        s.name = j.value("name", std::string("scenario"));
        s.days = j.at("days").get<std::size_t>();
        if (j.contains("start_date")) {
            auto d = parse_date(j.at("start_date").get<std::string>());
            if (!d) {
                throw InvalidInput("scenario: bad start_date");
            }
            s.start_date = *d;
        }
        s.seed_incidence = j.at("seed_incidence").get<std::vector<double>>();
        for (const auto& seg : j.at("r_profile")) {
            s.r_profile.push_back({seg.at("start_day").get<std::size_t>(), seg.at("R").get<double>()});
        }
        if (j.contains("death_delay")) {
            const auto& f = j.at("death_delay");
            s.death_mean = f.value("mean", s.death_mean);
            s.death_sd = f.value("sd", s.death_sd);
            s.death_length = f.value("length", s.death_length);
        }
        if (j.contains("generation")) {
            const auto& w = j.at("generation");
            s.gen_mean = w.value("mean", s.gen_mean);
            s.gen_sd = w.value("sd", s.gen_sd);
            s.gen_length = w.value("length", s.gen_length);
        }
        s.rng_seed = j.value("rng_seed", s.rng_seed);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("scenario JSON: ") + e.what());
    }
    s.validate();
    return s;
}

}  // namespace epideconv
