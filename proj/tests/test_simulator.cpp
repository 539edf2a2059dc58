#include "epideconv/errors.hpp"
#include "epideconv/simulator.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace epideconv;

namespace {

Scenario basic(std::size_t days, std::vector<RSegment> profile, std::vector<double> seeds) {
    Scenario s;
    s.days = days;
    s.r_profile = std::move(profile);
    s.seed_incidence = std::move(seeds);
    return s;
}

// Euler-Lotka root by bisection, written against the kernel values directly.
double oracle_growth(double r, const Kernel& w) {
    auto h = [&](double g) {
        double acc = 0.0;
        for (std::size_t tau = w.support_start(); tau <= w.last_lag(); ++tau) {
            acc += w.at(tau) * std::exp(-g * static_cast<double>(tau));
        }
        return r * acc - 1.0;
    };
    double lo = -2.0, hi = 2.0;
    for (int i = 0; i < 300; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (h(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_SUITE("simulator") {
    TEST_CASE("renewal recursion basics") {
        const auto zero = simulate_incidence(basic(60, {{1, 2.0}, {8, 0.0}}, std::vector<double>(7, 5.0)));
        for (std::size_t t = 7; t < 60; ++t) {
            CHECK(zero[t] == 0.0);
        }
        const auto s = basic(10, {{1, 1.7}}, {1.0});
        const auto j = simulate_incidence(s);
        CHECK(j[0] == 1.0);
        CHECK(j[1] == doctest::Approx(1.7 * s.kernels().generation.at(1)).epsilon(1e-15));
    }

    TEST_CASE("constant R grows at the Euler-Lotka rate") {
        const auto s = basic(200, {{1, 2.0}}, std::vector<double>(7, 1.0));
        const auto j = simulate_incidence(s);
        const double g = oracle_growth(2.0, s.kernels().generation);
        const double slope = std::log(j[199] / j[189]) / 10.0;
        CHECK(std::abs(slope - g) < 1e-3);
        CHECK(renewal_growth_rate(2.0, s.kernels().generation) == doctest::Approx(g).epsilon(1e-12));
        CHECK(renewal_growth_rate(1.0, s.kernels().generation) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
        CHECK(renewal_growth_rate(0.7, s.kernels().generation) < 0.0);
    }

    TEST_CASE("R recovered from the incidence matches the profile") {
        for (const auto& sc : make_benchmark_suite()) {
            const auto truth = ground_truth(sc);
            const auto r = reproduction_number(truth.incidence, sc.kernels().generation);
            const std::size_t from = sc.gen_length + sc.seed_incidence.size();
            for (std::size_t t = from; t < sc.days; ++t) {
                CHECK(std::abs(r.values[t] - truth.r[t]) < 1e-6);
            }
        }
    }

    TEST_CASE("benchmark suite") {
        const auto suite = make_benchmark_suite();
        REQUIRE(suite.size() == 3);
        const auto single = benchmark_scenario("single_step");
        CHECK(single.days == 150);
        CHECK(single.change_days() == std::vector<std::size_t>{40});
        const auto peak = [](const Scenario& s) {
            const auto g = ground_truth(s);
            return *std::max_element(g.lambda.begin(), g.lambda.end());
        };
        CHECK(peak(single) == doctest::Approx(100.0).epsilon(1e-9));
        const auto dbl = benchmark_scenario("double_step");
        CHECK(dbl.days == 200);
        CHECK(dbl.change_days() == std::vector<std::size_t>{40, 120});
        CHECK(dbl.r_on(39) == 2.5);
        CHECK(dbl.r_on(40) == 0.7);
        CHECK(dbl.r_on(120) == 1.3);
        const auto low = benchmark_scenario("low_incidence");
        CHECK(peak(low) < 0.2);
        CHECK_THROWS_AS(benchmark_scenario("nope"), InvalidInput);
    }

    TEST_CASE("scenario validation") {
        CHECK_THROWS_AS(basic(50, {{2, 1.0}}, {1.0}).validate(), InvalidInput);
        CHECK_THROWS_AS(basic(50, {{1, 1.0}, {1, 2.0}}, {1.0}).validate(), InvalidInput);
        CHECK_THROWS_AS(basic(50, {{1, -1.0}}, {1.0}).validate(), InvalidInput);
        CHECK_THROWS_AS(basic(5, {{1, 1.0}}, std::vector<double>(5, 1.0)).validate(), InvalidInput);
        CHECK_THROWS_AS(basic(50, {{1, 1.0}, {60, 2.0}}, {1.0}).validate(), InvalidInput);
        CHECK_NOTHROW(basic(50, {{1, 1.0}, {20, 2.0}}, {1.0}).validate());
    }

    TEST_CASE("runaway growth raises") {
        const auto s = basic(400, {{1, 4.0}}, std::vector<double>(7, 1.0));
        CHECK_THROWS_AS(simulate_incidence(s), ScenarioExplodes);
        CHECK_NOTHROW(simulate_incidence(s, 1e300));
    }

    TEST_CASE("poisson sampler moments") {
        for (double mean : {0.3, 4.0, 29.0, 50.0, 1000.0}) {
            PoissonSampler draw(static_cast<std::uint64_t>(mean * 1000));
            const int n = 10000;
            double sum = 0.0, sq = 0.0;
            for (int i = 0; i < n; ++i) {
                const double x = static_cast<double>(draw(mean));
                sum += x;
                sq += x * x;
            }
            const double m = sum / n;
            const double var = sq / n - m * m;
            CHECK(std::abs(m - mean) < 4.0 * std::sqrt(mean / n));
            if (mean == 50.0) {
                CHECK(var / m > 0.9);
                CHECK(var / m < 1.1);
            }
        }
        PoissonSampler zero(1);
        CHECK(zero(0.0) == 0);
    }

    TEST_CASE("sampled deaths: determinism and Monte Carlo mean") {
        const auto sc = benchmark_scenario("single_step");
        const auto truth = ground_truth(sc);
        const auto& f = sc.kernels().death_delay;
        const auto a = sample_deaths(truth.incidence, f, 77);
        const auto b = sample_deaths(truth.incidence, f, 77);
        CHECK(a.counts == b.counts);
        CHECK(sample_deaths(truth.incidence, f, 78).counts != a.counts);

        const std::vector<std::size_t> probes{20, 45, 60, 90, 140};
        std::vector<double> sum(probes.size(), 0.0);
        const int seeds = 1000;
        for (int s = 0; s < seeds; ++s) {
            const auto d = sample_deaths(truth.incidence, f, 1000 + s);
            for (std::size_t p = 0; p < probes.size(); ++p) {
                sum[p] += static_cast<double>(d.counts[probes[p]]);
            }
        }
        for (std::size_t p = 0; p < probes.size(); ++p) {
            const double lam = truth.lambda[probes[p]];
            const double se = std::sqrt(lam / seeds);
            CHECK(std::abs(sum[p] / seeds - lam) < 3.0 * se);
        }
        const auto none = sample_deaths(std::vector<double>(50, 0.0), f, 3);
        for (auto c : none.counts) {
            CHECK(c == 0);
        }
    }

    TEST_CASE("scenario json round trip") {
        auto sc = benchmark_scenario("double_step");
        sc.rng_seed = 42;
        const auto text = scenario_to_json(sc);
        const auto back = scenario_from_json(text);
        CHECK(back.name == sc.name);
        CHECK(back.days == sc.days);
        CHECK(back.seed_incidence == sc.seed_incidence);
        CHECK(back.r_profile.size() == sc.r_profile.size());
        CHECK(back.rng_seed == 42);
        CHECK(back.start_date == sc.start_date);
        CHECK(scenario_to_json(back) == text);
        CHECK(simulate_deaths(back).counts == simulate_deaths(sc).counts);
        CHECK_THROWS(scenario_from_json("{\"days\": 10}"));
    }
}
