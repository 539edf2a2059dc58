#include "epideconv/epi_model.hpp"
#include "epideconv/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace epideconv;

namespace {

const KernelPair& kernels() {
    static const KernelPair k = default_kernels();
    return k;
}

// Renewal recursion with piecewise R, written independently of the simulator.
std::vector<double> renewal(const std::vector<double>& r, const Kernel& w, double seed) {
    std::vector<double> j(r.size(), 0.0);
    j[0] = seed;
    for (std::size_t t = 1; t < r.size(); ++t) {
        double s = 0.0;
        for (std::size_t tau = 1; tau <= t; ++tau) {
            s += w.at(tau) * j[t - tau];
        }
        j[t] = r[t] * s;
    }
    return j;
}

}  // namespace

TEST_SUITE("epi_model") {
    TEST_CASE("expected deaths") {
        const auto& f = kernels().death_delay;
        std::vector<double> impulse(80, 0.0);
        impulse[0] = 1.0;
        const auto lam = expected_deaths(impulse, f);
        for (std::size_t t = 0; t < 80; ++t) {
            CHECK(lam[t] == doctest::Approx(f.at(t)).epsilon(1e-15));
        }
        const auto zero = expected_deaths(std::vector<double>(30, 0.0), f);
        for (double v : zero) {
            CHECK(v == 0.0);
        }
        const auto c = expected_deaths(std::vector<double>(100, 7.0), f);
        CHECK(c[99] == doctest::Approx(7.0).epsilon(1e-12));
    }

    TEST_CASE("forward model is linear") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.0, 50.0);
        std::vector<double> a(90), b(90), mix(90);
        for (std::size_t i = 0; i < 90; ++i) {
            a[i] = u(rng);
            b[i] = u(rng);
            mix[i] = 2.5 * a[i] + 0.75 * b[i];
        }
        const auto& f = kernels().death_delay;
        const auto la = expected_deaths(a, f);
        const auto lb = expected_deaths(b, f);
        const auto lm = expected_deaths(mix, f);
        for (std::size_t i = 0; i < 90; ++i) {
            CHECK(lm[i] == doctest::Approx(2.5 * la[i] + 0.75 * lb[i]).epsilon(1e-12));
        }
    }

    TEST_CASE("reproduction number") {
        const auto& w = kernels().generation;
        const auto r = reproduction_number(std::vector<double>(80, 3.0), w);
        CHECK_FALSE(r.is_defined(0));
        CHECK(std::isnan(r.values[0]));
        CHECK(r.values[79] == doctest::Approx(1.0).epsilon(1e-12));

        std::vector<double> expo(100);
        for (std::size_t t = 0; t < 100; ++t) {
            expo[t] = std::exp(0.1 * static_cast<double>(t));
        }
        double denom = 0.0;
        for (std::size_t tau = 1; tau <= w.last_lag(); ++tau) {
            denom += w.at(tau) * std::exp(-0.1 * static_cast<double>(tau));
        }
        const auto re = reproduction_number(expo, w);
        CHECK(re.values[90] == doctest::Approx(1.0 / denom).epsilon(1e-12));

        std::vector<double> impulse(60, 0.0);
        impulse[0] = 1.0;
        const auto guarded = reproduction_number(impulse, w, kLogGuard);
        CHECK(guarded.undefined_count() == 1);
        CHECK(guarded.values[50] == 0.0);
        const auto unguarded = reproduction_number(impulse, w);
        CHECK_FALSE(unguarded.is_defined(50));
        CHECK(unguarded.is_defined(5));
    }

    TEST_CASE("poisson log-likelihood") {
        CHECK(poisson_loglik(0, 3.0, 0.0) == doctest::Approx(-3.0));
        CHECK(poisson_loglik(0, 3.0, kLogGuard) == doctest::Approx(-3.0));
        CHECK(poisson_loglik(2, 2.0, 0.0) == doctest::Approx(std::log(2.0) - 2.0).epsilon(1e-14));
        CHECK(poisson_loglik(2, 2.0, 0.0) == doctest::Approx(-1.3069).epsilon(1e-4));
        CHECK(poisson_loglik(5, 5.0, 0.0) == doctest::Approx(-1.7403).epsilon(1e-4));
        CHECK(poisson_loglik(0, 0.0, 0.0) == 0.0);
    }

    TEST_CASE("per-day likelihood peaks at lambda = n") {
        for (std::int64_t n : {1, 3, 17, 250}) {
            const double at = poisson_loglik(n, static_cast<double>(n), 0.0);
            const double sat = saturated_loglik(n, static_cast<double>(n), 0.0);
            CHECK(sat == doctest::Approx(0.0).epsilon(1e-12));
            for (double rel : {0.5, 0.9, 0.99, 1.01, 1.1, 2.0}) {
                CHECK(poisson_loglik(n, n * rel, 0.0) < at);
                CHECK(saturated_loglik(n, n * rel, 0.0) < sat);
                // The two forms differ by a lambda-independent constant.
                CHECK(poisson_loglik(n, n * rel, 0.0) - saturated_loglik(n, n * rel, 0.0) ==
                      doctest::Approx(at - sat).epsilon(1e-9));
            }
        }
    }

    TEST_CASE("data loss") {
        const std::vector<std::int64_t> n0{0};
        const std::vector<double> l0{0.0};
        CHECK(data_loss(n0, l0, 0.0, Likelihood::exact) == 0.0);
        const std::vector<std::int64_t> n{1, 1};
        const std::vector<double> l{1.0, 1.0};
        CHECK(data_loss(n, l, 0.0, Likelihood::exact) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(data_loss(n, l, 0.0, Likelihood::saturated) == doctest::Approx(0.0));
        // Moving any single lambda away from n raises the saturated-form loss.
        const std::vector<std::int64_t> counts{3, 8, 20, 5, 1};
        std::vector<double> lam(counts.begin(), counts.end());
        const double base = data_loss(counts, lam, 0.0);
        for (std::size_t t = 0; t < lam.size(); ++t) {
            for (double d : {-0.05, 0.05}) {
                auto p = lam;
                p[t] *= 1.0 + d;
                CHECK(data_loss(counts, p, 0.0) > base);
            }
        }
        // With ln(n!) kept, the 1/(1+lambda) weights make lambda = n a non-stationary point.
        const double exact_base = data_loss(counts, lam, 0.0, Likelihood::exact);
        bool exact_descends = false;
        for (std::size_t t = 0; t < lam.size(); ++t) {
            auto p = lam;
            p[t] *= 1.05;
            exact_descends = exact_descends || data_loss(counts, p, 0.0, Likelihood::exact) < exact_base;
        }
        CHECK(exact_descends);
        CHECK_THROWS_AS(data_loss(counts, std::vector<double>(3, 1.0), 0.0), InvalidInput);
    }

    TEST_CASE("data loss is nearly scale invariant for large counts") {
        std::vector<std::int64_t> n(100);
        std::vector<std::int64_t> n10(100);
        for (std::size_t t = 0; t < 100; ++t) {
            n[t] = 200 + static_cast<std::int64_t>(t * 3);
            n10[t] = 10 * n[t];
        }
        std::vector<double> l(n.begin(), n.end());
        std::vector<double> l10(n10.begin(), n10.end());
        // The saturated form is identically zero at lambda = n at any scale.
        const double a = data_loss(n, l, kLogGuard);
        const double b = data_loss(n10, l10, kLogGuard);
        CHECK(std::abs(b - a) <= 0.02 * std::abs(a));
        CHECK(data_loss(n, l, 0.0) == 0.0);
    }

    TEST_CASE("dynamics loss") {
        const auto& w = kernels().generation;
        std::vector<double> r(150, 2.0);
        for (std::size_t t = 60; t < 150; ++t) {
            r[t] = 0.7;
        }
        const auto j = renewal(r, w, 1.0);
        const auto inc = log_r_increments(j, w);
        REQUIRE(inc.size() == 148);
        // Increment k is the transition into 0-based day k+2.
        CHECK(std::abs(inc[58]) == doctest::Approx(std::abs(std::log(0.7 / 2.0))).epsilon(1e-9));
        CHECK(std::abs(std::log(0.7 / 2.0)) == doctest::Approx(1.0498).epsilon(1e-4));
        for (std::size_t k = 0; k < inc.size(); ++k) {
            if (k != 58) {
                CHECK(std::abs(inc[k]) < 1e-9);
            }
        }
        const auto c = reproduction_number(std::vector<double>(100, 4.0), w);
        const auto flat = log_r_increments(std::vector<double>(100, 4.0), w);
        for (std::size_t k = 40; k < flat.size(); ++k) {
            CHECK(std::abs(flat[k]) < 1e-12);
        }
        (void)c;
    }

    TEST_CASE("dynamics loss is scale invariant") {
        std::mt19937_64 rng(5);
        std::lognormal_distribution<double> d(2.0, 1.0);
        std::vector<double> j(120);
        for (auto& x : j) {
            x = d(rng);
        }
        const auto& w = kernels().generation;
        const double base = dynamics_loss(j, w);
        for (double c : {1e-3, 1.0, 1e3, 7.25}) {
            std::vector<double> s(j);
            for (auto& x : s) {
                x *= c;
            }
            CHECK(std::abs(dynamics_loss(s, w) - base) <= 1e-10 * base);
        }
    }

    TEST_CASE("objective composition") {
        std::vector<double> j(80, 30.0);
        for (std::size_t t = 0; t < 80; ++t) {
            j[t] += 10.0 * std::sin(0.2 * static_cast<double>(t));
        }
        std::vector<std::int64_t> n(80);
        for (std::size_t t = 0; t < 80; ++t) {
            n[t] = static_cast<std::int64_t>(t % 17);
        }
        const auto& k = kernels();
        const auto o0 = objective(j, n, k.death_delay, k.generation, 0.0);
        CHECK(o0.total == o0.data);
        const auto o1 = objective(j, n, k.death_delay, k.generation, 2.51);
        CHECK(o1.total == doctest::Approx(o1.data + 2.51 * o1.dynamics).epsilon(1e-15));
        const auto o2 = objective(j, n, k.death_delay, k.generation, 5.02);
        CHECK(o2.total - o2.data == doctest::Approx(2.0 * (o1.total - o1.data)).epsilon(1e-12));
        CHECK(o1.dynamics == doctest::Approx(dynamics_loss(j, k.generation)).epsilon(1e-15));
    }
}
