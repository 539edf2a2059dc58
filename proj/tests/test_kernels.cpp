#include "epideconv/errors.hpp"
#include "epideconv/kernels.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <tuple>
#include <numeric>

using namespace epideconv;

namespace {

// Regularized lower incomplete gamma by its power series; independent of Boost.
double oracle_gamma_p(double a, double x) {
    if (x <= 0.0) {
        return 0.0;
    }
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 10000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (term < sum * 1e-17) {
            break;
        }
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * sum;
}

}  // namespace

TEST_SUITE("kernels") {
    TEST_CASE("moment matching") {
        auto w = gamma_from_moments(6.3, 4.2);
        CHECK(w.shape == doctest::Approx(2.25).epsilon(1e-15));
        CHECK(w.scale == doctest::Approx(2.8).epsilon(1e-15));
        auto f = gamma_from_moments(19.3, 9.1);
        CHECK(f.shape == doctest::Approx(4.4982).epsilon(1e-4));
        CHECK(f.scale == doctest::Approx(4.2907).epsilon(1e-4));
        auto e = gamma_from_moments(1.0, 1.0);
        CHECK(e.shape == 1.0);
        CHECK(e.scale == 1.0);
        CHECK_THROWS_AS(gamma_from_moments(0.0, 1.0), InvalidParameter);
        CHECK_THROWS_AS(gamma_from_moments(1.0, -1.0), InvalidParameter);
        CHECK_THROWS_AS(gamma_from_moments(std::nan(""), 1.0), InvalidParameter);
    }

    TEST_CASE("discretized entries are day-centered CDF differences") {
        for (std::size_t start : {0u, 1u}) {
            for (auto [mean, sd, len] : {std::tuple{19.3, 9.1, 60u}, std::tuple{6.3, 4.2, 30u}}) {
                const auto spec = gamma_from_moments(mean, sd);
                const auto k = discretize(spec, start, len);
                auto cdf = [&](double x) { return oracle_gamma_p(spec.shape, std::max(x, 0.0) / spec.scale); };
                const double total = cdf(start + len - 0.5) - cdf(start - 0.5);
                for (std::size_t tau = start; tau < start + len; ++tau) {
                    const double expected = (cdf(tau + 0.5) - cdf(tau - 0.5)) / total;
                    CHECK(k.at(tau) == doctest::Approx(expected).epsilon(1e-10));
                }
                CHECK(k.support_start() == start);
                if (start == 1) {
                    CHECK(k.at(0) == 0.0);
                }
            }
        }
    }

    TEST_CASE("default kernels reproduce their moments") {
        const auto k = default_kernels();
        CHECK(std::abs(k.death_delay.mean() - 19.3) < 0.2);
        CHECK(std::abs(k.death_delay.sd() - 9.1) < 0.2);
        CHECK(std::abs(k.generation.mean() - 6.3) < 0.2);
        CHECK(std::abs(k.generation.sd() - 4.2) < 0.2);
        CHECK(k.death_delay.length() == 60);
        CHECK(k.generation.length() == 30);
        CHECK_FALSE(k.death_delay.truncation_warning());
        CHECK_FALSE(k.generation.truncation_warning());
    }

    TEST_CASE("renormalization and tail properties") {
        for (double mean : {1.0, 6.3, 19.3, 40.0}) {
            for (double sd : {0.5, 4.2, 9.1}) {
                const auto spec = gamma_from_moments(mean, sd);
                for (std::size_t start : {0u, 1u}) {
                    for (std::size_t len : {1u, 2u, 10u, 60u, 200u}) {
                        const auto k = discretize(spec, start, len);
                        const double sum = std::accumulate(k.values().begin(), k.values().end(), 0.0);
                        CHECK(std::abs(sum - 1.0) < 1e-12);
                        for (double v : k.values()) {
                            CHECK(v >= 0.0);
                        }
                        if (len > 1) {
                            // Past the mode (shape > 1) entries fall monotonically.
                            const double mode = spec.shape > 1 ? (spec.shape - 1) * spec.scale : 0.0;
                            for (std::size_t i = 1; i < len; ++i) {
                                const double lag = static_cast<double>(start + i - 1);
                                if (lag >= mode + 1.0) {
                                    CHECK(k.values()[i] <= k.values()[i - 1]);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    TEST_CASE("single bin kernel") {
        const auto k = discretize(gamma_from_moments(6.3, 4.2), 1, 1);
        REQUIRE(k.length() == 1);
        CHECK(k.at(1) == 1.0);
    }

    TEST_CASE("moments converge with length") {
        const auto spec = gamma_from_moments(19.3, 9.1);
        CHECK(std::abs(discretize(spec, 0, 60).mean() - discretize(spec, 0, 200).mean()) < 0.05);
    }

    TEST_CASE("short support raises the truncation warning") {
        const auto k = discretize(gamma_from_moments(19.3, 9.1), 0, 20);
        CHECK(k.truncation_warning());
        CHECK(k.captured_mass() < 0.99);
        CHECK_THROWS_AS(discretize(gamma_from_moments(6.3, 4.2), 2, 5), InvalidParameter);
        CHECK_THROWS_AS(discretize(gamma_from_moments(6.3, 4.2), 0, 0), InvalidParameter);
    }

    TEST_CASE("csv export") {
        const auto k = discretize(gamma_from_moments(6.3, 4.2), 1, 3);
        const auto csv = kernel_to_csv(k);
        CHECK(csv.rfind("lag,probability\n1,", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    }
}
