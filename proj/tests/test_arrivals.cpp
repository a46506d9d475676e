#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "speedscale/arrivals.hpp"

using namespace speedscale;

namespace {
constexpr double kExactBaseVariance = 25.0 / 24.0;  // p/(1-p)^2 * delta^2 at p=0.96, delta=1/24
}

TEST_CASE("scaled geometric moments at the reference parameters") {
    const ArrivalSpec a = ArrivalSpec::scaled_geometric(0.96, 1.0 / 24.0);
    CHECK(a.alpha() == Catch::Approx(1.0).margin(1e-15));
    // the reference description rounds this variance to 1; the exact value of
    // p/(1-p)^2 delta^2 is 25/24
    CHECK(a.sigma2() == Catch::Approx(kExactBaseVariance).margin(1e-12));
    CHECK(a.p_zero() == Catch::Approx(0.04).margin(1e-15));
}

TEST_CASE("truncated pmf matches analytic moments to 1e-9") {
    const ArrivalSpec a = ArrivalSpec::scaled_geometric(0.96, 1.0 / 24.0);
    const Pmf p = a.pmf(1e-10);
    double total = 0.0;
    for (double pr : p.prob) {
        CHECK(pr >= 0.0);
        total += pr;
    }
    CHECK(total == Catch::Approx(1.0).margin(1e-12));
    CHECK(p.mean == Catch::Approx(a.alpha()).margin(1e-9));
    CHECK(p.variance == Catch::Approx(a.sigma2()).margin(1e-9));
    CHECK(p.prob.front() > 0.0);  // zero stays in the support
    CHECK(p.value.front() == 0.0);

    // looser tails keep the moment contract
    const Pmf q = a.pmf(1e-6);
    CHECK(q.mean == Catch::Approx(a.alpha()).margin(1e-9));
    CHECK(q.variance == Catch::Approx(a.sigma2()).margin(1e-9));
}

TEST_CASE("degenerate geometric collapses to a point mass at zero") {
    const ArrivalSpec a = ArrivalSpec::scaled_geometric(1e-9, 1.0);
    const Pmf p = a.pmf(1e-10);
    CHECK(a.alpha() == Catch::Approx(0.0).margin(1e-8));
    CHECK(p.value.front() == 0.0);
    CHECK(p.prob.front() == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(ArrivalSpec::scaled_geometric(0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ArrivalSpec::scaled_geometric(1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ArrivalSpec::scaled_geometric(0.5, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(ArrivalSpec::mixture_for_variance(0.5), std::invalid_argument);
    CHECK_THROWS_AS(
        ArrivalSpec::coin_mixture(0.9, ArrivalSpec::default_base(), 0.0),
        std::invalid_argument);
    const ArrivalSpec a = ArrivalSpec::default_base();
    CHECK_THROWS_AS(a.pmf(0.0), std::invalid_argument);
    CHECK_THROWS_AS(a.pmf(1e-3), std::invalid_argument);
}

TEST_CASE("mixture construction hits the design variance identity") {
    SECTION("kappa = 1 gives rho_z = 1/2") {
        const ArrivalSpec m = ArrivalSpec::mixture_for_variance(1.0);
        CHECK(m.rho_z() == Catch::Approx(0.5).margin(1e-12));
        CHECK(m.rho_mix() == Catch::Approx(0.9).margin(1e-15));
        // variance identity with the nominal unit base variance:
        // 0.1 * 1 + 0.9 * (1 - 0.5)/0.5 = 1
        CHECK(m.nominal_sigma2() == Catch::Approx(1.0).margin(1e-9));
        // exact variance carries the 1/240 excess from the true base variance
        CHECK(m.sigma2() == Catch::Approx(1.0 + (kExactBaseVariance - 1.0) * 0.1).margin(1e-12));
    }
    SECTION("kappa = 32 gives rho_z = 9/328") {
        const ArrivalSpec m = ArrivalSpec::mixture_for_variance(32.0);
        CHECK(m.rho_z() == Catch::Approx(9.0 / 328.0).margin(1e-15));
        CHECK(m.nominal_sigma2() == Catch::Approx(32.0).margin(1e-9));
    }
    SECTION("mean is one for any rho_z") {
        for (double kappa : {1.0, 2.0, 7.5, 32.0}) {
            const ArrivalSpec m = ArrivalSpec::mixture_for_variance(kappa);
            CHECK(m.alpha() == Catch::Approx(1.0).margin(1e-12));
            const Pmf p = m.pmf(1e-10);
            CHECK(p.mean == Catch::Approx(1.0).margin(1e-9));
            CHECK(p.variance == Catch::Approx(m.sigma2()).margin(1e-9));
        }
    }
}

TEST_CASE("mixture sampling matches target moments within 3 standard errors") {
    const long n = 1000000;
    for (double kappa : {1.0, 32.0}) {
        const ArrivalSpec m = ArrivalSpec::mixture_for_variance(kappa);
        RngStream stream(20240809, 0, "arrival-moments");
        double s = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
        for (long i = 0; i < n; ++i) {
            const double a = m.sample(stream);
            s += a;
            s2 += a * a;
            s3 += a * a * a;
            s4 += a * a * a * a;
        }
        const double mean = s / n;
        const double var = s2 / n - mean * mean;
        const double se_mean = std::sqrt(var / n);
        // standard error of the sample variance via the fourth central moment
        const double m4 = s4 / n - 4 * mean * (s3 / n) + 6 * mean * mean * (s2 / n) -
                          3 * mean * mean * mean * mean;
        const double se_var = std::sqrt(std::max(0.0, m4 - var * var) / n);
        CHECK(std::abs(mean - 1.0) < 3.0 * se_mean);
        CHECK(std::abs(var - kappa) < 3.0 * se_var + 0.01);
    }
}

TEST_CASE("lattice structure of the mixture support") {
    const ArrivalSpec m1 = ArrivalSpec::mixture_for_variance(1.0);
    CHECK(m1.delta_z() == Catch::Approx(2.0));
    CHECK(m1.lattice_unit() == Catch::Approx(1.0 / 24.0));  // 2 = 48 delta

    const ArrivalSpec m2 = ArrivalSpec::mixture_for_variance(2.0);
    CHECK(m2.delta_z() == Catch::Approx(28.0 / 9.0));
    CHECK(m2.lattice_unit() == Catch::Approx(1.0 / 72.0));  // 28/9 = 224/72

    for (double kappa : {1.0, 2.0, 4.0, 8.0, 12.0, 16.0, 24.0, 32.0}) {
        const ArrivalSpec m = ArrivalSpec::mixture_for_variance(kappa);
        const Pmf p = m.pmf(1e-10);
        REQUIRE(p.lattice_unit > 0.0);
        for (double v : p.value) {
            const double r = v / p.lattice_unit;
            CHECK(std::abs(r - std::llround(r)) < 1e-9);
        }
    }
}
