// Closed-form call pricing and the lognormal transition kernel.

#include <cmath>
#include <vector>

#include "catch_amalgamated.hpp"

#include "smp/black_scholes.hpp"
#include "smp/lognormal.hpp"
#include "smp/math/rng.hpp"

using namespace smp;

namespace {
const BsParams ATM{0.05, 0.2, 100.0, 1.0};
}

TEST_CASE("call price: frozen reference values") {
    // references computed with 30-digit arithmetic
    CHECK(bs_call_price(ATM, 0.0, 100.0) ==
          Catch::Approx(10.450583572185567).margin(2e-13));
    CHECK(bs_call_price({0.05, 0.2, 100.0, 0.5}, 0.0, 120.0) ==
          Catch::Approx(22.952452747025779).margin(2e-13));
    CHECK(bs_call_price({0.05, 0.4, 100.0, 0.75}, 0.0, 80.0) ==
          Catch::Approx(5.6404788529160103).margin(2e-13));
}

TEST_CASE("call price: degenerate edges") {
    CHECK(bs_call_price(ATM, 1.0, 150.0) == 50.0); // terminal payoff
    CHECK(bs_call_price(ATM, 1.0, 80.0) == 0.0);
    CHECK(bs_call_price({0.05, 0.2, 0.0, 1.0}, 0.3, 73.0) == 73.0); // zero strike
    CHECK_THROWS_AS(bs_call_price(ATM, 0.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(bs_call_price(ATM, 0.0, -5.0), std::domain_error);
}

TEST_CASE("call price: monotone, convex, inside the envelope") {
    std::vector<double> vals;
    for (int q = 0; q <= 200; ++q) {
        const double s = 40.0 + q;
        const double v = bs_call_price(ATM, 0.25, s);
        const double tau = 0.75;
        CHECK(v >= std::max(s - 100.0 * std::exp(-0.05 * tau), 0.0) - 1e-12);
        CHECK(v <= s);
        vals.push_back(v);
    }
    for (std::size_t q = 1; q < vals.size(); ++q) CHECK(vals[q] >= vals[q - 1]);
    for (std::size_t q = 1; q + 1 < vals.size(); ++q)
        CHECK(vals[q + 1] - 2.0 * vals[q] + vals[q - 1] >= -1e-9 * (1.0 + vals[q]));
}

TEST_CASE("call delta: frozen value, limits, terminal convention") {
    CHECK(bs_call_delta(ATM, 0.0, 100.0) ==
          Catch::Approx(0.63683065117561907).margin(1e-14));
    CHECK(bs_call_delta(ATM, 0.0, 1e6 * 100.0) == Catch::Approx(1.0).margin(1e-12));
    CHECK(bs_call_delta(ATM, 0.0, 1e-4) == Catch::Approx(0.0).margin(1e-12));
    CHECK(bs_call_delta(ATM, 1.0, 100.0) == 1.0); // right-continuous at the kink
    CHECK(bs_call_delta(ATM, 1.0, 99.99) == 0.0);
    for (double s : {50.0, 90.0, 100.0, 130.0, 400.0}) {
        const double d = bs_call_delta(ATM, 0.4, s);
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
    }
}

TEST_CASE("lognormal kernel: centered point and density normalization") {
    const double s = 80.0, r = 0.03, sig = 0.35, v = 0.6;
    const double xc = s * std::exp((r - 0.5 * sig * sig) * v);
    CHECK(lognormal_zscore(xc, s, r, sig, v) == Catch::Approx(0.0).margin(1e-12));
    CHECK(lognormal_pdf(xc, s, r, sig, v) ==
          Catch::Approx(1.0 / (std::sqrt(2.0 * M_PI) * xc * sig * std::sqrt(v)))
              .epsilon(1e-12));
    // normalization, integrated in log space by trapezoid over +-10 sigma
    const int n = 4000;
    double acc = 0.0;
    const double lo = std::log(xc) - 10.0 * sig * std::sqrt(v);
    const double h = 20.0 * sig * std::sqrt(v) / n;
    for (int q = 0; q <= n; ++q) {
        const double x = std::exp(lo + h * q);
        const double w = (q == 0 || q == n) ? 0.5 : 1.0;
        acc += w * lognormal_pdf(x, s, r, sig, v) * x; // dx = x du
    }
    CHECK(acc * h == Catch::Approx(1.0).margin(1e-10));
    CHECK_THROWS_AS(lognormal_pdf(-1.0, s, r, sig, v), std::domain_error);
    CHECK_THROWS_AS(lognormal_zscore(1.0, s, r, sig, 0.0), std::domain_error);
}

TEST_CASE("standardized log return identity holds to 1e-12") {
    CounterRng rng(987, 0, 0);
    for (int q = 0; q < 100; ++q) {
        const double x = 0.1 + 9.9 * rng.uniform();
        const double s = 0.1 + 9.9 * rng.uniform();
        const double v = 0.1 + 9.9 * rng.uniform();
        const double r = 0.1 * rng.uniform();
        const double sig = 0.1 + 0.4 * rng.uniform();
        CHECK(std::fabs(zscore_identity_residual(x, s, r, sig, v)) < 1e-12);
    }
    // every term carries a factor z, so a centered point zeroes the residual
    // (up to the rounding of the centered x itself)
    const double xc = 2.0 * std::exp((0.05 - 0.02) * 0.7);
    CHECK(std::fabs(zscore_identity_residual(xc, 2.0, 0.05, 0.2, 0.7)) < 1e-14);
}

TEST_CASE("zscore time derivative matches finite differences") {
    const double x = 3.7, s = 2.1, r = 0.04, sig = 0.3;
    for (double v : {0.2, 0.8, 1.7}) {
        const double h = 1e-6;
        const double fd =
            (lognormal_zscore(x, s, r, sig, v + h) - lognormal_zscore(x, s, r, sig, v - h)) /
            (2.0 * h);
        const double z = lognormal_zscore(x, s, r, sig, v);
        const double analytic = -0.5 * z / v - (r - 0.5 * sig * sig) / (sig * std::sqrt(v));
        CHECK(fd == Catch::Approx(analytic).epsilon(1e-6));
    }
}

TEST_CASE("lognormal expectation: exactness and closed forms") {
    const double s = 130.0, r = 0.07, sig = 0.25, v = 0.9;
    SECTION("constant and affine integrands") {
        CHECK(lognormal_expectation([](double) { return 1.0; }, s, r, sig, v, 64) ==
              Catch::Approx(1.0).margin(1e-13));
        CHECK(lognormal_expectation([](double x) { return x; }, s, r, sig, v, 5) ==
              Catch::Approx(s * std::exp(r * v)).margin(1e-12 * s));
        // the proof's a(s) identity: E[1+X] = 1 + s e^{rv}
        CHECK(lognormal_expectation([](double x) { return 1.0 + x; }, s, r, sig, v, 64) ==
              Catch::Approx(1.0 + s * std::exp(r * v)).margin(1e-12 * (1.0 + s)));
        CHECK(lognormal_expectation([](double x) { return 2.0 * x - 7.0; }, s, r, sig, v,
                                    2) ==
              Catch::Approx(2.0 * s * std::exp(r * v) - 7.0).epsilon(1e-12));
    }
    SECTION("moments of the standardized log return") {
        double m1 = lognormal_expectation(
            [&](double x) { return lognormal_zscore(x, s, r, sig, v); }, s, r, sig, v, 64);
        double m2 = lognormal_expectation(
            [&](double x) {
                const double z = lognormal_zscore(x, s, r, sig, v);
                return z * z;
            },
            s, r, sig, v, 64);
        CHECK(m1 == Catch::Approx(0.0).margin(1e-10));
        CHECK(m2 == Catch::Approx(1.0).margin(1e-10));
    }
    SECTION("semigroup: expectation of a later call value discounts back") {
        const BsParams p{r, sig, 100.0, 2.0};
        const double t = 0.6;
        const double got = lognormal_expectation(
            [&](double x) { return bs_call_price(p, t + v, x); }, s, r, sig, v, 64);
        CHECK(got == Catch::Approx(std::exp(r * v) * bs_call_price(p, t, s))
                         .epsilon(1e-8));
    }
    SECTION("order validation") {
        CHECK_THROWS_AS(lognormal_expectation([](double) { return 1.0; }, s, r, sig, v, 0),
                        std::invalid_argument);
        CHECK_THROWS_AS(lognormal_expectation([](double) { return 1.0; }, -1.0, r, sig, v, 8),
                        std::domain_error);
    }
}
