// Delta: integral representation, finite-difference cross-check, replication
// accounting, and the tabulated lattice.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "catch_amalgamated.hpp"

#include "smp/greeks.hpp"
#include "smp/volterra.hpp"

using namespace smp;

namespace {

RegimeModel flat_two_regime(double sig0, double sig1, const HazardFn& h01,
                            const HazardFn& h10) {
    RegimeModel m;
    m.k = 2;
    m.r = {0.05, 0.05};
    m.sigma = {sig0, sig1};
    m.mu = {0.05, 0.05};
    m.hazards.assign(2, std::vector<std::optional<HazardFn>>(2, std::nullopt));
    m.hazards[0][1] = h01;
    m.hazards[1][0] = h10;
    return m;
}

SolverConfig small_cfg() {
    SolverConfig cfg;
    cfg.n_t = 51;
    cfg.n_s = 101;
    return cfg;
}

const ContractSpec kContract{100.0, 1.0};

// identical coefficients: the true price and delta are one-regime
// Black-Scholes, which pins every representation against a closed form
const PriceSurface& flat_surface() {
    static const PriceSurface s =
        solve(flat_two_regime(0.2, 0.2, HazardFn::constant(1.0), HazardFn::constant(1.0)),
              kContract, small_cfg());
    return s;
}

const PriceSurface& mixed_surface() {
    static const PriceSurface s =
        solve(flat_two_regime(0.2, 0.4, HazardFn::constant(1.0), HazardFn::constant(1.0)),
              kContract, small_cfg());
    return s;
}

} // namespace

TEST_CASE("delta against the one-regime closed form") {
    const PriceSurface& surf = flat_surface();
    const BsParams bp{0.05, 0.2, 100.0, 1.0};
    // reduced-grid discretization floor is ~1e-4 in the spot derivative; the
    // production grid is held to 1e-4 by the acceptance battery
    for (double t : {0.0, 0.26, 0.6}) {
        for (double s : {80.0, 100.0, 118.0}) {
            const double want = bs_call_delta(bp, t, s);
            CHECK(std::fabs(delta_integral(surf, t, s, 0, 0.0) - want) < 2e-4);
            CHECK(std::fabs(delta_fd(surf, t, s, 0, 0.0) - want) < 2e-4);
        }
    }
    // aged state, identical coefficients: age changes nothing
    CHECK(std::fabs(delta_integral(surf, 0.5, 100.0, 1, 0.37) -
                    bs_call_delta(bp, 0.5, 100.0)) < 2e-4);
}

TEST_CASE("delta at expiry and deep in/out of the money") {
    const PriceSurface& surf = mixed_surface();

    // at expiry the payoff derivative is exact, kink resolved to the right
    CHECK(delta_integral(surf, 1.0, 130.0, 0, 0.2) == 1.0);
    CHECK(delta_integral(surf, 1.0, 70.0, 1, 0.0) == 0.0);
    CHECK(delta_integral(surf, 1.0, 100.0, 0, 0.0) == 1.0);
    // central differences straddle the payoff away from the kink; the ITM
    // quotient is 2h/2h up to the rounding of s +- h
    CHECK(std::fabs(delta_fd(surf, 1.0, 130.0, 0, 0.2) - 1.0) < 1e-12);
    CHECK(delta_fd(surf, 1.0, 70.0, 1, 0.0) == 0.0);

    const double deep_itm = delta_integral(surf, 0.0, 1e5, 0, 0.0);
    CHECK(deep_itm > 0.98);
    CHECK(deep_itm <= 1.0 + 1e-6);
    const double deep_otm = delta_integral(surf, 0.0, 1.0, 0, 0.0);
    CHECK(deep_otm >= 0.0);
    CHECK(deep_otm < 1e-4);
}

TEST_CASE("integral and finite-difference deltas agree on the mixed model") {
    const PriceSurface& surf = mixed_surface();
    for (int i = 0; i < 2; ++i)
        for (double t : {0.12, 0.5})
            for (double s : {85.0, 100.0, 120.0})
                for (double yf : {0.0, 0.4}) {
                    const double y = yf * t;
                    const double psi = delta_integral(surf, t, s, i, y);
                    const double fd = delta_fd(surf, t, s, i, y);
                    CHECK(std::fabs(psi - fd) / std::max(1.0, std::fabs(psi)) < 2e-4);
                    CHECK(psi >= 0.0);
                    CHECK(psi <= 1.0 + 1e-6);
                }
}

TEST_CASE("hedge position replicates the price") {
    const PriceSurface& surf = mixed_surface();

    for (double t : {0.0, 0.31}) {
        for (double s : {90.0, 100.0, 115.0}) {
            const double av = t == 0.0 ? 1.0 : std::exp(0.05 * t);
            const HedgePosition hp = hedge_position(surf, t, s, 1, 0.0, av);
            const double ph = price_at(surf, t, s, 1, 0.0);
            CHECK(std::fabs(hp.shares * s + hp.bond * av - ph) <= 1e-12 * (1.0 + ph));
        }
    }

    // expiry: in the money the position is one share financed by K of debt
    const HedgePosition itm = hedge_position(surf, 1.0, 130.0, 0, 0.2);
    CHECK(itm.shares == 1.0);
    CHECK(itm.bond == -100.0);
    const HedgePosition otm = hedge_position(surf, 1.0, 70.0, 0, 0.0);
    CHECK(otm.shares == 0.0);
    CHECK(otm.bond == 0.0);

    // identical coefficients at t = 0: the classic Black-Scholes hedge
    const BsParams bp{0.05, 0.2, 100.0, 1.0};
    const HedgePosition bs = hedge_position(flat_surface(), 0.0, 100.0, 0, 0.0);
    CHECK(std::fabs(bs.shares - bs_call_delta(bp, 0.0, 100.0)) < 2e-4);
    const double bond_want = bs_call_price(bp, 0.0, 100.0) - bs_call_delta(bp, 0.0, 100.0) * 100.0;
    CHECK(std::fabs(bs.bond - bond_want) < 2e-2);

    CHECK_THROWS_AS(hedge_position(surf, 0.5, 100.0, 0, 0.1, 0.0), std::domain_error);
    CHECK_THROWS_AS(hedge_position(surf, 0.5, 100.0, 0, 0.1, -2.0), std::domain_error);
}

TEST_CASE("delta table nodes match the integral representation") {
    const PriceSurface& surf = mixed_surface();
    const DeltaTable table(surf);
    const detail::Grids& g = surf.grids;

    // assembly shares the evaluation's panel structure term by term, so
    // nodes agree to accumulation roundoff, not just quadrature tolerance
    for (int i = 0; i < 2; ++i)
        for (int m : {0, 11, 30, g.n_t - 2, g.n_t - 1})
            for (int l : {0, m / 2, m})
                for (int n : {5, 50, 90}) {
                    const double direct =
                        delta_integral(surf, g.t[m], g.s[n], i, g.t[l]);
                    CHECK(std::fabs(table.node(i, m, l, n) - direct) <= 5e-12);
                }
}

TEST_CASE("delta table queries: interpolation and clamping") {
    const PriceSurface& surf = mixed_surface();
    const DeltaTable table(surf);
    const detail::Grids& g = surf.grids;

    SECTION("node-coincident queries reproduce node values") {
        for (int i = 0; i < 2; ++i)
            for (int m : {3, 27})
                for (int n : {20, 64})
                    CHECK(table.delta(g.t[m], g.s[n], i, 0.0) ==
                          Catch::Approx(table.node(i, m, 0, n)).margin(1e-12));
    }

    SECTION("queries between nodes stay within local node range") {
        const double t = 0.5 * (g.t[10] + g.t[11]);
        const double s = std::sqrt(g.s[40] * g.s[41]); // log midpoint
        const double v = table.delta(t, s, 0, 0.0);
        double lo = 1e300, hi = -1e300;
        for (int m : {10, 11})
            for (int n : {39, 40, 41, 42}) {
                lo = std::min(lo, table.node(0, m, 0, n));
                hi = std::max(hi, table.node(0, m, 0, n));
            }
        CHECK(v >= lo - 1e-9);
        CHECK(v <= hi + 1e-9);
    }

    SECTION("out-of-range spots and ages clamp instead of extrapolating") {
        const double below = table.delta(0.4, 1e-7, 0, 0.0);
        CHECK(below == Catch::Approx(table.delta(0.4, g.s[0], 0, 0.0)).margin(1e-12));
        const double above = table.delta(0.4, 1e7, 0, 0.0);
        CHECK(above ==
              Catch::Approx(table.delta(0.4, g.s[g.n_s - 1], 0, 0.0)).margin(1e-12));
        // y beyond t clamps to t
        CHECK(table.delta(0.4, 100.0, 0, 9.0) ==
              Catch::Approx(table.delta(0.4, 100.0, 0, 0.4)).margin(1e-12));
    }

    SECTION("domain errors") {
        CHECK_THROWS_AS(table.delta(0.4, 0.0, 0, 0.0), std::domain_error);
        CHECK_THROWS_AS(table.delta(2.0, 100.0, 0, 0.0), std::domain_error);
        CHECK_THROWS_AS(table.delta(0.4, 100.0, 7, 0.0), std::out_of_range);
    }
}
