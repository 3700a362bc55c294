// Fixed-point solver: contraction estimate, operator identities, converged
// slice accuracy, point evaluation, persistence round-trips.
//
// Unit runs use reduced grids (51 x 101) so the whole file stays fast; the
// production grid is exercised end to end by the acceptance battery.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "catch_amalgamated.hpp"

#include "smp/greeks.hpp"
#include "smp/io.hpp"
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

// sup over nodes of |a - b| / (1 + s_n)
double weighted_gap(const PriceSurface& a, const PriceSurface& b) {
    REQUIRE(a.grids.n_t == b.grids.n_t);
    REQUIRE(a.grids.n_s == b.grids.n_s);
    double worst = 0.0;
    for (int i = 0; i < a.grids.k; ++i)
        for (int m = 0; m < a.grids.n_t; ++m)
            for (int n = 0; n < a.grids.n_s; ++n)
                worst = std::max(worst, std::fabs(a.node(i, m, n) - b.node(i, m, n)) /
                                            (1.0 + a.grids.s[n]));
    return worst;
}

} // namespace

TEST_CASE("contraction estimate: closed forms and flags") {
    const ContractSpec c{100.0, 1.0};

    // constant hazard a: J = 1 - e^{-aT}, attained at the (t,y) = (0,0) corner
    auto m1 = flat_two_regime(0.2, 0.4, HazardFn::constant(1.0), HazardFn::constant(1.0));
    const ContractionEstimate e1 = estimate_contraction(m1, c.maturity);
    CHECK(std::fabs(e1.value - 0.63212055882855768) <= 1e-10);
    CHECK_FALSE(e1.near_unity);

    auto mh = flat_two_regime(0.2, 0.4, HazardFn::constant(0.5), HazardFn::constant(0.5));
    CHECK(std::fabs(estimate_contraction(mh, 1.0).value - 0.39346934028736658) <= 1e-10);

    // Weibull(1,2): the gap (T-t)(T+t) + 2y(T-t) is largest at t = y = 0,
    // so J = 1 - e^{-T^2}, the same number at T = 1
    auto mw = flat_two_regime(0.2, 0.4, HazardFn::weibull(1.0, 2.0), HazardFn::weibull(1.0, 2.0));
    CHECK(std::fabs(estimate_contraction(mw, 1.0).value - 0.63212055882855768) <= 1e-10);

    // vanishing horizon
    CHECK(estimate_contraction(m1, 0.0).value == 0.0);

    // rate 20: J = 1 - e^{-20} flags slow convergence
    auto mf = flat_two_regime(0.2, 0.4, HazardFn::constant(20.0), HazardFn::constant(20.0));
    const ContractionEstimate ef = estimate_contraction(mf, 1.0);
    CHECK(ef.value > 0.999);
    CHECK(ef.near_unity);
}

TEST_CASE("pricing operator: zero input reproduces the survival term") {
    auto model = flat_two_regime(0.2, 0.4, HazardFn::constant(1.0), HazardFn::constant(1.0));
    const ContractSpec contract{100.0, 1.0};
    SolverConfig cfg = small_cfg();

    Slice zero(2, std::vector<double>(static_cast<std::size_t>(cfg.n_t) * cfg.n_s, 0.0));
    const Slice out = apply_pricing_operator(model, contract, cfg, zero);

    const detail::Grids g = detail::Grids::make(model, contract, cfg);
    for (int i = 0; i < 2; ++i) {
        const BsParams bp{model.r[i], model.sigma[i], contract.strike, contract.maturity};
        for (int m = 0; m < cfg.n_t; ++m)
            for (int n = 0; n < cfg.n_s; ++n) {
                const double want =
                    (m == cfg.n_t - 1)
                        ? contract.payoff(g.s[n])
                        : model.survival(i, g.T - g.t[m]) * bs_call_price(bp, g.t[m], g.s[n]);
                CHECK(std::fabs(out[i][static_cast<std::size_t>(m) * cfg.n_s + n] - want) <=
                      1e-13 * (1.0 + g.s[n]));
            }
    }
}

TEST_CASE("pricing operator: identical coefficients fix the one-regime price") {
    // both regimes carry the same (r, sigma), so switching is invisible and
    // the one-regime price is an exact fixed point; one application must
    // reproduce it within the combined quadrature + interpolation tolerance
    auto model = flat_two_regime(0.2, 0.2, HazardFn::constant(1.0), HazardFn::constant(1.0));
    const ContractSpec contract{100.0, 1.0};
    SolverConfig cfg; // production grid: this identity is the solver's accuracy floor

    const detail::Grids g = detail::Grids::make(model, contract, cfg);
    Slice eta(2, std::vector<double>(static_cast<std::size_t>(cfg.n_t) * cfg.n_s, 0.0));
    const BsParams bp{0.05, 0.2, contract.strike, contract.maturity};
    for (int i = 0; i < 2; ++i)
        for (int m = 0; m < cfg.n_t; ++m)
            for (int n = 0; n < cfg.n_s; ++n)
                eta[i][static_cast<std::size_t>(m) * cfg.n_s + n] =
                    bs_call_price(bp, g.t[m], g.s[n]);

    const Slice out = apply_pricing_operator(model, contract, cfg, eta);
    double worst = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int m = 0; m < cfg.n_t; ++m)
            for (int n = 0; n < cfg.n_s; ++n) {
                const std::size_t idx = static_cast<std::size_t>(m) * cfg.n_s + n;
                worst = std::max(worst,
                                 std::fabs(out[i][idx] - eta[i][idx]) / (1.0 + g.s[n]));
            }
    CHECK(worst < 1e-6);

    // terminal row passes through untouched
    for (int n = 0; n < cfg.n_s; ++n)
        CHECK(out[0][static_cast<std::size_t>(cfg.n_t - 1) * cfg.n_s + n] ==
              contract.payoff(g.s[n]));
}

TEST_CASE("pricing operator: input shape is checked") {
    auto model = flat_two_regime(0.2, 0.4, HazardFn::constant(1.0), HazardFn::constant(1.0));
    const ContractSpec contract{100.0, 1.0};
    const SolverConfig cfg = small_cfg();
    Slice bad(1, std::vector<double>(static_cast<std::size_t>(cfg.n_t) * cfg.n_s, 0.0));
    CHECK_THROWS_AS(apply_pricing_operator(model, contract, cfg, bad), std::invalid_argument);
    Slice bad2(2, std::vector<double>(17, 0.0));
    CHECK_THROWS_AS(apply_pricing_operator(model, contract, cfg, bad2), std::invalid_argument);
}

TEST_CASE("solve: identical coefficients recover the one-regime price") {
    auto model = flat_two_regime(0.2, 0.2, HazardFn::constant(1.0), HazardFn::constant(1.0));
    const ContractSpec contract{100.0, 1.0};
    const SolverConfig cfg = small_cfg();
    const PriceSurface surf = solve(model, contract, cfg);

    const BsParams bp{0.05, 0.2, contract.strike, contract.maturity};
    double worst = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int m = 0; m < cfg.n_t; ++m)
            for (int n = 0; n < cfg.n_s; ++n)
                worst = std::max(
                    worst, std::fabs(surf.node(i, m, n) -
                                     bs_call_price(bp, surf.grids.t[m], surf.grids.s[n])) /
                               (1.0 + surf.grids.s[n]));
    // discretization floor of the reduced grid; the production grid is held
    // to 5e-5 by the acceptance battery
    CHECK(worst < 2e-5);

    // convergence metadata
    CHECK(surf.iterations > 0);
    CHECK(surf.final_residual < cfg.tol);
    CHECK(surf.step_norms.size() == static_cast<std::size_t>(surf.iterations));
    CHECK(surf.step_norms.back() == surf.final_residual);
    CHECK(std::fabs(surf.contraction.value - 0.63212055882855768) <= 1e-10);
    CHECK(surf.max_ratio <= surf.contraction.value + 0.05);
    for (double d : surf.step_norms) CHECK(d >= 0.0);
}

TEST_CASE("solve: point evaluation semantics") {
    auto model = flat_two_regime(0.2, 0.3, HazardFn::constant(1.0), HazardFn::constant(1.0));
    const ContractSpec contract{100.0, 1.0};
    const SolverConfig cfg = small_cfg();
    const PriceSurface surf = solve(model, contract, cfg);
    const detail::Grids& g = surf.grids;

    SECTION("age-zero on-grid queries return the stored nodes") {
        for (int i = 0; i < 2; ++i)
            for (int m : {0, 7, 25, g.n_t - 2})
                for (int n : {0, 13, 50, 77, g.n_s - 2}) {
                    const double got = price_at(surf, g.t[m], g.s[n], i, 0.0);
                    CHECK(std::fabs(got - surf.node(i, m, n)) <= 1e-12 * (1.0 + g.s[n]));
                }
    }

    SECTION("expiry returns the payoff exactly") {
        for (double s : {13.0, 99.0, 100.0, 107.3, 400.0})
            CHECK(price_at(surf, g.T, s, 1, 0.4) == contract.payoff(s));
    }

    SECTION("aged queries join the age-zero slice continuously") {
        // y = 0 takes the stored-slice fast path, tiny y > 0 the quadrature;
        // their gap is the discrete fixed-point residual at that point
        for (double s : {60.0, 100.0, 150.0}) {
            const double a = price_at(surf, 0.5, s, 0, 0.0);
            const double b = price_at(surf, 0.5, s, 0, 1e-7);
            CHECK(std::fabs(a - b) <= 1e-5 * (1.0 + s));
        }
    }

    SECTION("off-grid t between rows stays between neighbour values") {
        const double tq = 0.5 * (g.t[20] + g.t[21]);
        for (double s : {80.0, 100.0, 125.0}) {
            const double v = price_at(surf, tq, s, 0, 0.0);
            const double lo = std::min(price_at(surf, g.t[20], s, 0, 0.0),
                                       price_at(surf, g.t[21], s, 0, 0.0));
            const double hi = std::max(price_at(surf, g.t[20], s, 0, 0.0),
                                       price_at(surf, g.t[21], s, 0, 0.0));
            CHECK(v >= lo - 1e-3 * (1.0 + s));
            CHECK(v <= hi + 1e-3 * (1.0 + s));
        }
    }

    SECTION("domain violations throw") {
        CHECK_THROWS_AS(price_at(surf, 0.1, 100.0, 0, 0.2), std::domain_error); // y > t
        CHECK_THROWS_AS(price_at(surf, 1.5, 100.0, 0, 0.0), std::domain_error); // t > T
        CHECK_THROWS_AS(price_at(surf, 0.5, 0.0, 0, 0.0), std::domain_error);   // s = 0
        CHECK_THROWS_AS(price_at(surf, 0.5, 100.0, 5, 0.0), std::out_of_range); // regime
    }
}

TEST_CASE("solve: start point does not matter below twice the tolerance") {
    // rate-1/2 hazards: J = 1 - e^{-1/2} < 1/2, so the tail bound
    // J/(1-J) * tol keeps any two converged runs within 2 tol
    auto model = flat_two_regime(0.2, 0.4, HazardFn::constant(0.5), HazardFn::constant(0.5));
    const ContractSpec contract{100.0, 1.0};
    const SolverConfig cfg = small_cfg();
    const PriceSurface a = solve(model, contract, cfg, InitialIterate::BsPrice);
    const PriceSurface b = solve(model, contract, cfg, InitialIterate::Zero);
    CHECK(weighted_gap(a, b) <= 2.0 * cfg.tol);
}

TEST_CASE("solve: failure modes") {
    const ContractSpec contract{100.0, 1.0};

    SECTION("iteration cap reached") {
        auto model =
            flat_two_regime(0.2, 0.4, HazardFn::constant(1.0), HazardFn::constant(1.0));
        SolverConfig cfg = small_cfg();
        cfg.tol = 1e-14;
        cfg.max_iter = 2;
        CHECK_THROWS_WITH(solve(model, contract, cfg),
                          Catch::Matchers::ContainsSubstring("no convergence"));
    }

    SECTION("invalid model is rejected up front") {
        auto model =
            flat_two_regime(0.2, 0.4, HazardFn::constant(1.0), HazardFn::constant(1.0));
        model.hazards[1][0].reset(); // empty row: total hazard vanishes
        CHECK_THROWS_AS(solve(model, contract, small_cfg()), std::invalid_argument);
    }

    SECTION("Weibull shape below one is unsupported") {
        auto model =
            flat_two_regime(0.2, 0.4, HazardFn::weibull(1.0, 0.5), HazardFn::constant(1.0));
        CHECK_THROWS_WITH(solve(model, contract, small_cfg()),
                          Catch::Matchers::ContainsSubstring("infinite age-zero rate"));
    }
}

TEST_CASE("pde residual: stencil validation and magnitude") {
    auto model = flat_two_regime(0.2, 0.2, HazardFn::constant(1.0), HazardFn::constant(1.0));
    const ContractSpec contract{100.0, 1.0};
    const PriceSurface surf = solve(model, contract, small_cfg());

    CHECK_THROWS_AS(pde_residual(surf, 0.4, 100.0, 0, 0.1, -0.01, 1.0, 0.01),
                    std::invalid_argument);
    // stencil would need y + h_y <= t and t + h_t <= T
    CHECK_THROWS_AS(pde_residual(surf, 0.4, 100.0, 0, 0.4, 0.01, 1.0, 0.01),
                    std::domain_error);
    CHECK_THROWS_AS(pde_residual(surf, 0.99, 100.0, 0, 0.1, 0.05, 1.0, 0.01),
                    std::domain_error);

    // identical coefficients: the equation is solved exactly by the
    // one-regime price, so the residual is discretization noise only
    const double res = pde_residual(surf, 0.4, 110.0, 0, 0.1, 0.05, 2.0, 0.05);
    CHECK(std::fabs(res) < 0.05);
}

TEST_CASE("surface persistence: binary round trip and csv shape") {
    auto model = flat_two_regime(0.2, 0.35, HazardFn::constant(1.0), HazardFn::constant(0.8));
    const ContractSpec contract{100.0, 1.0};
    SolverConfig cfg;
    cfg.n_t = 21;
    cfg.n_s = 51;
    const PriceSurface surf = solve(model, contract, cfg);
    const std::uint64_t tag = 0x1234abcd5678ef00ULL;

    std::ostringstream os(std::ios::binary);
    save_surface_binary(os, surf, tag);
    const std::string blob = os.str();

    SECTION("round trip restores every plane bitwise") {
        std::istringstream is(blob, std::ios::binary);
        PriceSurface back;
        back.model = model;
        back.contract = contract;
        back.config = cfg;
        REQUIRE(load_surface_binary(is, back, tag));
        for (int i = 0; i < 2; ++i)
            for (int m = 0; m < cfg.n_t; ++m)
                for (int n = 0; n < cfg.n_s; ++n)
                    CHECK(back.node(i, m, n) == surf.node(i, m, n));
        CHECK(back.iterations == surf.iterations);
        CHECK(back.final_residual == surf.final_residual);
        // restored surface evaluates like the original
        CHECK(price_at(back, 0.3, 104.0, 1, 0.1) ==
              Catch::Approx(price_at(surf, 0.3, 104.0, 1, 0.1)).epsilon(1e-14));
    }

    SECTION("hash mismatch is refused") {
        std::istringstream is(blob, std::ios::binary);
        PriceSurface back;
        back.model = model;
        back.contract = contract;
        back.config = cfg;
        CHECK_FALSE(load_surface_binary(is, back, tag + 1));
    }

    SECTION("truncation is refused") {
        std::istringstream is(blob.substr(0, blob.size() / 2), std::ios::binary);
        PriceSurface back;
        back.model = model;
        back.contract = contract;
        back.config = cfg;
        CHECK_FALSE(load_surface_binary(is, back, tag));
    }

    SECTION("grid mismatch is refused") {
        std::istringstream is(blob, std::ios::binary);
        PriceSurface back;
        back.model = model;
        back.contract = contract;
        back.config = cfg;
        back.config.n_s = 61;
        CHECK_FALSE(load_surface_binary(is, back, tag));
    }

    SECTION("csv layout") {
        std::ostringstream cs;
        write_surface_csv(cs, surf);
        const std::string text = cs.str();
        REQUIRE(text.rfind("t,s,regime,y,phi\n", 0) == 0);
        const std::size_t lines = static_cast<std::size_t>(
            std::count(text.begin(), text.end(), '\n'));
        CHECK(lines == 1 + static_cast<std::size_t>(2) * cfg.n_t * cfg.n_s);
        // regime column is 1-based
        CHECK(text.find(",1,0,") != std::string::npos);
        CHECK(text.find(",2,0,") != std::string::npos);
        CHECK(text.find(",0,0,") == std::string::npos);

        std::ostringstream cs2;
        write_surface_csv(cs2, surf);
        CHECK(cs2.str() == text);
    }
}
