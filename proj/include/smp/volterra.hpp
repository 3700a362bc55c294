#pragma once

/*
 Regime-switching European call pricing by fixed-point iteration of a
 Volterra integral equation of the second kind.

   phi(t,s,i,y) =  S_i(y, T-t) eta_i(t,s)
                 + int_0^{T-t} e^{-r_i v} S_i(y,v) sum_{j!=i} lam_ij(y+v)
                     E[ G_j(t+v, X_v) ] dv

   S_i(y,v) = exp(-(Lam_i(y+v) - Lam_i(y)))      conditional survival
   X_v      = s exp((r_i - sig_i^2/2) v + sig_i sqrt(v) Z),  Z ~ N(0,1)
   G_j(t,s) = phi(t, s, j, 0)                     age-zero slice
   eta_i    = single-regime Black-Scholes price with regime-i coefficients.

 The hazard x survival product lam_ij(y+v) S_i(y,v) is the equation's jump
 kernel f(y+v|i)/(1-F(y|i)) p_ij(y+v) written division-free, so the v->0
 limit is finite whenever lam_ij(0) is.

 The integral references phi only through the age-zero slice, so the fixed
 point problem closes on G over a (t, ln s) grid; every other point of the
 domain is one further evaluation of the right-hand side.  The operator
 contracts in the norm sup|phi/(1+s)| with constant
 J = max_i sup (F(y+T-t|i)-F(y|i))/(1-F(y|i)) < 1, giving geometric Picard
 convergence from any start.

 Discretization:
  - uniform t-grid on [0,T]; log-uniform s-grid centered on ln K,
    half-width s_width * sigma_max * sqrt(T);
  - monotone cubic interpolation across ln s per time row; below the grid
    values continue linearly through the origin, above linearly with the
    last secant slope;
  - the sojourn integral runs over t-grid offsets (composite Simpson, 3/8
    tail on odd panel counts, trapezoid for a single panel), so inner
    evaluations land on stored rows exactly; the v=0 integrand is replaced
    by its analytic limit sum_j lam_ij(y) G_j(t,s);
  - the price expectation is Gauss-Hermite in the lognormal substitution;
    on the uniform log grid every quadrature node is a constant index shift
    plus a constant fraction, which turns the inner loop into contiguous
    cubic evaluations;
  - the final sojourn panel reads the terminal row, whose payoff kink
    defeats both the cubic reconstruction and Gauss-Hermite; its lognormal
    expectation has the closed form E[(X_v - K)^+] = e^{rv} eta(tau = v),
    used whenever the input's terminal row is exactly the payoff (always
    true from the first Picard iterate onward).
*/

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "smp/black_scholes.hpp"
#include "smp/contract.hpp"
#include "smp/math/gauss_hermite.hpp"
#include "smp/math/parallel.hpp"
#include "smp/math/pchip.hpp"
#include "smp/math/quadrature.hpp"
#include "smp/regime_model.hpp"
#include "smp/solver_config.hpp"

namespace smp {

// Age-zero slice values, one flat row-major [m * n_s + n] array per regime.
using Slice = std::vector<std::vector<double>>;

enum class InitialIterate { BsPrice, Zero, Spot };

struct ContractionEstimate {
    double value = 0.0;
    bool near_unity = false; // J > 0.999: expect very slow convergence
};

// J = max_i sup over 0 <= y <= t <= T of (F(y+T-t|i)-F(y|i))/(1-F(y|i)),
// evaluated on a grid that contains the corner (t,y)=(0,0) where monotone
// hazards attain the sup, so constant-hazard models get 1-e^{-aT} exactly.
inline ContractionEstimate estimate_contraction(const RegimeModel& model, double T) {
    if (!(T > 0.0)) return {0.0, false};
    const int n = 101;
    double J = 0.0;
    for (int i = 0; i < model.k; ++i) {
        for (int a = 0; a < n; ++a) {
            const double t = T * a / (n - 1);
            const double w = T - t;
            for (int b = 0; b < n; ++b) {
                const double y = t * b / (n - 1);
                const double gap = 1.0 - model.conditional_survival(i, y, w);
                if (gap > J) J = gap;
            }
        }
    }
    return {J, J > 0.999};
}

namespace detail {

struct Grids {
    int k = 0, n_t = 0, n_s = 0;
    double T = 0.0, K = 0.0, dt = 0.0, u0 = 0.0, du = 0.0;
    std::vector<double> t, u, s;
    std::vector<double> ebelow; // exp(n * du), below-grid continuation factors

    static Grids make(const RegimeModel& model, const ContractSpec& contract,
                      const SolverConfig& cfg) {
        Grids g;
        g.k = model.k;
        g.n_t = cfg.n_t;
        g.n_s = cfg.n_s;
        g.T = contract.maturity;
        g.K = contract.strike;
        g.dt = g.T / (g.n_t - 1);
        double sig_max = 0.0;
        for (double sg : model.sigma) sig_max = std::max(sig_max, sg);
        const double half = cfg.s_width * sig_max * std::sqrt(g.T);
        const double lnk = std::log(g.K);
        g.u0 = lnk - half;
        g.du = 2.0 * half / (g.n_s - 1);
        g.t.resize(g.n_t);
        for (int m = 0; m < g.n_t; ++m) g.t[m] = g.dt * m;
        g.t[g.n_t - 1] = g.T;
        g.u.resize(g.n_s);
        g.s.resize(g.n_s);
        g.ebelow.resize(g.n_s);
        for (int n = 0; n < g.n_s; ++n) {
            g.u[n] = g.u0 + g.du * n;
            g.s[n] = std::exp(g.u[n]);
            g.ebelow[n] = std::exp(g.du * n);
        }
        return g;
    }

    // index of the grid row at time tq, or -1 when tq is off the grid
    int row_of(double tq) const {
        const double rel = tq / dt;
        const int m = static_cast<int>(std::lround(rel));
        if (m < 0 || m >= n_t) return -1;
        return std::fabs(tq - t[m]) <= 1e-9 * std::max(1.0, T) ? m : -1;
    }
};

// One time-row of one regime: cubic pieces over the log grid plus the
// extrapolation closure.  `clip` pins values into the no-arbitrage envelope
// [(x-K)^+, x] above the grid; the raw linear form is used inside the
// operator sweep, where linearity must be preserved.
struct RowEval {
    const double *c0 = nullptr, *c1 = nullptr, *c2 = nullptr, *c3 = nullptr;
    double u0 = 0, du = 0;
    int n_s = 0;
    double y_first = 0, y_last = 0, slope_s = 0;
    double s_min = 0, s_max = 0, strike = 0;

    double value(double uq, bool clip) const {
        const double rel = (uq - u0) / du;
        if (rel <= 0.0) return y_first * std::exp(uq - u0);
        const int p = static_cast<int>(rel);
        if (p >= n_s - 1) {
            const double x = std::exp(uq);
            double line = y_last + slope_s * (x - s_max);
            if (clip) line = std::clamp(line, std::max(x - strike, 0.0), x);
            return line;
        }
        const double b = rel - p;
        return ((c3[p] * b + c2[p]) * b + c1[p]) * b + c0[p];
    }

    // d/ds of value(ln s); sq = exp(uq) supplied by the caller
    double deriv_s(double uq, double sq, bool clip) const {
        const double rel = (uq - u0) / du;
        if (rel <= 0.0) return y_first / s_min;
        const int p = static_cast<int>(rel);
        if (p >= n_s - 1) {
            if (clip) {
                const double x = sq;
                const double line = y_last + slope_s * (x - s_max);
                if (line > x || line < std::max(x - strike, 0.0)) return 1.0;
            }
            return slope_s;
        }
        const double b = rel - p;
        return ((3.0 * c3[p] * b + 2.0 * c2[p]) * b + c1[p]) / (du * sq);
    }
};

// Constant-fraction shift of a Gauss-Hermite node on the uniform log grid:
// u_n + delta lands in interval n + s0 with local coordinate b for every n.
struct Shift {
    int s0 = 0;
    double b = 0, b2 = 0, b3 = 0;
    double edelta = 1.0;
};

// Everything reusable across sweeps for a fixed (model, contract, config).
class SolverTables {
public:
    Grids g;
    RegimeModel model;
    ContractSpec contract;
    SolverConfig cfg;
    GaussHermiteRule rule;
    std::vector<double> term1;             // [i][m*n_s+n] survival x eta
    std::vector<std::vector<double>> simp; // simp[M][kk], M = panel count
    std::vector<double> disc;              // [i*n_t+kk] e^{-r_i v_kk}
    std::vector<double> hz;                // [(i*k+j)*n_t+kk] lam_ij(v) e^{-Lam_i(v)}
    std::vector<double> lam0;              // [i*k+j] lam_ij(0)
    std::vector<Shift> shifts;             // [((i*(n_t-1))+(kk-1))*order+q]
    std::vector<double> payoff_row;        // [n] payoff(s_n)
    std::vector<double> eterm;             // [(i*n_t+kk)*n_s+n] e^{r_i v} eta_i(tau=v, s_n)

    SolverTables(const RegimeModel& m, const ContractSpec& c, const SolverConfig& s)
        : model(m), contract(c), cfg(s) {
        contract.require_valid();
        cfg.require_valid();
        for (int i = 0; i < model.k; ++i)
            for (int j = 0; j < model.k; ++j)
                if (model.has_hazard(i, j) &&
                    model.hazards[i][j]->family == HazardFn::Family::Weibull &&
                    model.hazards[i][j]->b < 1.0)
                    throw std::invalid_argument(
                        "solver: Weibull hazard with shape < 1 has an infinite age-zero rate; "
                        "the age-zero slice integrand is singular and unsupported");
        g = Grids::make(model, contract, cfg);
        rule = gauss_hermite(cfg.quad_order);

        const int k = g.k, n_t = g.n_t, n_s = g.n_s;
        term1.resize(static_cast<std::size_t>(k) * n_t * n_s);
        for (int i = 0; i < k; ++i) {
            const BsParams bp{model.r[i], model.sigma[i], g.K, g.T};
            for (int m = 0; m < n_t; ++m) {
                const double surv =
                    (m == n_t - 1) ? 1.0 : model.survival(i, g.T - g.t[m]);
                double* row = &term1[(static_cast<std::size_t>(i) * n_t + m) * n_s];
                if (m == n_t - 1) {
                    for (int n = 0; n < n_s; ++n) row[n] = contract.payoff(g.s[n]);
                } else {
                    for (int n = 0; n < n_s; ++n)
                        row[n] = surv * bs_call_price(bp, g.t[m], g.s[n]);
                }
            }
        }

        payoff_row.resize(n_s);
        for (int n = 0; n < n_s; ++n) payoff_row[n] = contract.payoff(g.s[n]);
        eterm.assign(static_cast<std::size_t>(k) * n_t * n_s, 0.0);
        for (int i = 0; i < k; ++i)
            for (int kk = 1; kk < n_t; ++kk) {
                const double v = g.dt * kk;
                const BsParams bq{model.r[i], model.sigma[i], g.K, v};
                const double grow = std::exp(model.r[i] * v);
                double* row = &eterm[(static_cast<std::size_t>(i) * n_t + kk) * n_s];
                for (int n = 0; n < n_s; ++n) row[n] = grow * bs_call_price(bq, 0.0, g.s[n]);
            }

        simp.resize(n_t);
        for (int M = 0; M < n_t; ++M) simp[M] = composite_simpson_weights(M, g.dt);

        disc.assign(static_cast<std::size_t>(k) * n_t, 1.0);
        hz.assign(static_cast<std::size_t>(k) * k * n_t, 0.0);
        lam0.assign(static_cast<std::size_t>(k) * k, 0.0);
        for (int i = 0; i < k; ++i) {
            for (int kk = 0; kk < n_t; ++kk)
                disc[static_cast<std::size_t>(i) * n_t + kk] =
                    std::exp(-model.r[i] * g.dt * kk);
            for (int j = 0; j < k; ++j) {
                if (!model.has_hazard(i, j)) continue;
                lam0[static_cast<std::size_t>(i) * k + j] = model.hazard_rate(i, j, 0.0);
                for (int kk = 1; kk < n_t; ++kk) {
                    const double v = g.dt * kk;
                    hz[(static_cast<std::size_t>(i) * k + j) * n_t + kk] =
                        model.hazard_rate(i, j, v) * model.survival(i, v);
                }
            }
        }

        const int order = cfg.quad_order;
        shifts.resize(static_cast<std::size_t>(k) * (n_t - 1) * order);
        for (int i = 0; i < k; ++i) {
            const double sig = model.sigma[i];
            for (int kk = 1; kk < n_t; ++kk) {
                const double v = g.dt * kk;
                const double drift = (model.r[i] - 0.5 * sig * sig) * v;
                const double volv = sig * std::sqrt(v);
                for (int q = 0; q < order; ++q) {
                    const double delta = drift + volv * rule.z[q];
                    Shift sh;
                    const double rel = delta / g.du;
                    sh.s0 = static_cast<int>(std::floor(rel));
                    sh.b = rel - sh.s0;
                    sh.b2 = sh.b * sh.b;
                    sh.b3 = sh.b2 * sh.b;
                    sh.edelta = std::exp(delta);
                    shifts[(static_cast<std::size_t>(i) * (n_t - 1) + (kk - 1)) * order + q] = sh;
                }
            }
        }
    }

    Slice initial(InitialIterate kind) const {
        Slice out(g.k, std::vector<double>(static_cast<std::size_t>(g.n_t) * g.n_s, 0.0));
        for (int i = 0; i < g.k; ++i) {
            const BsParams bp{model.r[i], model.sigma[i], g.K, g.T};
            for (int m = 0; m < g.n_t; ++m)
                for (int n = 0; n < g.n_s; ++n) {
                    double val = 0.0;
                    switch (kind) {
                        case InitialIterate::BsPrice: val = bs_call_price(bp, g.t[m], g.s[n]); break;
                        case InitialIterate::Zero: val = 0.0; break;
                        case InitialIterate::Spot: val = g.s[n]; break;
                    }
                    out[i][static_cast<std::size_t>(m) * g.n_s + n] = val;
                }
        }
        return out;
    }

    double weighted_diff(const Slice& a, const Slice& b) const {
        double worst = 0.0;
        for (int i = 0; i < g.k; ++i)
            for (int m = 0; m < g.n_t; ++m)
                for (int n = 0; n < g.n_s; ++n) {
                    const std::size_t idx = static_cast<std::size_t>(m) * g.n_s + n;
                    const double d = std::fabs(a[i][idx] - b[i][idx]) / (1.0 + g.s[n]);
                    if (d > worst) worst = d;
                }
        return worst;
    }

    // One application of the integral operator on the age-zero slice.
    void sweep(const Slice& in, Slice& out) const {
        const int k = g.k, n_t = g.n_t, n_s = g.n_s, order = cfg.quad_order;
        const int ni = n_s - 1; // intervals per row

        // cubic pieces of every input row
        std::vector<double> C0(static_cast<std::size_t>(k) * n_t * ni),
            C1(C0.size()), C2(C0.size()), C3(C0.size());
        std::vector<double> yfirst(static_cast<std::size_t>(k) * n_t),
            ylast(yfirst.size()), slope(yfirst.size());
        {
            std::vector<double> dbuf(n_s);
            for (int j = 0; j < k; ++j)
                for (int row = 0; row < n_t; ++row) {
                    const double* yv = &in[j][static_cast<std::size_t>(row) * n_s];
                    const std::size_t off = (static_cast<std::size_t>(j) * n_t + row) * ni;
                    pchip_slopes_uniform(yv, n_s, g.du, dbuf.data());
                    pchip_coeffs_uniform(yv, dbuf.data(), n_s, g.du, &C0[off], &C1[off],
                                         &C2[off], &C3[off]);
                    const std::size_t r = static_cast<std::size_t>(j) * n_t + row;
                    yfirst[r] = yv[0];
                    ylast[r] = yv[n_s - 1];
                    slope[r] = (yv[n_s - 1] - yv[n_s - 2]) / (g.s[n_s - 1] - g.s[n_s - 2]);
                }
        }

        // regimes whose input terminal row is exactly the payoff take the
        // closed-form expectation on the final panel
        std::vector<char> term_exact(k, 0);
        for (int j = 0; j < k; ++j) {
            const double* tr = &in[j][static_cast<std::size_t>(n_t - 1) * n_s];
            bool eq = true;
            for (int n = 0; n < n_s && eq; ++n) eq = tr[n] == payoff_row[n];
            term_exact[j] = eq ? 1 : 0;
        }

        out.resize(k);
        for (int i = 0; i < k; ++i) {
            out[i].resize(static_cast<std::size_t>(n_t) * n_s);
            std::copy(term1.begin() + static_cast<std::size_t>(i) * n_t * n_s,
                      term1.begin() + static_cast<std::size_t>(i + 1) * n_t * n_s,
                      out[i].begin());
        }

        // Accumulation order per output node is (v=0 term, then kk ascending,
        // j, q) regardless of the worker partition over m.
        parallel_for_blocks(n_t, cfg.workers, [&](int, long mlo, long mhi) {
            for (int i = 0; i < k; ++i) {
                for (long m = mlo; m < mhi; ++m) {
                    const int M = n_t - 1 - static_cast<int>(m);
                    if (M < 1) continue;
                    const double w0 = simp[M][0];
                    double* outrow = &out[i][static_cast<std::size_t>(m) * n_s];
                    for (int j = 0; j < k; ++j) {
                        if (j == i) continue;
                        const double c = w0 * lam0[static_cast<std::size_t>(i) * k + j];
                        if (c == 0.0) continue;
                        const double* inrow = &in[j][static_cast<std::size_t>(m) * n_s];
                        for (int n = 0; n < n_s; ++n) outrow[n] += c * inrow[n];
                    }
                }
                for (int kk = 1; kk < n_t; ++kk) {
                    const double dsc = disc[static_cast<std::size_t>(i) * n_t + kk];
                    const Shift* shrow =
                        &shifts[(static_cast<std::size_t>(i) * (n_t - 1) + (kk - 1)) * order];
                    const long mtop = std::min<long>(mhi, n_t - kk);
                    for (long m = mlo; m < mtop; ++m) {
                        const int M = n_t - 1 - static_cast<int>(m);
                        const double wv = simp[M][kk];
                        const int row = static_cast<int>(m) + kk;
                        double* outrow = &out[i][static_cast<std::size_t>(m) * n_s];
                        for (int j = 0; j < k; ++j) {
                            if (j == i) continue;
                            const double whz =
                                hz[(static_cast<std::size_t>(i) * k + j) * n_t + kk];
                            if (whz == 0.0) continue;
                            const double cw = wv * dsc * whz;
                            if (row == n_t - 1 && term_exact[j]) {
                                const double* Et =
                                    &eterm[(static_cast<std::size_t>(i) * n_t + kk) * n_s];
                                for (int n = 0; n < n_s; ++n) outrow[n] += cw * Et[n];
                                continue;
                            }
                            const std::size_t r = static_cast<std::size_t>(j) * n_t + row;
                            const std::size_t off = r * ni;
                            const double yl = ylast[r], sl = slope[r], yf = yfirst[r];
                            for (int q = 0; q < order; ++q) {
                                const Shift& sh = shrow[q];
                                const double c = cw * rule.w[q];
                                const int nlo = std::clamp(-sh.s0, 0, n_s);
                                const int nhi = std::clamp(ni - 1 - sh.s0, -1, n_s - 1);
                                if (nlo > 0) {
                                    const double fb = c * yf * sh.edelta;
                                    for (int n = 0; n < nlo; ++n)
                                        outrow[n] += fb * g.ebelow[n];
                                }
                                if (nlo <= nhi) {
                                    const double b = sh.b, b2 = sh.b2, b3 = sh.b3;
                                    const double* p0 = &C0[off] + sh.s0;
                                    const double* p1 = &C1[off] + sh.s0;
                                    const double* p2 = &C2[off] + sh.s0;
                                    const double* p3 = &C3[off] + sh.s0;
                                    for (int n = nlo; n <= nhi; ++n)
                                        outrow[n] +=
                                            c * (p0[n] + b * p1[n] + b2 * p2[n] + b3 * p3[n]);
                                }
                                for (int n = std::max(nhi + 1, 0); n < n_s; ++n) {
                                    const double x = g.s[n] * sh.edelta;
                                    outrow[n] += c * (yl + sl * (x - g.s[n_s - 1]));
                                }
                            }
                        }
                    }
                }
            }
        });
    }
};

} // namespace detail

enum class EvalKind { Value, Delta };

// Solved age-zero slice plus the machinery to evaluate the price (and its
// spot derivative) anywhere in the domain 0 <= y <= t <= T, s > 0.
// Immutable after construction; safe to share across threads.
class PriceSurface {
public:
    RegimeModel model;
    ContractSpec contract;
    SolverConfig config;
    detail::Grids grids;
    Slice G;

    int iterations = 0;
    double final_residual = 0.0;
    ContractionEstimate contraction;
    std::vector<double> step_norms; // ||G^n - G^{n-1}||_w per iteration
    double max_ratio = 0.0;         // worst successive-step ratio from n >= 2

    const std::vector<double>& t_grid() const { return grids.t; }
    const std::vector<double>& u_grid() const { return grids.u; }
    const std::vector<double>& s_grid() const { return grids.s; }

    double node(int i, int m, int n) const {
        return G[i][static_cast<std::size_t>(m) * grids.n_s + n];
    }

    // Interpolated age-zero slice along stored time row m; u = ln s.
    // Callers must keep m within the grid.
    double slice_value(int i, int m, double u, bool clip = true) const {
        return stored_row(i, m).value(u, clip);
    }
    double slice_deriv_s(int i, int m, double u, double s, bool clip = true) const {
        return stored_row(i, m).deriv_s(u, s, clip);
    }

    // Row view for bulk evaluation; valid while the surface is alive.
    detail::RowEval row_view(int i, int m) const { return stored_row(i, m); }

    // Builds the evaluation tables from G; called by solve() and by loaders.
    void finalize() {
        const int k = grids.k, n_t = grids.n_t, n_s = grids.n_s;
        const int ni = n_s - 1;
        rc0_.resize(static_cast<std::size_t>(k) * n_t * ni);
        rc1_.resize(rc0_.size());
        rc2_.resize(rc0_.size());
        rc3_.resize(rc0_.size());
        ryf_.resize(static_cast<std::size_t>(k) * n_t);
        ryl_.resize(ryf_.size());
        rsl_.resize(ryf_.size());
        std::vector<double> dbuf(n_s);
        for (int i = 0; i < k; ++i)
            for (int m = 0; m < n_t; ++m) {
                const double* yv = &G[i][static_cast<std::size_t>(m) * n_s];
                const std::size_t off = (static_cast<std::size_t>(i) * n_t + m) * ni;
                detail::pchip_slopes_uniform(yv, n_s, grids.du, dbuf.data());
                detail::pchip_coeffs_uniform(yv, dbuf.data(), n_s, grids.du, &rc0_[off],
                                             &rc1_[off], &rc2_[off], &rc3_[off]);
                const std::size_t r = static_cast<std::size_t>(i) * n_t + m;
                ryf_[r] = yv[0];
                ryl_[r] = yv[n_s - 1];
                rsl_[r] = (yv[n_s - 1] - yv[n_s - 2]) / (grids.s[n_s - 1] - grids.s[n_s - 2]);
            }

        // time-direction cubics per (regime, s-node) column, for off-grid t
        const int nt_i = n_t - 1;
        tc0_.resize(static_cast<std::size_t>(k) * n_s * nt_i);
        tc1_.resize(tc0_.size());
        tc2_.resize(tc0_.size());
        tc3_.resize(tc0_.size());
        std::vector<double> col(n_t), dcol(n_t);
        for (int i = 0; i < k; ++i)
            for (int n = 0; n < n_s; ++n) {
                for (int m = 0; m < n_t; ++m)
                    col[m] = G[i][static_cast<std::size_t>(m) * n_s + n];
                const std::size_t off = (static_cast<std::size_t>(i) * n_s + n) * nt_i;
                detail::pchip_slopes_uniform(col.data(), n_t, grids.dt, dcol.data());
                detail::pchip_coeffs_uniform(col.data(), dcol.data(), n_t, grids.dt,
                                             &tc0_[off], &tc1_[off], &tc2_[off], &tc3_[off]);
            }
        finalized_ = true;
    }

    // Shared evaluation core: the equation's right-hand side at one point,
    // producing the price (Value) or its spot derivative (Delta).
    double evaluate_rhs(double tq, double sq, int i, double yq, EvalKind kind) const {
        require_point(tq, sq, i, yq);
        const double T = grids.T, K = grids.K;
        const double teps = 1e-12 * std::max(1.0, T);
        const double t = std::clamp(tq, 0.0, T);
        const double y = std::clamp(yq, 0.0, t);
        const double ttm = T - t;
        if (ttm <= teps)
            return kind == EvalKind::Value ? contract.payoff(sq) : (sq >= K ? 1.0 : 0.0);

        const int m = grids.row_of(t);
        if (kind == EvalKind::Value && y <= 1e-15 && m >= 0)
            return stored_row(i, m).value(std::log(sq), true);

        const double uq = std::log(sq);
        const double lam_y = model.cumulative_hazard(i, y);
        const BsParams bp{model.r[i], model.sigma[i], K, T};
        const double ratio = std::exp(-(model.cumulative_hazard(i, y + ttm) - lam_y));
        double acc = ratio * (kind == EvalKind::Value ? bs_call_price(bp, t, sq)
                                                      : bs_call_delta(bp, t, sq));

        int M;
        double hv;
        const bool on_grid = (m >= 0);
        if (on_grid) {
            M = grids.n_t - 1 - m;
            hv = grids.dt;
        } else {
            const double dens = config.v_rule > 0.0 ? config.v_rule : (grids.n_t - 1) / T;
            M = std::max(2, 2 * static_cast<int>(std::ceil(0.5 * dens * ttm)));
            hv = ttm / M;
        }
        const std::vector<double> wts = composite_simpson_weights(M, hv);
        const GaussHermiteRule& rule = gauss_hermite(config.quad_order);
        const double sig = model.sigma[i], ri = model.r[i];

        BlendBuf buf;
        for (int kk = 0; kk <= M; ++kk) {
            const double v = hv * kk;
            const double wv = wts[kk];
            if (kk == 0) {
                double inner = 0.0;
                for (int j = 0; j < grids.k; ++j) {
                    if (j == i || !model.has_hazard(i, j)) continue;
                    const double lam = model.hazard_rate(i, j, y);
                    const detail::RowEval rj = row_at(j, t, on_grid ? m : -1, buf);
                    inner += lam * (kind == EvalKind::Value ? rj.value(uq, true)
                                                            : rj.deriv_s(uq, sq, true));
                }
                acc += wv * inner;
                continue;
            }
            const double tv = t + v;
            const double dsc = std::exp(-ri * v);
            const double drift = (ri - 0.5 * sig * sig) * v;
            const double volv = sig * std::sqrt(v);
            const double surv = std::exp(-(model.cumulative_hazard(i, y + v) - lam_y));
            if (kk == M) {
                // final panel reads the terminal row, which is the payoff by
                // construction; its lognormal expectation is closed-form
                const BsParams bq{ri, sig, K, v};
                const double e = std::exp(ri * v) * (kind == EvalKind::Value
                                                         ? bs_call_price(bq, 0.0, sq)
                                                         : bs_call_delta(bq, 0.0, sq));
                for (int j = 0; j < grids.k; ++j) {
                    if (j == i || !model.has_hazard(i, j)) continue;
                    const double whz = model.hazard_rate(i, j, y + v) * surv;
                    acc += wv * dsc * whz * e;
                }
                continue;
            }
            const int mrow = on_grid ? m + kk : grids.row_of(tv);
            for (int j = 0; j < grids.k; ++j) {
                if (j == i || !model.has_hazard(i, j)) continue;
                const double whz = model.hazard_rate(i, j, y + v) * surv;
                const detail::RowEval rj = row_at(j, tv, mrow, buf);
                double e = 0.0;
                if (kind == EvalKind::Value) {
                    for (int q = 0; q < config.quad_order; ++q)
                        e += rule.w[q] * rj.value(uq + drift + volv * rule.z[q], true);
                } else {
                    for (int q = 0; q < config.quad_order; ++q)
                        e += rule.w[q] * rule.z[q] *
                             rj.value(uq + drift + volv * rule.z[q], true);
                    e /= sq * volv;
                }
                acc += wv * dsc * whz * e;
            }
        }
        return acc;
    }

    double value(double t, double s, int i, double y) const {
        return evaluate_rhs(t, s, i, y, EvalKind::Value);
    }

private:
    struct BlendBuf {
        std::vector<double> vals, d, c0, c1, c2, c3;
    };

    detail::RowEval stored_row(int i, int m) const {
        const int ni = grids.n_s - 1;
        const std::size_t off = (static_cast<std::size_t>(i) * grids.n_t + m) * ni;
        const std::size_t r = static_cast<std::size_t>(i) * grids.n_t + m;
        detail::RowEval row;
        row.c0 = &rc0_[off];
        row.c1 = &rc1_[off];
        row.c2 = &rc2_[off];
        row.c3 = &rc3_[off];
        row.u0 = grids.u0;
        row.du = grids.du;
        row.n_s = grids.n_s;
        row.y_first = ryf_[r];
        row.y_last = ryl_[r];
        row.slope_s = rsl_[r];
        row.s_min = grids.s[0];
        row.s_max = grids.s[grids.n_s - 1];
        row.strike = grids.K;
        return row;
    }

    // Row at arbitrary time: stored when tv sits on the grid, otherwise a
    // fresh monotone cubic over the time-blended column values.
    detail::RowEval row_at(int j, double tv, int mrow, BlendBuf& buf) const {
        if (mrow >= 0) return stored_row(j, mrow);
        const int n_s = grids.n_s, nt_i = grids.n_t - 1;
        const double rel = std::clamp((tv - 0.0) / grids.dt, 0.0, double(nt_i));
        int mi = std::min(static_cast<int>(rel), nt_i - 1);
        const double b = rel - mi;
        buf.vals.resize(n_s);
        for (int n = 0; n < n_s; ++n) {
            const std::size_t off = (static_cast<std::size_t>(j) * n_s + n) * nt_i + mi;
            buf.vals[n] =
                ((tc3_[off] * b + tc2_[off]) * b + tc1_[off]) * b + tc0_[off];
        }
        buf.d.resize(n_s);
        const int ni = n_s - 1;
        buf.c0.resize(ni);
        buf.c1.resize(ni);
        buf.c2.resize(ni);
        buf.c3.resize(ni);
        detail::pchip_slopes_uniform(buf.vals.data(), n_s, grids.du, buf.d.data());
        detail::pchip_coeffs_uniform(buf.vals.data(), buf.d.data(), n_s, grids.du,
                                     buf.c0.data(), buf.c1.data(), buf.c2.data(),
                                     buf.c3.data());
        detail::RowEval row;
        row.c0 = buf.c0.data();
        row.c1 = buf.c1.data();
        row.c2 = buf.c2.data();
        row.c3 = buf.c3.data();
        row.u0 = grids.u0;
        row.du = grids.du;
        row.n_s = n_s;
        row.y_first = buf.vals[0];
        row.y_last = buf.vals[n_s - 1];
        row.slope_s = (buf.vals[n_s - 1] - buf.vals[n_s - 2]) /
                      (grids.s[n_s - 1] - grids.s[n_s - 2]);
        row.s_min = grids.s[0];
        row.s_max = grids.s[n_s - 1];
        row.strike = grids.K;
        return row;
    }

    void require_point(double tq, double sq, int i, double yq) const {
        if (!finalized_) throw std::logic_error("PriceSurface: finalize() not called");
        if (i < 0 || i >= grids.k) throw std::out_of_range("regime index out of range");
        if (!(sq > 0.0)) throw std::domain_error("evaluation point: s must be positive");
        const double teps = 1e-12 * std::max(1.0, grids.T);
        if (tq < -teps || tq > grids.T + teps)
            throw std::domain_error("evaluation point: t outside [0, T]");
        if (yq < -teps || yq > tq + teps)
            throw std::domain_error("evaluation point: y outside [0, t]");
    }

    std::vector<double> rc0_, rc1_, rc2_, rc3_, ryf_, ryl_, rsl_;
    std::vector<double> tc0_, tc1_, tc2_, tc3_;
    bool finalized_ = false;
};

// Eq. (34) right-hand side at one point, using the solved age-zero slice.
inline double price_at(const PriceSurface& surface, double t, double s, int i, double y) {
    return surface.evaluate_rhs(t, s, i, y, EvalKind::Value);
}

// One application of the operator on externally supplied slice values.
inline Slice apply_pricing_operator(const RegimeModel& model, const ContractSpec& contract,
                                    const SolverConfig& config, const Slice& in) {
    const detail::SolverTables tab(model, contract, config);
    if (static_cast<int>(in.size()) != model.k)
        throw std::invalid_argument("apply_pricing_operator: slice regime count mismatch");
    for (const auto& plane : in)
        if (plane.size() != static_cast<std::size_t>(config.n_t) * config.n_s)
            throw std::invalid_argument("apply_pricing_operator: slice grid size mismatch");
    Slice out;
    tab.sweep(in, out);
    return out;
}

inline PriceSurface solve(const RegimeModel& model, const ContractSpec& contract,
                          const SolverConfig& config,
                          InitialIterate start = InitialIterate::BsPrice) {
    const ValidationReport rep = model.validate();
    if (!rep.ok())
        throw std::invalid_argument("solve: invalid model: " + rep.issues[0].key + ": " +
                                    rep.issues[0].message);
    const detail::SolverTables tab(model, contract, config);
    const ContractionEstimate ce = estimate_contraction(model, contract.maturity);

    int max_iter = config.max_iter;
    if (max_iter <= 0) {
        if (ce.value >= 0.9999) {
            max_iter = 5000;
        } else if (ce.value <= 0.0) {
            max_iter = 10;
        } else {
            max_iter =
                static_cast<int>(std::ceil(std::log(config.tol) / std::log(ce.value))) + 10;
        }
    }

    Slice cur = tab.initial(start), next;
    std::vector<double> norms;
    int used = 0;
    bool converged = false;
    for (int n = 1; n <= max_iter; ++n) {
        tab.sweep(cur, next);
        const double d = tab.weighted_diff(next, cur);
        norms.push_back(d);
        cur.swap(next);
        used = n;
        if (d < config.tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw std::runtime_error(
            "solve: no convergence in " + std::to_string(max_iter) + " iterations; J=" +
            std::to_string(ce.value) + ", residual=" + std::to_string(norms.back()));

    // envelope check and clip: breaches beyond the tolerance are defects
    const detail::Grids& g = tab.g;
    for (int i = 0; i < g.k; ++i)
        for (int m = 0; m < g.n_t; ++m)
            for (int n = 0; n < g.n_s; ++n) {
                const std::size_t idx = static_cast<std::size_t>(m) * g.n_s + n;
                const double lo = contract.payoff(g.s[n]);
                const double hi = g.s[n];
                const double slack = 1e-9 * (1.0 + g.s[n]);
                double& val = cur[i][idx];
                if (val < lo - slack || val > hi + slack)
                    throw std::runtime_error("solve: price bounds violated beyond tolerance");
                val = std::clamp(val, lo, hi);
            }

    PriceSurface out;
    out.model = model;
    out.contract = contract;
    out.config = config;
    out.grids = g;
    out.G = std::move(cur);
    out.iterations = used;
    out.final_residual = norms.back();
    out.contraction = ce;
    out.step_norms = norms;
    for (std::size_t n = 1; n < norms.size(); ++n)
        if (norms[n - 1] > 0.0)
            out.max_ratio = std::max(out.max_ratio, norms[n] / norms[n - 1]);
    out.finalize();
    return out;
}

// Left-minus-right side of the pricing system's parabolic equation with
// central stencils of price_at; the non-local coupling reads the age-zero
// slice directly.
inline double pde_residual(const PriceSurface& surface, double t, double s, int i, double y,
                           double h_t, double h_s, double h_y) {
    const double T = surface.grids.T;
    if (!(h_t > 0.0 && h_s > 0.0 && h_y > 0.0))
        throw std::invalid_argument("pde_residual: step sizes must be positive");
    if (t - h_t < 0.0 || t + h_t > T || y - h_y < 0.0 || y + h_y > t || y > t - h_t ||
        s - h_s <= 0.0)
        throw std::domain_error("pde_residual: stencil leaves the domain");

    auto P = [&surface](double tt, double ss, int jj, double yy) {
        return price_at(surface, tt, ss, jj, yy);
    };
    const double phi = P(t, s, i, y);
    const double phi_t = (P(t + h_t, s, i, y) - P(t - h_t, s, i, y)) / (2.0 * h_t);
    const double phi_y = (P(t, s, i, y + h_y) - P(t, s, i, y - h_y)) / (2.0 * h_y);
    const double phi_s = (P(t, s + h_s, i, y) - P(t, s - h_s, i, y)) / (2.0 * h_s);
    const double phi_ss =
        (P(t, s + h_s, i, y) - 2.0 * phi + P(t, s - h_s, i, y)) / (h_s * h_s);
    double nonlocal = 0.0;
    for (int j = 0; j < surface.model.k; ++j) {
        if (j == i || !surface.model.has_hazard(i, j)) continue;
        nonlocal += surface.model.hazard_rate(i, j, y) * (P(t, s, j, 0.0) - phi);
    }
    const double ri = surface.model.r[i];
    const double sg = surface.model.sigma[i];
    return phi_t + phi_y + ri * s * phi_s + 0.5 * sg * sg * s * s * phi_ss + nonlocal -
           ri * phi;
}

} // namespace smp
