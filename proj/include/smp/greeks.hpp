#pragma once

/*
 Hedging delta of the regime-switching call.

 Differentiating the pricing equation's right-hand side in s moves the
 derivative onto known pieces: the leading term becomes the single-regime
 Black-Scholes delta, and inside the sojourn integral the lognormal kernel
 differentiates to itself times z/(s sigma sqrt(v)), so

   psi(t,s,i,y) = S_i(y,T-t) Delta_BS,i(t,s)
                + int_0^{T-t} e^{-r_i v} S_i(y,v) sum_j lam_ij(y+v)
                    E[ G_j(t+v, X_v) Z ] / (s sig_i sqrt(v)) dv.

 No differentiation of the solved slice is needed except in the v=0 limit
 term, where the integrand is sum_j lam_ij(y) dG_j/ds directly.

 delta_integral evaluates this representation point by point.  DeltaTable
 precomputes it on the full (t, age, ln s, regime) lattice so a hedging
 simulation can query millions of deltas cheaply; queries interpolate
 bilinearly in (t, y) and with the same monotone cubic as the price surface
 in ln s.
*/

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "smp/black_scholes.hpp"
#include "smp/math/gauss_hermite.hpp"
#include "smp/math/pchip.hpp"
#include "smp/math/quadrature.hpp"
#include "smp/volterra.hpp"

namespace smp {

// Integral representation of the spot derivative; exact up to quadrature.
inline double delta_integral(const PriceSurface& surface, double t, double s, int i,
                             double y) {
    return surface.evaluate_rhs(t, s, i, y, EvalKind::Delta);
}

// Central-difference check value; h <= 0 selects 1e-4 * s.  The h and h/2
// estimates are compared, and on disagreement beyond 10% the Richardson
// combination is returned instead (the point sits near a kink or seam).
inline double delta_fd(const PriceSurface& surface, double t, double s, int i, double y,
                       double h = 0.0) {
    if (h <= 0.0) h = 1e-4 * s;
    auto central = [&](double hh) {
        return (price_at(surface, t, s + hh, i, y) - price_at(surface, t, s - hh, i, y)) /
               (2.0 * hh);
    };
    const double d1 = central(h);
    const double d2 = central(0.5 * h);
    if (std::fabs(d1 - d2) > 0.1 * std::max(std::fabs(d1), std::fabs(d2)))
        return (4.0 * d2 - d1) / 3.0;
    return d1;
}

struct HedgePosition {
    double shares = 0.0; // stock units held
    double bond = 0.0;   // money-market account units
};

// Replicating position at one point: shares = psi, and bond units chosen so
// that bond * account_value + shares * s reproduces the price exactly.
// account_value is the accumulated money-market value e^{int_0^t r} along
// the evaluation path (1 at t = 0).
inline HedgePosition hedge_position(const PriceSurface& surface, double t, double s, int i,
                                    double y, double account_value = 1.0) {
    if (!(account_value > 0.0))
        throw std::domain_error("hedge_position: account_value must be positive");
    const double sh = delta_integral(surface, t, s, i, y);
    const double ph = price_at(surface, t, s, i, y);
    return {sh, (ph - sh * s) / account_value};
}

// Tabulated delta on the lattice (t_m, y_l = l dt with l <= m, u_n, regime).
// Assembly shares the v-panel structure of the solver, so table nodes agree
// with delta_integral to floating-point roundoff.  Queries clamp ln s into
// the grid and y into [0, t].  Memory is k * n_t(n_t+1)/2 * n_s doubles
// (about 17 MB at the default grid sizes).  Holds a pointer to the surface;
// the surface must outlive the table.
class DeltaTable {
public:
    explicit DeltaTable(const PriceSurface& surface) : surf_(&surface) {
        const detail::Grids& g = surface.grids;
        const RegimeModel& model = surface.model;
        k_ = g.k;
        n_t_ = g.n_t;
        n_s_ = g.n_s;
        dt_ = g.dt;
        du_ = g.du;
        u0_ = g.u0;
        T_ = g.T;
        tri_ = static_cast<std::size_t>(n_t_) * (n_t_ + 1) / 2;
        psi_.assign(static_cast<std::size_t>(k_) * tri_ * n_s_, 0.0);

        // age-grid hazard tables
        std::vector<double> lam(static_cast<std::size_t>(k_) * k_ * n_t_, 0.0);
        std::vector<double> cum(static_cast<std::size_t>(k_) * n_t_, 0.0);
        for (int i = 0; i < k_; ++i) {
            for (int gdx = 0; gdx < n_t_; ++gdx)
                cum[static_cast<std::size_t>(i) * n_t_ + gdx] =
                    model.cumulative_hazard(i, g.t[gdx]);
            for (int j = 0; j < k_; ++j) {
                if (!model.has_hazard(i, j)) continue;
                for (int gdx = 0; gdx < n_t_; ++gdx)
                    lam[(static_cast<std::size_t>(i) * k_ + j) * n_t_ + gdx] =
                        model.hazard_rate(i, j, g.t[gdx]);
            }
        }
        // whz[(i*k+j)*n_t*n_t + kk*n_t + l] = lam_ij(y_l + v_kk) S_i(y_l, v_kk)
        std::vector<double> whz(static_cast<std::size_t>(k_) * k_ * n_t_ * n_t_, 0.0);
        for (int i = 0; i < k_; ++i)
            for (int j = 0; j < k_; ++j) {
                if (j == i || !model.has_hazard(i, j)) continue;
                for (int kk = 1; kk < n_t_; ++kk)
                    for (int l = 0; l + kk < n_t_; ++l) {
                        const std::size_t ij = static_cast<std::size_t>(i) * k_ + j;
                        whz[ij * n_t_ * n_t_ + static_cast<std::size_t>(kk) * n_t_ + l] =
                            lam[ij * n_t_ + l + kk] *
                            std::exp(-(cum[static_cast<std::size_t>(i) * n_t_ + l + kk] -
                                       cum[static_cast<std::size_t>(i) * n_t_ + l]));
                    }
            }

        std::vector<std::vector<double>> simp(n_t_);
        for (int M = 0; M < n_t_; ++M) simp[M] = composite_simpson_weights(M, dt_);
        const GaussHermiteRule& rule = gauss_hermite(surface.config.quad_order);
        const int order = surface.config.quad_order;

        std::vector<double> rowbuf(n_s_);
        // leading term: conditional survival x Black-Scholes delta
        for (int i = 0; i < k_; ++i) {
            const BsParams bp{model.r[i], model.sigma[i], g.K, g.T};
            for (int m = 0; m < n_t_; ++m) {
                if (m == n_t_ - 1) {
                    for (int n = 0; n < n_s_; ++n)
                        rowbuf[n] = g.s[n] >= g.K ? 1.0 : 0.0;
                } else {
                    for (int n = 0; n < n_s_; ++n)
                        rowbuf[n] = bs_call_delta(bp, g.t[m], g.s[n]);
                }
                const int steps = n_t_ - 1 - m;
                for (int l = 0; l <= m; ++l) {
                    const double ratio =
                        (m == n_t_ - 1)
                            ? 1.0
                            : std::exp(-(cum[static_cast<std::size_t>(i) * n_t_ + l + steps] -
                                         cum[static_cast<std::size_t>(i) * n_t_ + l]));
                    double* out = row(i, m, l);
                    for (int n = 0; n < n_s_; ++n) out[n] += ratio * rowbuf[n];
                }
            }
        }
        // v = 0 limit term
        for (int i = 0; i < k_; ++i)
            for (int m = 0; m + 1 < n_t_; ++m) {
                const double w0 = simp[n_t_ - 1 - m][0];
                for (int j = 0; j < k_; ++j) {
                    if (j == i || !model.has_hazard(i, j)) continue;
                    const detail::RowEval rj = surface.row_view(j, m);
                    for (int n = 0; n < n_s_; ++n)
                        rowbuf[n] = rj.deriv_s(g.u[n], g.s[n], true);
                    for (int l = 0; l <= m; ++l) {
                        const double c =
                            w0 * lam[(static_cast<std::size_t>(i) * k_ + j) * n_t_ + l];
                        if (c == 0.0) continue;
                        double* out = row(i, m, l);
                        for (int n = 0; n < n_s_; ++n) out[n] += c * rowbuf[n];
                    }
                }
            }
        // sojourn integral, v = kk dt panels; the inner expectation against
        // Z depends on (i, j, kk, m) only, so it is shared across ages l
        for (int i = 0; i < k_; ++i) {
            const double sig = model.sigma[i], ri = model.r[i];
            for (int j = 0; j < k_; ++j) {
                if (j == i || !model.has_hazard(i, j)) continue;
                const std::size_t ij = static_cast<std::size_t>(i) * k_ + j;
                for (int kk = 1; kk < n_t_; ++kk) {
                    const double v = dt_ * kk;
                    const double dsc = std::exp(-ri * v);
                    const double drift = (ri - 0.5 * sig * sig) * v;
                    const double volv = sig * std::sqrt(v);
                    for (int rowp = kk; rowp < n_t_; ++rowp) {
                        const int m = rowp - kk;
                        const double wv = simp[n_t_ - 1 - m][kk];
                        if (rowp == n_t_ - 1) {
                            // terminal row is the payoff: E[payoff(X_v) Z] /
                            // (s sig sqrt(v)) reduces to e^{rv} Delta_BS(tau=v)
                            const BsParams bq{ri, sig, g.K, v};
                            const double grow = std::exp(ri * v);
                            for (int n = 0; n < n_s_; ++n)
                                rowbuf[n] = grow * bs_call_delta(bq, 0.0, g.s[n]);
                        } else {
                            const detail::RowEval rj = surf_->row_view(j, rowp);
                            for (int n = 0; n < n_s_; ++n) {
                                const double ud = g.u[n] + drift;
                                double e = 0.0;
                                for (int q = 0; q < order; ++q)
                                    e += rule.w[q] * rule.z[q] *
                                         rj.value(ud + volv * rule.z[q], true);
                                e /= g.s[n] * volv;
                                rowbuf[n] = e;
                            }
                        }
                        for (int l = 0; l <= m; ++l) {
                            const double cc =
                                wv * dsc *
                                whz[ij * n_t_ * n_t_ + static_cast<std::size_t>(kk) * n_t_ +
                                    l];
                            if (cc == 0.0) continue;
                            double* out = row(i, m, l);
                            for (int n = 0; n < n_s_; ++n) out[n] += cc * rowbuf[n];
                        }
                    }
                }
            }
        }
    }

    // Interpolated delta; clamps s into the grid span and y into [0, t].
    double delta(double t, double s, int i, double y) const {
        if (i < 0 || i >= k_) throw std::out_of_range("DeltaTable: regime index");
        if (!(s > 0.0)) throw std::domain_error("DeltaTable: s must be positive");
        const double teps = 1e-12 * std::max(1.0, T_);
        if (t < -teps || t > T_ + teps)
            throw std::domain_error("DeltaTable: t outside [0, T]");
        t = std::clamp(t, 0.0, T_);
        y = std::clamp(y, 0.0, t);

        const double umax = u0_ + du_ * (n_s_ - 1);
        const double u = std::clamp(std::log(s), u0_, umax);
        const double relu = (u - u0_) / du_;
        const int p = std::clamp(static_cast<int>(relu), 0, n_s_ - 2);
        const double b = relu - p;

        const double a = t / dt_;
        const int m = std::min(static_cast<int>(a), n_t_ - 2);
        const double at = a - m;
        const double c = y / dt_;
        const int l0 = static_cast<int>(c);
        const double cb = c - l0;

        double vals[2];
        for (int rr = 0; rr < 2; ++rr) {
            const int mr = m + rr;
            const int la = std::min(l0, mr);
            const int lb = std::min(l0 + 1, mr);
            const double va = rowval(i, mr, la, p, b);
            const double vb = (lb == la) ? va : rowval(i, mr, lb, p, b);
            vals[rr] = va + cb * (vb - va);
        }
        return vals[0] + at * (vals[1] - vals[0]);
    }

    int n_t() const { return n_t_; }
    int n_s() const { return n_s_; }

    // Raw node value psi(t_m, y = l dt, s_n, i); l <= m required.
    double node(int i, int m, int l, int n) const {
        return psi_[(static_cast<std::size_t>(i) * tri_ + trow(m) + l) * n_s_ + n];
    }

private:
    static std::size_t trow(int m) { return static_cast<std::size_t>(m) * (m + 1) / 2; }

    double* row(int i, int m, int l) {
        return &psi_[(static_cast<std::size_t>(i) * tri_ + trow(m) + l) * n_s_];
    }

    // Monotone cubic in u over one table row; Fritsch-Carlson slopes are
    // local, so this reproduces the full interpolant from four node values.
    double rowval(int i, int m, int l, int p, double b) const {
        const double* Y = &psi_[(static_cast<std::size_t>(i) * tri_ + trow(m) + l) * n_s_];
        const double inv = 1.0 / du_;
        const double sp = (Y[p + 1] - Y[p]) * inv;
        double dp, dp1;
        if (p == 0)
            dp = detail::pchip_edge_slope(sp, (Y[2] - Y[1]) * inv);
        else
            dp = detail::pchip_interior_slope((Y[p] - Y[p - 1]) * inv, sp);
        if (p == n_s_ - 2)
            dp1 = detail::pchip_edge_slope((Y[n_s_ - 1] - Y[n_s_ - 2]) * inv,
                                           (Y[n_s_ - 2] - Y[n_s_ - 3]) * inv);
        else
            dp1 = detail::pchip_interior_slope(sp, (Y[p + 2] - Y[p + 1]) * inv);
        const double dy = Y[p + 1] - Y[p];
        const double c1 = du_ * dp;
        const double c2 = 3.0 * dy - du_ * (2.0 * dp + dp1);
        const double c3 = -2.0 * dy + du_ * (dp + dp1);
        return ((c3 * b + c2) * b + c1) * b + Y[p];
    }

    const PriceSurface* surf_;
    int k_ = 0, n_t_ = 0, n_s_ = 0;
    double dt_ = 0, du_ = 0, u0_ = 0, T_ = 0;
    std::size_t tri_ = 0;
    std::vector<double> psi_;
};

} // namespace smp
