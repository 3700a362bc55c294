#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "smp/math/normal.hpp"

namespace smp {

struct BsParams {
    double r = 0.0;     // nonnegative rate
    double sigma = 0.0; // positive volatility
    double strike = 0.0;
    double maturity = 0.0;
};

// European call under constant coefficients; the per-regime building block of
// the regime-switching price.  Handles the degenerate edges explicitly:
// t = T returns the payoff, K = 0 collapses to the stock itself.
inline double bs_call_price(const BsParams& p, double t, double s) {
    if (!(s > 0.0)) throw std::domain_error("bs_call_price: s must be positive");
    const double ttm = p.maturity - t;
    if (p.strike == 0.0) return s;
    if (ttm <= 0.0) return std::max(s - p.strike, 0.0);
    const double vol = p.sigma * std::sqrt(ttm);
    const double d1 = (std::log(s / p.strike) + (p.r + 0.5 * p.sigma * p.sigma) * ttm) / vol;
    const double d2 = d1 - vol;
    return s * norm_cdf(d1) - p.strike * std::exp(-p.r * ttm) * norm_cdf(d2);
}

// Call delta, in [0,1].  At t = T the payoff slope jumps at the strike; the
// value there is taken as 1 (right-continuous), matching the convention used
// by the delta integral's terminal factor.
inline double bs_call_delta(const BsParams& p, double t, double s) {
    if (!(s > 0.0)) throw std::domain_error("bs_call_delta: s must be positive");
    const double ttm = p.maturity - t;
    if (p.strike == 0.0) return 1.0;
    if (ttm <= 0.0) return s >= p.strike ? 1.0 : 0.0;
    const double vol = p.sigma * std::sqrt(ttm);
    const double d1 = (std::log(s / p.strike) + (p.r + 0.5 * p.sigma * p.sigma) * ttm) / vol;
    return norm_cdf(d1);
}

} // namespace smp
