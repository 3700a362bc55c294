#pragma once

#include <cmath>
#include <stdexcept>

#include "smp/math/gauss_hermite.hpp"
#include "smp/math/normal.hpp"

namespace smp {

// Transition kernel of a GBM segment with rate r and volatility sigma over an
// elapsed time v: the price moves from s to a lognormal x with density
//   alpha(x) = exp(-z(x)^2/2) / (sqrt(2 pi) x sigma sqrt(v)),
// where z is the standardized log return
//   z(x) = (ln(x/s) - (r - sigma^2/2) v) / (sigma sqrt(v)).

inline double lognormal_zscore(double x, double s, double r, double sigma, double v) {
    if (!(x > 0.0 && s > 0.0 && v > 0.0))
        throw std::domain_error("lognormal_zscore: x, s, v must be positive");
    return (std::log(x / s) - (r - 0.5 * sigma * sigma) * v) / (sigma * std::sqrt(v));
}

inline double lognormal_pdf(double x, double s, double r, double sigma, double v) {
    const double z = lognormal_zscore(x, s, r, sigma, v);
    return norm_pdf(z) / (x * sigma * std::sqrt(v));
}

// Residual of the time-derivative identity the delta representation rests on:
//   z dz/dv + r z/(sigma sqrt(v)) + z^2/(2v) - sigma z/(2 sqrt(v)) = 0,
// with dz/dv analytic.  The four terms cancel exactly; extended precision
// internally keeps the rounding floor below 1e-12 even where single terms
// reach 1e4.
inline double zscore_identity_residual(double x, double s, double r, double sigma, double v) {
    if (!(x > 0.0 && s > 0.0 && v > 0.0))
        throw std::domain_error("zscore_identity_residual: x, s, v must be positive");
    const long double sq = std::sqrt(static_cast<long double>(v));
    const long double sv = static_cast<long double>(sigma) * sq;
    const long double c = static_cast<long double>(r) - 0.5L * sigma * sigma;
    const long double z = (std::log(static_cast<long double>(x) / s) - c * v) / sv;
    const long double dz_dv = -0.5L * z / v - c / sv;
    const long double res = z * dz_dv + r * z / sv + 0.5L * z * z / v - 0.5L * sigma * z / sq;
    return static_cast<double>(res);
}

// E[g(X)] for X lognormal as above, by Gauss-Hermite: x(z) = s exp((r -
// sigma^2/2) v + sigma sqrt(v) z) with z running over the normalized rule.
// Exact for g polynomial in ln x up to the rule degree.
template <typename G>
double lognormal_expectation(G&& g, double s, double r, double sigma, double v, int order) {
    if (!(s > 0.0 && v > 0.0)) throw std::domain_error("lognormal_expectation: s, v must be positive");
    if (order < 1) throw std::invalid_argument("lognormal_expectation: order must be >= 1");
    const GaussHermiteRule& rule = gauss_hermite(order);
    const double drift = (r - 0.5 * sigma * sigma) * v;
    const double volv = sigma * std::sqrt(v);
    long double acc = 0.0L; // keeps the rounding floor of the 64-term sum below 1e-13
    for (std::size_t q = 0; q < rule.z.size(); ++q)
        acc += static_cast<long double>(rule.w[q]) * g(s * std::exp(drift + volv * rule.z[q]));
    return static_cast<double>(acc);
}

} // namespace smp
