#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace smp {

namespace detail {

// Fritsch-Carlson slope at an interior node from the two adjacent secants:
// harmonic mean where they agree in sign, zero otherwise.
inline double pchip_interior_slope(double s0, double s1) {
    if (s0 * s1 <= 0.0) return 0.0;
    return 2.0 * s0 * s1 / (s0 + s1);
}

// Shape-preserving one-sided end slope; s0 is the boundary secant.
inline double pchip_edge_slope(double s0, double s1) {
    double dd = 1.5 * s0 - 0.5 * s1;
    if (dd * s0 <= 0.0) dd = 0.0;
    else if (s0 * s1 < 0.0 && std::fabs(dd) > 3.0 * std::fabs(s0)) dd = 3.0 * s0;
    return dd;
}

// Fritsch-Carlson node slopes for uniform spacing h.  |d| <= 3|secant|
// holds, which is the monotonicity condition for the cubic Hermite pieces.
inline void pchip_slopes_uniform(const double* y, int n, double h, double* d) {
    if (n == 2) {
        const double sec = (y[1] - y[0]) / h;
        d[0] = sec;
        d[1] = sec;
        return;
    }
    const double inv_h = 1.0 / h;
    for (int i = 1; i < n - 1; ++i) {
        const double s0 = (y[i] - y[i - 1]) * inv_h;
        const double s1 = (y[i + 1] - y[i]) * inv_h;
        d[i] = pchip_interior_slope(s0, s1);
    }
    const double sa0 = (y[1] - y[0]) * inv_h, sa1 = (y[2] - y[1]) * inv_h;
    d[0] = pchip_edge_slope(sa0, sa1);
    const double sb0 = (y[n - 1] - y[n - 2]) * inv_h, sb1 = (y[n - 2] - y[n - 3]) * inv_h;
    d[n - 1] = pchip_edge_slope(sb0, sb1);
}

// Per-interval cubic coefficients in the local variable b in [0,1]:
//   H(b) = c0 + c1 b + c2 b^2 + c3 b^3,  u = x0 + (i + b) h.
inline void pchip_coeffs_uniform(const double* y, const double* d, int n, double h,
                                 double* c0, double* c1, double* c2, double* c3) {
    for (int i = 0; i < n - 1; ++i) {
        const double dy = y[i + 1] - y[i];
        c0[i] = y[i];
        c1[i] = h * d[i];
        c2[i] = 3.0 * dy - h * (2.0 * d[i] + d[i + 1]);
        c3[i] = -2.0 * dy + h * (d[i] + d[i + 1]);
    }
}

} // namespace detail

// Monotone cubic interpolant on a uniform grid x_i = x0 + i h, i = 0..n-1.
// Evaluation outside [x0, x_{n-1}] continues the end polynomials; callers
// needing a different extrapolation policy wrap this class.
class Pchip {
public:
    Pchip() = default;

    Pchip(double x0, double h, std::vector<double> y) : x0_(x0), h_(h), y_(std::move(y)) {
        const int n = static_cast<int>(y_.size());
        if (n < 2) throw std::invalid_argument("Pchip: need at least two nodes");
        if (!(h > 0.0)) throw std::invalid_argument("Pchip: spacing must be positive");
        d_.resize(n);
        detail::pchip_slopes_uniform(y_.data(), n, h_, d_.data());
        c0_.resize(n - 1);
        c1_.resize(n - 1);
        c2_.resize(n - 1);
        c3_.resize(n - 1);
        detail::pchip_coeffs_uniform(y_.data(), d_.data(), n, h_, c0_.data(), c1_.data(),
                                     c2_.data(), c3_.data());
    }

    int size() const { return static_cast<int>(y_.size()); }
    double x0() const { return x0_; }
    double h() const { return h_; }
    double node_value(int i) const { return y_[i]; }
    double node_slope(int i) const { return d_[i]; }

    double operator()(double x) const {
        const auto [i, b] = locate(x);
        return ((c3_[i] * b + c2_[i]) * b + c1_[i]) * b + c0_[i];
    }

    double deriv(double x) const {
        const auto [i, b] = locate(x);
        return ((3.0 * c3_[i] * b + 2.0 * c2_[i]) * b + c1_[i]) / h_;
    }

private:
    std::pair<int, double> locate(double x) const {
        const double t = (x - x0_) / h_;
        int i = static_cast<int>(std::floor(t));
        i = std::clamp(i, 0, static_cast<int>(y_.size()) - 2);
        return {i, t - i};
    }

    double x0_ = 0.0, h_ = 1.0;
    std::vector<double> y_, d_, c0_, c1_, c2_, c3_;
};

} // namespace smp
