#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace smp {

namespace detail {

// Symmetric tridiagonal eigensolver, QL with implicit shifts.  d holds the
// diagonal, e the subdiagonal in e[0..n-2], z a vector updated by the same
// rotations (seeded with [1,0,...,0] it accumulates first eigenvector
// components).  On return d holds eigenvalues sorted ascending.
inline void tridiag_ql(std::vector<double>& d, std::vector<double>& e, std::vector<double>& z) {
    const int n = static_cast<int>(d.size());
    if (n == 1) return;
    e.resize(n, 0.0);
    e[n - 1] = 0.0;
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
                if (std::fabs(e[m]) <= 1e-300 + 2.3e-16 * dd) break;
            }
            if (m != l) {
                if (++iter > 60) throw std::runtime_error("tridiag_ql: no convergence");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::fabs(r) : -std::fabs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                int i = m - 1;
                for (; i >= l; --i) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    f = z[i + 1];
                    z[i + 1] = s * z[i] + c * f;
                    z[i] = c * z[i] - s * f;
                }
                if (r == 0.0 && i >= l) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
    // insertion sort nodes ascending, carrying z
    for (int i = 1; i < n; ++i) {
        const double dv = d[i], zv = z[i];
        int j = i - 1;
        while (j >= 0 && d[j] > dv) {
            d[j + 1] = d[j];
            z[j + 1] = z[j];
            --j;
        }
        d[j + 1] = dv;
        z[j + 1] = zv;
    }
}

} // namespace detail

// Gauss-Hermite rule recast for expectations against the standard normal:
//   E[g(Z)] ~ sum_q w[q] * g(z[q]),   sum w = 1, nodes symmetric about 0.
// Built from the e^{-x^2} rule by z = sqrt(2)x, w = w_raw/sqrt(pi).
struct GaussHermiteRule {
    std::vector<double> z;
    std::vector<double> w;
};

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix (zero diagonal,
// subdiagonal sqrt(i/2)), raw weights sqrt(pi) * v0^2.  Symmetrised after the
// eigensolve so pairs cancel exactly and an odd order has an exact zero node.
inline GaussHermiteRule make_gauss_hermite(int order) {
    if (order < 1) throw std::invalid_argument("gauss_hermite: order must be >= 1");
    const int n = order;
    std::vector<double> d(n, 0.0), e(n, 0.0), v(n, 0.0);
    for (int i = 1; i < n; ++i) e[i - 1] = std::sqrt(0.5 * i);
    v[0] = 1.0;
    detail::tridiag_ql(d, e, v);

    const double sqrt2 = std::sqrt(2.0);
    GaussHermiteRule rule;
    rule.z.resize(n);
    rule.w.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.z[i] = sqrt2 * d[i];
        rule.w[i] = v[i] * v[i]; // raw weight / sqrt(pi)
    }
    for (int i = 0, j = n - 1; i < j; ++i, --j) {
        const double zs = 0.5 * (rule.z[j] - rule.z[i]);
        const double ws = 0.5 * (rule.w[i] + rule.w[j]);
        rule.z[i] = -zs;
        rule.z[j] = zs;
        rule.w[i] = ws;
        rule.w[j] = ws;
    }
    if (n % 2 == 1) rule.z[n / 2] = 0.0;
    double wsum = 0.0;
    for (double wi : rule.w) wsum += wi;
    for (double& wi : rule.w) wi /= wsum;
    return rule;
}

// Cached access; rules are immutable once built.
inline const GaussHermiteRule& gauss_hermite(int order) {
    static std::map<int, GaussHermiteRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, make_gauss_hermite(order)).first;
    return it->second;
}

} // namespace smp
