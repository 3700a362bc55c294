#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "smp/hazards.hpp"

namespace smp {

struct ValidationIssue {
    std::string key;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
};

// Semi-Markov market specification: per-regime coefficients plus the age
// dependent hazard matrix.  Immutable in use; every operation is a pure
// function of (model, arguments).
struct RegimeModel {
    int k = 0;
    std::vector<double> r;     // spot rate per regime, >= 0
    std::vector<double> sigma; // volatility per regime, > 0
    std::vector<double> mu;    // physical drift, used only off the pricing path
    // hazards[i][j] for i != j; absent entry means no direct i->j transition
    std::vector<std::vector<std::optional<HazardFn>>> hazards;

    bool has_hazard(int i, int j) const { return i != j && hazards[i][j].has_value(); }

    double hazard_rate(int i, int j, double y) const {
        if (!has_hazard(i, j)) return 0.0;
        return hazards[i][j]->rate(y);
    }

    // |lambda_ii(y)| = sum_{j != i} lambda_ij(y)
    double total_hazard(int i, double y) const {
        check_regime(i);
        double s = 0.0;
        for (int j = 0; j < k; ++j)
            if (has_hazard(i, j)) s += hazards[i][j]->rate(y);
        return s;
    }

    // Lambda_i(y), the integrated total hazard; sum of closed forms.
    double cumulative_hazard(int i, double y) const {
        check_regime(i);
        if (y < 0.0) throw std::domain_error("cumulative_hazard: y must be >= 0");
        double s = 0.0;
        for (int j = 0; j < k; ++j)
            if (has_hazard(i, j)) s += hazards[i][j]->cumulative(y);
        return s;
    }

    // 1 - F(y|i) = exp(-Lambda_i(y))
    double survival(int i, double y) const { return std::exp(-cumulative_hazard(i, y)); }

    // P(no jump in (y0, y0+dt] | age y0) = exp(-(Lambda(y0+dt) - Lambda(y0)))
    double conditional_survival(int i, double y0, double dt) const {
        return std::exp(-(cumulative_hazard(i, y0 + dt) - cumulative_hazard(i, y0)));
    }

    // f(y|i) = |lambda_ii(y)| exp(-Lambda_i(y))
    double sojourn_density(int i, double y) const {
        return total_hazard(i, y) * survival(i, y);
    }

    // p_ij(y) = lambda_ij(y) / |lambda_ii(y)|, row vector with zero diagonal.
    std::vector<double> transition_prob(int i, double y) const {
        check_regime(i);
        std::vector<double> p(k, 0.0);
        double tot = 0.0;
        for (int j = 0; j < k; ++j) {
            if (has_hazard(i, j)) {
                p[j] = hazards[i][j]->rate(y);
                tot += p[j];
            }
        }
        if (!(tot > 0.0)) throw std::runtime_error("transition_prob: total hazard is zero");
        for (double& pj : p) pj /= tot;
        return p;
    }

    // Remaining holding time tau from age y0: solves
    //   Lambda_i(y0 + tau) = Lambda_i(y0) + E,  E = -ln u.
    // Closed form when the row reduces to a single cumulative-hazard shape;
    // otherwise bisection in Lambda-space to 1e-12 absolute.
    double sample_sojourn(int i, double y0, double u) const {
        check_regime(i);
        if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("sample_sojourn: u must be in (0,1)");
        if (y0 < 0.0) throw std::domain_error("sample_sojourn: y0 must be >= 0");
        const double target = cumulative_hazard(i, y0) - std::log(u);

        // single-shape rows: Lambda_i(y) = A y^b for some A, b
        double shape = 0.0, scale_sum = 0.0;
        bool single_shape = true;
        for (int j = 0; j < k && single_shape; ++j) {
            if (!has_hazard(i, j)) continue;
            const HazardFn& h = *hazards[i][j];
            const double bj = (h.family == HazardFn::Family::Constant) ? 1.0 : h.b;
            if (scale_sum == 0.0) shape = bj;
            else if (bj != shape) single_shape = false;
            scale_sum += h.a;
        }
        if (single_shape) {
            const double y1 = (shape == 1.0) ? target / scale_sum
                                             : std::pow(target / scale_sum, 1.0 / shape);
            return std::max(y1 - y0, 0.0);
        }

        // mixed shapes: each term alone under-counts Lambda, so its solo
        // inversion over-estimates tau and brackets the root from above
        double hi = 0.0;
        bool first = true;
        for (int j = 0; j < k; ++j) {
            if (!has_hazard(i, j)) continue;
            const double cand = hazards[i][j]->inverse_cumulative(target) - y0;
            if (first || cand < hi) hi = cand;
            first = false;
        }
        hi = std::max(hi, 1e-300);
        double lo = 0.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double g = cumulative_hazard(i, y0 + mid) - target;
            if (std::fabs(g) < 1e-12) return mid;
            (g < 0.0 ? lo : hi) = mid;
            if (hi - lo < 1e-16 * (1.0 + hi)) break;
        }
        return 0.5 * (lo + hi);
    }

    ValidationReport validate() const {
        ValidationReport rep;
        auto flag = [&rep](std::string key, std::string msg) {
            rep.issues.push_back({std::move(key), std::move(msg)});
        };
        if (k < 2) flag("k", "regime count must be at least 2");
        if (static_cast<int>(r.size()) != k) flag("r", "needs one entry per regime");
        if (static_cast<int>(sigma.size()) != k) flag("sigma", "needs one entry per regime");
        if (static_cast<int>(mu.size()) != k) flag("mu", "needs one entry per regime");
        for (int i = 0; i < static_cast<int>(r.size()); ++i)
            if (!(r[i] >= 0.0)) flag("r[" + std::to_string(i) + "]", "rate must be nonnegative");
        for (int i = 0; i < static_cast<int>(sigma.size()); ++i)
            if (!(sigma[i] > 0.0)) flag("sigma[" + std::to_string(i) + "]", "sigma must be positive");
        if (static_cast<int>(hazards.size()) != k) {
            flag("hazards", "needs a k x k matrix");
            return rep;
        }
        for (int i = 0; i < k; ++i) {
            if (static_cast<int>(hazards[i].size()) != k) {
                flag("hazards[" + std::to_string(i) + "]", "row needs k entries");
                return rep;
            }
            if (hazards[i][i].has_value())
                flag("hazards[" + std::to_string(i) + "][" + std::to_string(i) + "]",
                     "diagonal must be absent");
            bool any = false;
            for (int j = 0; j < k; ++j) {
                if (i == j || !hazards[i][j].has_value()) continue;
                any = true;
                const HazardFn& h = *hazards[i][j];
                const std::string key =
                    "hazards[" + std::to_string(i) + "][" + std::to_string(j) + "]";
                if (!(h.a > 0.0)) flag(key, "rate/scale parameter must be positive");
                if (h.family == HazardFn::Family::Weibull && !(h.b > 0.0))
                    flag(key, "shape parameter must be positive");
            }
            if (!any)
                flag("hazards[" + std::to_string(i) + "]",
                     "row has no transitions; total hazard would vanish");
        }
        if (rep.ok() && !strongly_connected())
            flag("hazards", "transition support graph is not irreducible");
        return rep;
    }

private:
    void check_regime(int i) const {
        if (i < 0 || i >= k) throw std::out_of_range("regime index out of range");
    }

    // irreducibility = strong connectivity of the hazard support digraph;
    // with strictly positive hazard functions, support decides reachability
    bool strongly_connected() const {
        auto reach = [this](bool forward) {
            std::vector<char> seen(k, 0);
            std::vector<int> stack{0};
            seen[0] = 1;
            while (!stack.empty()) {
                const int v = stack.back();
                stack.pop_back();
                for (int w = 0; w < k; ++w) {
                    const bool edge = forward ? has_hazard(v, w) : has_hazard(w, v);
                    if (edge && !seen[w]) {
                        seen[w] = 1;
                        stack.push_back(w);
                    }
                }
            }
            for (char c : seen)
                if (!c) return false;
            return true;
        };
        return reach(true) && reach(false);
    }
};

} // namespace smp
