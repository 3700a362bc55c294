#pragma once

#include <stdexcept>

namespace smp {

// Discretization and iteration controls for the integral-equation solver.
struct SolverConfig {
    int n_t = 101;        // time nodes, uniform on [0, T]
    int n_s = 201;        // log-price nodes
    double s_width = 6.0; // grid half-width in units of sigma_max * sqrt(T) around ln K
    int quad_order = 64;  // Gauss-Hermite order for the price-space expectation
    double v_rule = 0.0;  // sojourn-integral panels per unit time for off-grid t;
                          // 0 means match the t-grid density
    double tol = 1e-8;    // stopping tolerance in the weighted sup norm
    int max_iter = 0;     // 0: derived from the contraction estimate
    int workers = 1;      // worker threads for the sweep

    void require_valid() const {
        if (n_t < 3) throw std::invalid_argument("SolverConfig: n_t must be >= 3");
        if (n_s < 16) throw std::invalid_argument("SolverConfig: n_s must be >= 16");
        if (!(s_width > 0.0)) throw std::invalid_argument("SolverConfig: s_width must be positive");
        if (quad_order < 2) throw std::invalid_argument("SolverConfig: quad_order must be >= 2");
        if (v_rule < 0.0) throw std::invalid_argument("SolverConfig: v_rule must be >= 0");
        if (!(tol > 0.0)) throw std::invalid_argument("SolverConfig: tol must be positive");
        if (max_iter < 0) throw std::invalid_argument("SolverConfig: max_iter must be >= 0");
        if (workers < 1) throw std::invalid_argument("SolverConfig: workers must be >= 1");
    }
};

} // namespace smp
