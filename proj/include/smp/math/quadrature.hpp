#pragma once

#include <stdexcept>
#include <vector>

namespace smp {

// Closed Newton-Cotes weights for M uniform panels of width h: composite
// Simpson for even M, Simpson plus a 3/8 tail when M is odd, trapezoid for
// the single-panel case.  All weights are positive.
inline std::vector<double> composite_simpson_weights(int panels, double h) {
    if (panels < 0) throw std::invalid_argument("composite_simpson_weights: panels < 0");
    std::vector<double> w(panels + 1, 0.0);
    if (panels == 0) return w;
    if (panels == 1) {
        w[0] = w[1] = 0.5 * h;
        return w;
    }
    int simpson_end = panels;      // node index where the Simpson part stops
    if (panels % 2 == 1) simpson_end = panels - 3;
    const double h3 = h / 3.0;
    for (int i = 0; i < simpson_end; i += 2) {
        w[i] += h3;
        w[i + 1] += 4.0 * h3;
        w[i + 2] += h3;
    }
    if (panels % 2 == 1) {
        const double h38 = 3.0 * h / 8.0;
        w[panels - 3] += h38;
        w[panels - 2] += 3.0 * h38;
        w[panels - 1] += 3.0 * h38;
        w[panels] += h38;
    }
    return w;
}

} // namespace smp
