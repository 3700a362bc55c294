#pragma once

#include <cmath>
#include <stdexcept>

namespace smp {

// One transition intensity lambda_ij as a function of the age y (time since
// the last regime change).  Both families have closed-form cumulative hazard
// and closed-form inverse, which keeps sojourn sampling exact.
//
//   Constant(rate a):          lambda(y) = a,            cum(y) = a y
//   Weibull(scale a, shape b): lambda(y) = a b y^(b-1),  cum(y) = a y^b
//
// For Weibull with b < 1 the rate diverges at y = 0; rate() is then only
// meaningful for y > 0 and callers that need age-zero values must refuse such
// models up front.
struct HazardFn {
    enum class Family { Constant, Weibull };

    Family family = Family::Constant;
    double a = 1.0;
    double b = 1.0;

    static HazardFn constant(double rate) {
        if (!(rate > 0.0)) throw std::invalid_argument("HazardFn: rate must be positive");
        return HazardFn{Family::Constant, rate, 1.0};
    }

    static HazardFn weibull(double scale, double shape) {
        if (!(scale > 0.0)) throw std::invalid_argument("HazardFn: scale must be positive");
        if (!(shape > 0.0)) throw std::invalid_argument("HazardFn: shape must be positive");
        return HazardFn{Family::Weibull, scale, shape};
    }

    double rate(double y) const {
        if (family == Family::Constant) return a;
        if (b == 1.0) return a;
        return a * b * std::pow(y, b - 1.0);
    }

    double cumulative(double y) const {
        if (family == Family::Constant) return a * y;
        return a * std::pow(y, b);
    }

    double inverse_cumulative(double c) const {
        if (family == Family::Constant) return c / a;
        return std::pow(c / a, 1.0 / b);
    }
};

} // namespace smp
