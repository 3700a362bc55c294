#pragma once

#include <algorithm>
#include <stdexcept>

namespace smp {

// European call contract.  The terminal condition (s-K)^+ and the strike's
// role in grid placement both live behind this type.
struct ContractSpec {
    double strike = 100.0;
    double maturity = 1.0;

    double payoff(double s) const { return std::max(s - strike, 0.0); }

    void require_valid() const {
        if (!(strike > 0.0)) throw std::invalid_argument("ContractSpec: strike must be positive");
        if (!(maturity > 0.0)) throw std::invalid_argument("ContractSpec: maturity must be positive");
    }
};

} // namespace smp
