#pragma once

#include <cstdint>

#include "smp/math/normal.hpp"

namespace smp {

// Counter-based stream: draw n is a pure function of (seed, path, stream, n),
// so any path can be generated independently of scheduling or worker count.
// The generator walks a Weyl sequence through the splitmix64 finalizer.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t path, std::uint64_t stream) {
        const std::uint64_t a = finalize(seed + 0x9E3779B97F4A7C15ULL);
        const std::uint64_t b = finalize(a ^ finalize(path + 0x2545F4914F6CDD1DULL));
        base_ = finalize(b ^ finalize(stream + 0x6A09E667F3BCC909ULL));
    }

    std::uint64_t next_u64() { return finalize(base_ + (counter_++) * 0x9E3779B97F4A7C15ULL); }

    // Uniform strictly inside (0,1): top 53 bits, offset by half an ulp.
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    // Standard normal via the inverse CDF; one uniform per normal keeps the
    // draw count predictable.
    double normal() { return norm_ppf(uniform()); }

    static std::uint64_t finalize(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t base_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace smp
