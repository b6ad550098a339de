#pragma once
// splitmix64: counter-based, trivially splittable, reproducible across
// platforms.  The algorithm name is recorded in every report.

#include <cstdint>

namespace cmred {

class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : state_(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1))) {}

    std::uint64_t next_u64()
    {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // independent generator for a named substream
    Rng split(std::uint64_t stream) const { return Rng(state_, stream); }

    static constexpr const char* algorithm() { return "splitmix64"; }

private:
    std::uint64_t state_;
};

} // namespace cmred
