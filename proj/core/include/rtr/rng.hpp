#pragma once

#include <cmath>
#include <cstdint>

#include "rtr/math.hpp"

namespace rtr {

/// Counter-based stateless RNG. Every draw is a pure function of
/// (seed, stream, index), so results are independent of evaluation
/// order and thread count. The mixer is the splitmix64 finalizer.
class Rng {
public:
    Rng(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {}

    /// Raw 64-bit hash of the counter triple.
    uint64_t bits(uint64_t index) const {
        uint64_t z = seed_ * 0x9e3779b97f4a7c15ULL + stream_ * 0xbf58476d1ce4e5b9ULL +
                     index * 0x94d049bb133111ebULL + 0x2545f4914f6cdd1dULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    Real uniform(uint64_t index) const {
        return Real(bits(index) >> 11) * 0x1p-53;
    }

    /// Uniform in [0, 1)^2 from one counter (two decorrelated substreams).
    Vec2 uniform2(uint64_t index) const {
        return {uniform(index * 2), uniform(index * 2 + 1)};
    }

    /// Standard normal via Box-Muller.
    Real normal(uint64_t index) const {
        const Real u1 = std::max(uniform(index * 2), Real(1e-300));
        const Real u2 = uniform(index * 2 + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }

    /// Uniform direction on the unit sphere.
    Vec3 sphere(uint64_t index) const {
        const Vec2 u = uniform2(index);
        const Real z = 1.0 - 2.0 * u.x;
        const Real r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const Real phi = kTwoPi * u.y;
        return {r * std::cos(phi), r * std::sin(phi), z};
    }

private:
    uint64_t seed_;
    uint64_t stream_;
};

}  // namespace rtr
