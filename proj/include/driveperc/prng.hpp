#pragma once

#include <cmath>
#include <cstdint>

namespace dp {

// Deterministic pseudo-random generator used for every randomized step in the
// toolkit (splits, shuffles, dropout masks, weight init, synthetic data).
//
// Algorithm: SplitMix64 (Steele/Lea/Vigna). The state advances by the 64-bit
// golden-ratio increment and each output is finalized with two xor-multiply
// mixes. The full update is spelled out here so the byte streams can be
// reproduced from the header alone:
//
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   output = z ^ (z >> 31)
//
// Identical seed => identical sequence on every platform. A Prng instance is
// single-owner; concurrent users must each take their own child via split().
class Prng {
public:
    explicit Prng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Plain modulo reduction; the (negligible)
    // modulo bias is accepted in exchange for a one-line documented rule.
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller. Draws exactly two uniforms per call and
    // keeps no spare, so the consumed stream length is a pure function of the
    // call count.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;  // guard log(0)
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Seed-splitting: the child is seeded with the parent's next output, so a
    // parent plus a documented draw order pins every descendant stream.
    Prng split() { return Prng(next_u64()); }

private:
    uint64_t state_;
};

}  // namespace dp
