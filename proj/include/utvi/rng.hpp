#pragma once

#include <cstdint>
#include <initializer_list>

#include "utvi/normal.hpp"

namespace utvi {

// splitmix64 step; used both as a generator state update and as a seed mixer.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive a child seed from a root seed and a path of stream ids. Distinct
/// paths give independent streams, so parallel or repeated evaluations can
/// be made reproducible from a single root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = root;
    (void)splitmix64(s);
    for (std::uint64_t id : path) {
        s ^= 0x632be59bd9b4e019ULL + id;
        (void)splitmix64(s);
    }
    return s;
}

/// Stream ids used with derive_seed throughout the library, so independent
/// consumers of one root seed never collide.
namespace streams {
inline constexpr std::uint64_t data = 1;      // per-batch training data
inline constexpr std::uint64_t init = 2;      // parameter initialization
inline constexpr std::uint64_t val = 3;       // validation set generation
inline constexpr std::uint64_t val_eval = 4;  // per-epoch validation MCVI draws
inline constexpr std::uint64_t mc = 5;        // per-datum training MCVI draws
inline constexpr std::uint64_t fixed = 6;     // fixed-dataset generation
inline constexpr std::uint64_t shuffle = 7;   // fixed-dataset epoch shuffles
inline constexpr std::uint64_t eval = 8;      // evaluation MCVI draws
inline constexpr std::uint64_t cell = 9;      // variance-map cells
inline constexpr std::uint64_t timing = 10;   // benchmark inputs and draws
}  // namespace streams

/// Deterministic random stream (xoshiro256** core, splitmix-seeded).
/// Self-contained so that draws are bit-identical across platforms and
/// standard library versions.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double strictly inside (0, 1).
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal draw by inverse-CDF sampling.
    double normal() { return normal_inv_cdf(uniform01()); }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Poisson draw (Knuth multiplication method); intended for the small
    /// rates that arise in pixelated image simulation.
    long poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        const double limit = std::exp(-lambda);
        long k = -1;
        double p = 1.0;
        do {
            ++k;
            p *= uniform01();
        } while (p > limit);
        return k;
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t state_[4];
};

}  // namespace utvi
