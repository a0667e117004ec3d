#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace opslab {

// Deterministic RNG wrapper. All randomness in the library goes through this
// type so that results are reproducible across platforms: doubles are derived
// directly from the engine output instead of going through the
// implementation-defined std distributions.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n).
    int next_int(int n) {
        if (n <= 0) throw std::invalid_argument("Rng::next_int: n must be positive");
        // rejection sampling to avoid modulo bias
        const std::uint64_t bound = n;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<int>(x % bound);
    }

    // Sample an index from an (unnormalized is allowed) discrete distribution.
    int categorical(std::span<const double> probs) {
        double total = 0.0;
        for (double p : probs) total += p;
        if (total <= 0.0) throw std::invalid_argument("Rng::categorical: nonpositive total mass");
        double u = next_double() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size()) - 1;
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        // Box-Muller on engine-derived uniforms, deterministic across stdlibs.
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
        return mean + stddev * z;
    }

  private:
    std::mt19937_64 engine_;
};

// Stable seed derivation for (master seed, stream index) pairs, splitmix64 mix.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace opslab
