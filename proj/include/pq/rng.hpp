#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace pq {

// Deterministic RNG used everywhere randomness is needed. All draws go
// through explicit integer/float mappings instead of std distributions so
// results are identical across standard library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t u64() { return engine_(); }

    // Uniform in [0, n). Modulo bias is negligible for n << 2^64.
    uint64_t index(uint64_t n) { return n == 0 ? 0 : engine_() % n; }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller, no caching so the draw count stays predictable.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 engine_;
};

// One seeded generator per command; sub-components derive their stream from
// the global seed plus a stable tag.
inline Rng make_rng(uint64_t seed, const std::string& tag) {
    uint64_t h = 1469598103934665603ull ^ seed;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 1099511628211ull;
    }
    h += 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    return Rng(h ^ (h >> 31));
}

}  // namespace pq
