#pragma once

#include <cmath>
#include <cstdint>

namespace idcr {

// Deterministic counter-free RNG (splitmix64 core). Streams are derived by
// hashing (seed, a, b, c) so concurrent consumers never share state.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

    // standard normal via Box-Muller
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

  private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline uint64_t hash_mix(uint64_t x) {
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derive an independent stream from (seed, a, b, c).
inline Rng rng_stream(uint64_t seed, uint64_t a = 0, uint64_t b = 0, uint64_t c = 0) {
    uint64_t s = hash_mix(seed + 0x9e3779b97f4a7c15ULL);
    s = hash_mix(s ^ (a + 0xd1b54a32d192ed03ULL));
    s = hash_mix(s ^ (b + 0x8cb92ba72f3d8dd7ULL));
    s = hash_mix(s ^ (c + 0x2545f4914f6cdd1dULL));
    return Rng(s);
}

} // namespace idcr
