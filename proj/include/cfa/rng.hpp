#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace cfa {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Folds several stream identifiers into one seed. Used to derive independent
// per-scene / per-operator rng streams from a master seed.
inline uint64_t mix_seed(std::initializer_list<uint64_t> parts) {
    uint64_t h = 0x243f6a8885a308d3ull;
    for (uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
    return h;
}

// Deterministic RNG with hand-rolled distributions. std::mt19937_64 is
// specified bit-exactly by the standard; the std distributions are not,
// so uniform/normal/bernoulli are implemented here.
class Rng {
  public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    uint64_t uniform_int(uint64_t n) {
        if (n == 0) return 0;
        uint64_t rem = (UINT64_MAX % n + 1) % n;
        uint64_t limit = UINT64_MAX - rem;
        uint64_t r;
        do {
            r = eng_();
        } while (r > limit);
        return r % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; caches the second variate.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

  private:
    std::mt19937_64 eng_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace cfa
