#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace simclock {

// splitmix64: used to derive well-separated seeds for per-cycle streams so
// campaign results do not depend on which worker simulates which cycle.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t s = splitmix64(master ^ 0xa5a5a5a5a5a5a5a5ULL);
    s = splitmix64(s ^ splitmix64(a));
    s = splitmix64(s ^ splitmix64(b + 0x1234567ULL));
    s = splitmix64(s ^ splitmix64(c + 0x89abcdefULL));
    return s;
}

// Deterministic Gaussian source. Box-Muller on top of mt19937_64 rather than
// std::normal_distribution, whose draw sequence differs between standard
// library implementations.
class RandomStream {
  public:
    explicit RandomStream(uint64_t seed) : eng_(seed) {}

    double uniform() {
        // 53-bit mantissa uniform in [0,1)
        return (eng_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    uint64_t bits() { return eng_(); }

  private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace simclock
