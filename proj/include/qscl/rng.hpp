#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qscl {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent seed for (stream, index) from a base seed. Used to
// fan out per-sample / per-epoch RNG streams so results do not depend on
// execution schedule.
inline uint64_t derive_seed(uint64_t seed, uint64_t stream, uint64_t index) {
    return splitmix64(splitmix64(seed ^ (0xd1b54a32d192ed03ULL * (stream + 1))) ^ index);
}

// Seeded random stream. All distributions are implemented on top of the raw
// mt19937_64 output so sequences are identical across standard libraries;
// std::*_distribution is implementation-defined and is deliberately avoided.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1) with 53-bit resolution
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n), rejection sampled (unbiased)
    uint64_t uniform_int(uint64_t n) {
        if (n == 0) return 0;
        const uint64_t threshold = (0ULL - n) % n;  // 2^64 mod n
        for (;;) {
            uint64_t v = gen_();
            if (v >= threshold) return v % n;
        }
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Box-Muller; consumes exactly two uniforms per call.
    double gaussian(double mean, double stddev) {
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    // Fisher-Yates over [first, last)
    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<uint64_t>(last - first);
        for (uint64_t i = n; i > 1; --i) {
            uint64_t j = uniform_int(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace qscl
