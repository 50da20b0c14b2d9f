#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace llvit {

// mt19937_64 core with hand-rolled distributions. The std:: distribution
// classes are implementation-defined, so every transform here is spelled out
// to keep streams reproducible across standard libraries.
class Rng {
   public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t u64() { return engine_(); }

    // [0, 1) with 53 random bits
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    float uniform(float lo, float hi) {
        return lo + static_cast<float>(uniform()) * (hi - lo);
    }

    // Box-Muller; the spare value is discarded so the stream advances by a
    // fixed two draws per call.
    float normal(float mean = 0.0f, float stddev = 1.0f) {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) {
            u1 = uniform();
        }
        double r = std::sqrt(-2.0 * std::log(u1));
        double z = r * std::cos(2.0 * M_PI * u2);
        return mean + stddev * static_cast<float>(z);
    }

    // Normal clipped to +/- 2 stddev by resampling (DeiT-style init).
    float trunc_normal(float mean, float stddev) {
        for (;;) {
            float z = normal(0.0f, 1.0f);
            if (z >= -2.0f && z <= 2.0f) {
                return mean + stddev * z;
            }
        }
    }

    // [0, n); modulo bias is < 2^-32 for the sizes used here
    uint64_t index(uint64_t n) { return engine_() % n; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derives an independent stream; splitmix64 over (seed, salt).
    static uint64_t derive(uint64_t seed, uint64_t salt) {
        uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

   private:
    std::mt19937_64 engine_;
};

}  // namespace llvit
