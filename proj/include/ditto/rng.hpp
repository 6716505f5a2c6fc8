#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "ditto/common.hpp"

namespace ditto {

// Deterministic generator with a platform-independent stream (splitmix64 core,
// Box-Muller normals). All stochastic code in this library draws from Rng so
// that a seed pins every artifact bit-for-bit.
struct Rng {
    uint64_t state = 0x9e3779b97f4a7c15ull;
    bool have_spare = false;
    double spare = 0.0;

    Rng() = default;
    explicit Rng(uint64_t seed) : state(seed) {}

    uint64_t next_u64() {
        state += 0x9e3779b97f4a7c15ull;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n = 0 is a caller bug.
    uint64_t uniform_int(uint64_t n) {
        if (n == 0)
            throw invariant_error("uniform_int(0)");
        // Rejection sampling keeps the draw exactly uniform.
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    double normal() {
        if (have_spare) {
            have_spare = false;
            return spare;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare = r * std::sin(a);
        have_spare = true;
        return r * std::cos(a);
    }

    float normalf() { return static_cast<float>(normal()); }

    template <typename T>
    void shuffle(T* data, std::size_t n) {
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(data[i - 1], data[j]);
        }
    }

    // Gamma(alpha, 1), Marsaglia-Tsang; alpha < 1 handled by the boost trick.
    double gamma(double alpha) {
        if (alpha < 1.0) {
            double u;
            do {
                u = uniform();
            } while (u <= 0.0);
            return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
        }
        double d = alpha - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x)
                return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
                return d * v;
        }
    }
};

// Stable stream derivation: one global seed fans out to independent purposes.
inline uint64_t derive_seed(uint64_t seed, std::string_view purpose) {
    return seed ^ fnv1a64(purpose);
}

inline uint64_t derive_seed(uint64_t seed, std::string_view purpose, uint64_t index) {
    uint64_t z = (seed ^ fnv1a64(purpose)) + (index + 1) * 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace ditto
