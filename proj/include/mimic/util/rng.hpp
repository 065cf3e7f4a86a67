#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mimic::util {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Combine a seed with stream identifiers (day, agent, ...) into a fresh seed.
inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b = 0) {
    return splitmix64(base ^ splitmix64(a ^ splitmix64(b + 0x42ULL)));
}

/// mt19937_64 with explicitly-defined samplers.  The std:: distributions are
/// implementation-defined, so every draw here is spelled out to keep output
/// byte-stable for a given seed.
class Rng {
public:
    Rng() : eng_(0) {}
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n), n > 0.
    uint64_t uniform_int(uint64_t n) {
        // multiply-shift; bias is < 2^-64 * n, irrelevant for simulation use
        return static_cast<uint64_t>((static_cast<__uint128_t>(eng_()) * n) >> 64);
    }

    /// Exponential with given rate (mean 1/rate).
    double exponential(double rate) {
        double u;
        do { u = uniform(); } while (u <= 0.0);
        return -std::log1p(-u) / rate;
    }

    /// Geometric on {0, 1, 2, ...} with success probability p.
    uint32_t geometric(double p) {
        if (p >= 1.0) return 0;
        double u;
        do { u = uniform(); } while (u <= 0.0);
        return static_cast<uint32_t>(std::floor(std::log(u) / std::log1p(-p)));
    }

    /// Standard normal via Box-Muller (both halves consumed, no cached state).
    double normal() {
        double u1, u2;
        do { u1 = uniform(); } while (u1 <= 0.0);
        u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Index draw from unnormalized weights.
    size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double x = uniform() * total;
        for (size_t i = 0; i + 1 < weights.size(); ++i) {
            if (x < weights[i]) return i;
            x -= weights[i];
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

    bool bernoulli(double p) { return uniform() < p; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = uniform_int(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

} // namespace mimic::util
