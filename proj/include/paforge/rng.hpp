#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace paforge {

/// SplitMix64 step; used to derive well-separated stream seeds from a
/// master seed and to hash (seed, point_id) pairs into noise streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Deterministic RNG wrapper. std::mt19937_64 has a standard-mandated
/// bit sequence; the distributions below are hand-rolled because the
/// standard library's distribution objects are implementation-defined,
/// which would break byte-identical artifact reproduction.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, n). Masked rejection sampling; unbiased.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        std::uint64_t mask = ~0ull >> __builtin_clzll((n - 1) | 1);
        for (;;) {
            std::uint64_t v = next_u64() & mask;
            if (v < n) return v;
        }
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (one value per call).
    double normal() {
        double u1 = unit();
        while (u1 <= 0.0) u1 = unit();
        double u2 = unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Random permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        shuffle(p);
        return p;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace paforge
