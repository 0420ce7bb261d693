#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace advkit {

// splitmix64 finalizer; also usable as a tiny standalone generator.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

// Seed derivation used everywhere: one root seed in the experiment config,
// every consumer stream keyed by (root, purpose tag, index). Adding a new
// purpose or raising an index never shifts the other streams.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, std::uint64_t index = 0) {
    return splitmix64(splitmix64(root ^ fnv1a64(tag)) + index);
}

// Deterministic random stream. The engine is std::mt19937_64 (fully specified
// by the standard); the uniform and Gaussian transforms are implemented here
// so streams are bit-reproducible across standard libraries.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1) with 53 random mantissa bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform on [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Standard normal via Box-Muller; consumes two uniforms per pair.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 == 0.0) u1 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    std::uint64_t bits() { return engine_(); }

    // Fisher-Yates index draw: uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(engine_() % n);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace advkit
