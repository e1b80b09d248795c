#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "mstates/error.hpp"

namespace mstates {

// All randomness in the project flows from a single master seed through
// the derivations below. Distributions are hand-rolled on top of
// std::mt19937_64 so that output streams are identical across standard
// library implementations.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Stream seed for work item (a, b) under a master seed. Independent of
// scheduling order, so parallel consumers stay deterministic.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = master;
    std::uint64_t x = splitmix64(s);
    s = x ^ (a * 0x100000001B3ull + 0x9E3779B97F4A7C15ull);
    x = splitmix64(s);
    s = x ^ (b * 0xC2B2AE3D27D4EB4Full + 0x165667B19E3779F9ull);
    return splitmix64(s);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, bound) via 128-bit multiply-shift.
    std::uint64_t next_below(std::uint64_t bound) {
        if (bound == 0) throw NumericalError("Rng::next_below: bound must be positive");
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(engine_()) * bound) >> 64);
    }

    // Standard normal via Box-Muller; one spare cached.
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // k distinct indices from [0, n), by partial Fisher-Yates.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        if (k > n) throw NumericalError("sample_without_replacement: k > n");
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(next_below(n - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace mstates
