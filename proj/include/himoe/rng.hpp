#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace himoe {

// Deterministic random source. mt19937_64 is bit-exact across platforms by
// the standard; the value transforms below avoid std::uniform_real_distribution
// and std::normal_distribution, whose outputs are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    int uniform_int(int lo, int hi) {  // inclusive range
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(engine_() % span);
    }

    // Standard normal via Box-Muller; one spare value cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586476925286766559;
        spare_ = mag * std::sin(two_pi * u2);
        has_spare_ = true;
        return mag * std::cos(two_pi * u2);
    }

    double normal(double mean, double std) { return mean + std * normal(); }

    // Fisher-Yates over indices 0..n-1.
    std::vector<int> permutation(int n) {
        std::vector<int> idx(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
        for (int i = n - 1; i > 0; --i) {
            const int j = uniform_int(0, i);
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
        return idx;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Stable seed derivation for independent named streams (FNV-1a over the tag,
// mixed with the master seed). Same (seed, tag) always yields the same stream.
inline std::uint64_t derive_seed(std::uint64_t master, const std::string& tag) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const char c : tag) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ULL;
    }
    h ^= master + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, const std::string& tag, std::uint64_t index) {
    return derive_seed(master ^ (0x517cc1b727220a95ULL * (index + 1)), tag);
}

}  // namespace himoe
