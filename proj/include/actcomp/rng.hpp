#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "actcomp/errors.hpp"

namespace actcomp {

// One splitmix64 scrambling round (Vigna's reference constants). Also used on
// its own to derive decorrelated per-site seeds from a base seed.
inline uint64_t splitmix64_round(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Mix extra words into a seed. Deterministic and order-sensitive, so
// mix_seed(s, layer, worker) != mix_seed(s, worker, layer) in general.
inline uint64_t mix_seed(uint64_t seed) { return splitmix64_round(seed); }
template <typename... Rest>
inline uint64_t mix_seed(uint64_t seed, uint64_t word, Rest... rest) {
    return mix_seed(splitmix64_round(seed ^ (word + 0x9E3779B97F4A7C15ULL)), rest...);
}

// Deterministic sequential generator. splitmix64 is used instead of
// std::mt19937 so the stream is fully specified by this header: the same seed
// reproduces the same tensors regardless of platform or standard library.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller. u1 is drawn from (0, 1] so the log stays
    // finite; the second variate of each pair is cached.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
        double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * kPi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // k distinct indices from [0, n), returned ascending. Partial Fisher-Yates
    // over an explicit table; the modulo bias at 64 bits is ~1e-19 and
    // irrelevant next to determinism.
    std::vector<size_t> sample_without_replacement(size_t n, size_t k) {
        if (k > n) {
            throw parameter_error("sample_without_replacement: k exceeds population size");
        }
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) idx[i] = i;
        std::vector<size_t> out(k);
        for (size_t i = 0; i < k; ++i) {
            size_t j = i + static_cast<size_t>(next_u64() % static_cast<uint64_t>(n - i));
            std::swap(idx[i], idx[j]);
            out[i] = idx[i];
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    static constexpr double kPi = 3.141592653589793238462643383279502884;
    uint64_t state_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace actcomp
