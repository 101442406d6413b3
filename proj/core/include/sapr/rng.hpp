#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <vector>

namespace sapr {

/// Counter-based deterministic random stream.
///
/// A stream is identified by a seed plus an arbitrary key sequence
/// (image id, iteration, sub-pass, ...). Streams derived from distinct
/// keys are independent, so parallel workers can draw without any shared
/// state and results never depend on scheduling order. All distributions
/// are hand-rolled on top of the 64-bit generator to keep the produced
/// bits identical across platforms and standard libraries.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(mix(seed ^ kInit)) {}

    RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys)
        : RngStream(seed) {
        for (std::uint64_t k : keys) state_ = mix(state_ ^ mix(k ^ kKeyTag));
    }

    /// Independent child stream keyed off this one.
    RngStream derive(std::uint64_t key) const {
        RngStream child(0);
        child.state_ = mix(state_ ^ mix(key ^ kKeyTag));
        return child;
    }

    /// Deterministic seed derivation for sub-streams named by a key path.
    static std::uint64_t mix_keys(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
        return RngStream(seed, keys).state_;
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix(state_);
    }

    /// Uniform double in the open interval (0,1).
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller (two draws per call, no cached spare).
    double normal() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Normal(0, sigma^2) resampled until |x| <= 2*sigma.
    double truncated_normal(double sigma) {
        for (;;) {
            const double x = normal() * sigma;
            if (std::abs(x) <= 2.0 * sigma) return x;
        }
    }

    /// Unbiased integer in [0, bound) by rejection.
    std::uint64_t uniform_index(std::uint64_t bound) {
        const std::uint64_t threshold = (0ull - bound) % bound;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    /// Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

private:
    static constexpr std::uint64_t kInit = 0x5AFEC0DE5AFEC0DEull;
    static constexpr std::uint64_t kKeyTag = 0xA5A5A5A55A5A5A5Aull;

    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

} // namespace sapr
