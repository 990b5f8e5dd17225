#pragma once

// Seeded random source with a pinned consumption contract, so Monte Carlo
// results are bit-identical across runs and across worker counts. Stream
// generator is splitmix64; per-draw streams are derived from
// (base_seed, draw_index) through the same finalizer, never by splitting state.

#include <complex>
#include <cstdint>
#include <numbers>

#include <cmath>

namespace rsma {

namespace detail {

// splitmix64 output finalizer (Steele et al.); also used to derive stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace detail

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // One per-draw stream per (base_seed, index) pair; decorrelated by the finalizer.
    static Rng for_draw(std::uint64_t base_seed, std::uint64_t index) {
        return Rng(detail::mix64(base_seed ^ detail::mix64(index * 0xD1B54A32D192ED03ULL + 1)));
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform on (0, 1]: 53 random bits, never exactly 0 (Box-Muller takes its log).
    double uniform01() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller. Consumes exactly two u64 per call and
    // returns the cosine leg only — no cached spare, so the consumption order
    // is a function of call count alone.
    double normal() {
        const double u = uniform01();
        const double v = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
    }

    // CN(0,1): unit-variance circularly-symmetric complex Gaussian, one
    // Box-Muller pair split across real/imag, each scaled to variance 1/2.
    std::complex<double> cn01() {
        const double u = uniform01();
        const double v = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u));
        return {r * std::cos(2.0 * std::numbers::pi * v) / std::numbers::sqrt2,
                r * std::sin(2.0 * std::numbers::pi * v) / std::numbers::sqrt2};
    }

  private:
    std::uint64_t state_;
};

} // namespace rsma
