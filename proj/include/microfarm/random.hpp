#pragma once

// Portable random helpers. The standard distributions are implementation
// defined, so everything that feeds reproducible outputs goes through these.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace microfarm {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Seed for an independent sub-stream of a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632BE59BD9B4E019ull));
}

// Uniform in [0, 1) with 53 bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

// Box-Muller without caching the second variate, so every call consumes
// exactly two draws.
inline double normal(Rng& rng, double mean, double stddev) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace microfarm
