#pragma once

// Deterministic seeding and uniform-draw helpers for the per-core Monte Carlo
// streams. Every random quantity in the simulator is derived from raw
// mt19937_64 words through the helpers below, never through std distribution
// objects, so that identical seeds give identical streams on any platform.

#include <cstdint>
#include <random>

namespace sdmqkd {

// SplitMix64 finalizer (Steele/Lea/Flood). Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Stream seed for one core. Distinct cores always get distinct seeds: the
// golden-ratio multiplier is odd, so the pre-mix inputs never collide, and
// mix64 is a bijection.
inline std::uint64_t core_stream_seed(std::uint64_t master_seed, int core) {
    return mix64(master_seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(core + 1));
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Uniform double in (0, 1], safe as a log() argument.
inline double uniform01_open_low(std::mt19937_64& gen) {
    return 1.0 - uniform01(gen);
}

}  // namespace sdmqkd
