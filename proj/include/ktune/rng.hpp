#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace ktune {

/// All stochastic components draw from this engine, seeded explicitly, so a
/// (seed, build) pair fully determines every sampling decision.
using Rng = std::mt19937_64;

/// Uniform draw from [0, 1). Uses the canonical 53-bit construction instead
/// of std::uniform_real_distribution so the stream is identical across
/// standard library implementations.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform draw from {0, 1, ..., n-1} via rejection (no modulo bias).
inline uint64_t uniform_index(Rng& rng, uint64_t n) {
    if (n <= 1) {
        return 0;
    }
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t draw = rng();
    while (draw >= limit) {
        draw = rng();
    }
    return draw % n;
}

/// FNV-1a 64-bit hash over a byte range.
inline uint64_t fnv1a64(const void* data, size_t size,
                        uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    uint64_t hash = seed;
    for (size_t i = 0; i < size; ++i) {
        hash ^= static_cast<uint64_t>(bytes[i]);
        hash *= 0x100000001b3ull;
    }
    return hash;
}

inline uint64_t fnv1a64(std::string_view text,
                        uint64_t seed = 0xcbf29ce484222325ull) {
    return fnv1a64(text.data(), text.size(), seed);
}

/// Bit finalizer (the splitmix64 output function). FNV-1a alone barely
/// diffuses the last few input bytes -- its final byte sees only one multiply
/// -- so strings differing in a trailing digit would land ~1e-7 apart in
/// [0, 1). Finalizing restores avalanche.
inline uint64_t mix64(uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

/// Deterministic hash of (seed, text) mapped to [0, 1). Used by the synthetic
/// backend to derive per-configuration noise without consuming search RNG.
inline double hash_unit(uint64_t seed, std::string_view text) {
    uint64_t hash = fnv1a64(&seed, sizeof(seed));
    hash = fnv1a64(text.data(), text.size(), hash);
    return static_cast<double>(mix64(hash) >> 11) * 0x1.0p-53;
}

}  // namespace ktune
