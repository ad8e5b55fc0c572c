#pragma once

#include <cstdint>
#include <string>

namespace wmlab {

// Bit-exact 64-bit mixer (SplitMix64 finalizer). Every pseudorandom
// decision in the library flows through this function or the stream
// below; platform RNGs are not used anywhere.
inline constexpr std::uint64_t kMixGamma = 0x9E3779B97F4A7C15ULL;

inline constexpr std::uint64_t mix64(std::uint64_t x) {
    std::uint64_t z = x + kMixGamma;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Keyed pseudorandom function over token ids.
inline constexpr std::uint64_t prf(std::uint64_t key, std::uint64_t v) {
    return mix64(key ^ mix64(v));
}

// Maps a 64-bit word to [0,1) with 53 bits of precision.
inline constexpr double to_unit(std::uint64_t r) {
    return static_cast<double>(r >> 11) * 0x1.0p-53;
}

// Deterministic sequential source: the canonical SplitMix64 generator.
class SeededStream {
public:
    explicit constexpr SeededStream(std::uint64_t seed) : state_(seed) {}

    constexpr std::uint64_t next() {
        state_ += kMixGamma;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    constexpr double next_unit() { return to_unit(next()); }

    // Uniform draw from [0, n). Modulo bias is negligible for the ranges
    // used here and keeps the draw a single-word operation.
    constexpr std::uint64_t next_below(std::uint64_t n) {
        return n == 0 ? 0 : next() % n;
    }

    // Derives an independent child stream; used to give each record or
    // individual its own reproducible randomness.
    constexpr SeededStream fork(std::uint64_t tag) {
        return SeededStream(mix64(next() ^ mix64(tag)));
    }

private:
    std::uint64_t state_;
};

// FNV-1a, used for data-file checksums and feature hashing.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = 0xCBF29CE484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace wmlab
