#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace speedscale {

// SplitMix64 finalizer, used to derive stream keys from (seed, index, tag) tuples.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t hash_tag(std::string_view tag) {
    // FNV-1a over the tag bytes
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ULL;
    }
    return h;
}

/**
 * Deterministic random stream addressed by (master seed, replication index,
 * purpose tag).  Streams with distinct keys are independent for Monte Carlo
 * purposes, and a stream's draws depend only on its key, never on the order
 * in which streams are created or on worker scheduling.
 */
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t replication, std::string_view purpose)
        : RngStream(mix64(mix64(mix64(master_seed) ^ replication) ^ hash_tag(purpose))) {}

    explicit RngStream(std::uint64_t key) : eng_(key) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform draw on [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace speedscale
