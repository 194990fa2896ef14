#pragma once

#include <cstdint>

namespace sindy {

/// SplitMix64 finalizer. Used to derive independent, well-mixed seeds for
/// sub-streams (ensemble members, subdomains) from one user seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed + stream);
}

}  // namespace sindy
