#pragma once

// Counter-based disorder stream. Draw (seed, field, site) is
//
//     x = seed + 0x9E3779B97F4A7C15 * (1 + (field << 40) + site)   (mod 2^64)
//     u = splitmix64_mix(x) >> 11, scaled by 2^-53 into [0, 1)
//
// so a realization does not depend on traversal order or platform.

#include <cstdint>

namespace floquet {

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t counter_draw(std::uint64_t seed, std::uint64_t field, std::uint64_t site) noexcept {
  return splitmix64_mix(seed + 0x9E3779B97F4A7C15ULL * (1ULL + (field << 40) + site));
}

/// Uniform double in [0, 1).
inline constexpr double counter_uniform(std::uint64_t seed, std::uint64_t field, std::uint64_t site) noexcept {
  return static_cast<double>(counter_draw(seed, field, site) >> 11) * 0x1.0p-53;
}

}  // namespace floquet
