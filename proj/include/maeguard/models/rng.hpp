#pragma once

#include <cstdint>
#include <random>

namespace maeguard::models {

// Independent, reproducible generator for (seed, a, b): used to give each
// example / step its own stream so results do not depend on batching.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return std::mt19937_64(mix64(mix64(mix64(seed) ^ a) ^ (b * 0xd6e8feb86659fd93ULL)));
}

}  // namespace maeguard::models
