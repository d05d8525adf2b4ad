#pragma once

#include <cstdint>
#include <random>

namespace dragonroute {

// splitmix64: seed derivation and stable hashing. All randomness in the
// simulator flows through mt19937_64 seeded from here, so identical
// (config, seed) pairs replay identically on any platform.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)));
}

// Uniform draw in [0, n). Modulo bias is negligible for the ranges used
// here and keeps the draw sequence independent of library internals.
inline std::uint64_t rng_below(std::mt19937_64& rng, std::uint64_t n) {
  return n > 1 ? rng() % n : 0;
}

}  // namespace dragonroute
