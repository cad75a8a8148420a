#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace prospect {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; mixes a 64-bit value into a well-distributed one.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent child seed for a named stream of a run seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed) ^ mix64(stream + 0x632BE59BD9B4E019ULL));
}

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t hash = 0xCBF29CE484222325ULL) noexcept {
  for (const char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

/// Stream ids used when splitting one run seed into per-stage seeds.
namespace streams {
inline constexpr std::uint64_t sampling = 1;
inline constexpr std::uint64_t split = 2;
inline constexpr std::uint64_t autoencoder = 3;
inline constexpr std::uint64_t classifier = 4;
inline constexpr std::uint64_t forest = 5;
inline constexpr std::uint64_t conversions = 6;
}  // namespace streams

}  // namespace prospect
