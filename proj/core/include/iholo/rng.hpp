#pragma once

#include <cstdint>
#include <random>

namespace iholo {

/// SplitMix64 finalizer, used to derive independent generator seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Generator for the counter-indexed substream `stream` of `seed`. The same
/// (seed, stream) pair always yields the same sequence, independent of which
/// worker draws it.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(mix64(seed ^ mix64(stream + 0x5bd1e995ULL)));
}

} // namespace iholo
