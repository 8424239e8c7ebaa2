#pragma once

#include <cstdint>
#include <random>

namespace nrumac {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent stream seeds from a
/// parent seed and a stream label, so that e.g. node 3's backoff stream does
/// not depend on how many draws node 2 made.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b = 0) {
  return mix_seed(mix_seed(mix_seed(parent) ^ (a + 0x51ed27ULL)) ^ (b + 0x2545f491ULL));
}

// Stream labels for derive_seed.
enum class Stream : std::uint64_t {
  placement = 1,
  traffic = 2,
  backoff = 3,
  lambda = 4,
  policy_init = 5,
  value_init = 6,
  sampling = 7,
  episode = 8,
  evaluation = 9,
};

inline Rng make_rng(std::uint64_t parent, Stream s, std::uint64_t index = 0) {
  return Rng(derive_seed(parent, static_cast<std::uint64_t>(s), index));
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace nrumac
