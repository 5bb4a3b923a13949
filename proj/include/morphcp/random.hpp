#pragma once

// Reproducible randomness. std::mt19937_64 has a fully specified output
// sequence, but the standard distributions do not, so bounded integers,
// uniform reals and shuffles are implemented here.

#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace morphcp {

using Rng = std::mt19937_64;

/// Independent streams carved out of one master seed.
enum class Stream : std::uint64_t { kSplit = 1, kSynth = 2 };

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed for item `index` of `stream`: mix64(mix64(seed ^ (stream * 0x9E3779B97F4A7C15)) ^ index).
inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index) {
  const auto s = static_cast<std::uint64_t>(stream);
  return mix64(mix64(seed ^ (s * 0x9E3779B97F4A7C15ULL)) ^ index);
}

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t index) {
  return Rng(derive_seed(seed, stream, index));
}

/// Uniform integer in [0, bound) by rejection of the biased tail.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - (max % bound + 1) % bound;
  std::uint64_t x = 0;
  do {
    x = rng();
  } while (x > limit);
  return x % bound;
}

/// Uniform integer in [lo, hi].
inline int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(hi - lo) + 1));
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Fisher-Yates, drawing j uniformly in [0, i] for i = n-1 down to 1.
template <class T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace morphcp
