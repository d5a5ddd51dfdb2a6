#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace equifl {

using Rng = std::mt19937_64;

// Purposes for independent random streams. Adding a purpose never perturbs
// the streams of existing ones.
enum class Stream : std::uint64_t {
  Generator = 1,
  Data = 2,
  Degrade = 3,
  Shapley = 4,
  Sampling = 5,
  Subsample = 6,
  Participation = 7,
  Dishonest = 8,
  Init = 9,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Mixes a base seed with a sequence of tags into a new 64-bit seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(base);
  for (auto t : tags) h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  return Rng(derive_seed(base, tags));
}

inline std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace equifl
