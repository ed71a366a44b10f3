#pragma once

#include <cstdint>
#include <random>

namespace spk::rng {

// splitmix64 finalizer; mixes raw seeds into well-distributed state
inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

using Stream = std::mt19937_64;

// Independent stream for (seed, index). Streams derived this way do not
// depend on draw order elsewhere, so parallel consumers stay reproducible.
inline Stream stream(std::uint64_t seed, std::uint64_t index) {
  return Stream(mix(mix(seed) ^ mix(index ^ 0x5bf0363646e29bf5ull)));
}

inline std::uint64_t uniform_index(Stream& g, std::uint64_t n) {
  // n is tiny compared to 2^64; modulo bias is unobservable
  return g() % n;
}

inline double uniform01(Stream& g) { return (g() >> 11) * 0x1.0p-53; }

inline double normal(Stream& g) {
  std::normal_distribution<double> d(0.0, 1.0);
  return d(g);
}

}  // namespace spk::rng
