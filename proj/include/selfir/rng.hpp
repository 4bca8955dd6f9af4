#pragma once

#include <cstdint>
#include <cstdio>
#include <random>
#include <string>

namespace selfir {

// Every random decision in the pipeline draws from an mt19937_64 whose seed
// is derived from (global seed, stream tag, indices...). Sampling is thereby
// a pure function of those values: worker count, resume points and call
// order never change results.
enum class Stream : std::uint64_t {
  Init = 1,
  Shuffle = 2,
  Crop = 3,
  Plan = 4,
  NoiseDraw = 5,
  Scene = 6,
  Shake = 7,
  Texture = 8,
  Isp = 9,
  Misc = 10,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <class... Vs>
std::uint64_t derive_seed(std::uint64_t seed, Stream stream, Vs... indices) {
  std::uint64_t h = splitmix64(seed ^ 0x243f6a8885a308d3ULL);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  ((h = splitmix64(h ^ static_cast<std::uint64_t>(indices))), ...);
  return h;
}

template <class... Vs>
std::mt19937_64 make_rng(std::uint64_t seed, Stream stream, Vs... indices) {
  return std::mt19937_64(derive_seed(seed, stream, indices...));
}

// FNV-1a, used for config and manifest fingerprints.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Fingerprints are written as fixed-width hex everywhere they appear.
inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace selfir
