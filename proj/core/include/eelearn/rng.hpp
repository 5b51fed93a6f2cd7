#pragma once

#include <cstdint>
#include <random>

namespace eelearn {

/// SplitMix64 step; used to derive independent seed streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic sub-seed for (seed, stream, a, b). Order-independent across
/// call sites, so per-agent and per-round streams can be drawn in any order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
  h = splitmix64(h ^ splitmix64(stream));
  h = splitmix64(h ^ splitmix64(a + 0x9e3779b97f4a7c15ULL));
  h = splitmix64(h ^ splitmix64(b + 0x3c6ef372fe94f82bULL));
  return h;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace eelearn
