#pragma once

#include <cmath>
#include <cstdint>

namespace pdsplit {

// Counter-based deterministic random streams. Every draw is a pure
// function of (seed, key...), so replaying a run never requires storing
// generator state and results are independent of evaluation order.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_key(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b = 0, std::uint64_t c = 0,
                              std::uint64_t d = 0) {
  std::uint64_t h = splitmix64(seed ^ 0x8115ae2702a5bd17ULL);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  h = splitmix64(h ^ d);
  return h;
}

// Uniform double in [0, 1).
inline double u01(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double uniform_draw(std::uint64_t seed, std::uint64_t a,
                           std::uint64_t b = 0, std::uint64_t c = 0,
                           std::uint64_t d = 0) {
  return u01(hash_key(seed, a, b, c, d));
}

// Uniform integer in {0, ..., n-1}; modulo bias is negligible for the
// small ranges used here (delay ages, picks).
inline int uniform_int_draw(int n, std::uint64_t seed, std::uint64_t a,
                            std::uint64_t b = 0, std::uint64_t c = 0,
                            std::uint64_t d = 0) {
  return static_cast<int>(hash_key(seed, a, b, c, d) %
                          static_cast<std::uint64_t>(n));
}

// Standard normal via Box-Muller on two counter draws.
inline double normal_draw(std::uint64_t seed, std::uint64_t a,
                          std::uint64_t b = 0, std::uint64_t c = 0) {
  double u1 = u01(hash_key(seed, a, b, c, 1));
  double u2 = u01(hash_key(seed, a, b, c, 2));
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace pdsplit
