#pragma once

#include <cmath>
#include <cstdint>

namespace adathresh {

// Counter-based randomness: every variate is a pure function of a
// (seed, stream, counter) key, so draws are reproducible under any thread
// schedule and for any evaluation order.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t key_bits(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t counter) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ stream);
  return splitmix64(s ^ counter);
}

// Distinct stream namespaces per consumer, so reusing one seed value across
// config fields (graph seed, noise seed, ...) cannot alias their draws.
namespace rng_purpose {
inline constexpr std::uint64_t kAssignment = 0x61747361736d7031ULL;
inline constexpr std::uint64_t kSbmEdges = 0x6174736273626d32ULL;
inline constexpr std::uint64_t kNoise = 0x617473656e736533ULL;
inline constexpr std::uint64_t kGammaCell = 0x6174736763656c34ULL;
}  // namespace rng_purpose

inline std::uint64_t purpose_seed(std::uint64_t seed, std::uint64_t purpose) {
  return splitmix64(seed ^ purpose);
}

// Uniform in [0,1) with 53 random bits.
inline double uniform01(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Uniform in (0,1); never returns 0, safe to pass through log().
inline double uniform01_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

inline double uniform01(std::uint64_t seed, std::uint64_t stream,
                        std::uint64_t counter) {
  return uniform01(key_bits(seed, stream, counter));
}

// Standard normal via Box-Muller on two keyed uniforms.
inline double standard_normal(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t counter) {
  const double u1 = uniform01_open(key_bits(seed, stream, 2 * counter));
  const double u2 = uniform01_open(key_bits(seed, stream, 2 * counter + 1));
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace adathresh
