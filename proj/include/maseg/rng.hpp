#pragma once

#include <cmath>
#include <cstdint>
#include <random>

// Deterministic random primitives. std::uniform_int_distribution and
// std::normal_distribution are implementation-defined, so every draw that
// must reproduce bit-for-bit goes through the helpers below instead.

namespace maseg {

/// SplitMix64 finalizer (Steele et al.), used for seed mixing.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Derives an independent substream seed from (seed, stream). Used for
/// per-tree, per-voxel and per-atlas streams so that changing one count
/// never perturbs the others.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x9e3779b97f4a7c15ull));
}

/// Uniform integer in [0, n) via Lemire's multiply-shift reduction.
/// Slight modulo bias is irrelevant here (n is tiny against 2^64).
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(rng()) * n) >> 64);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller. Draws two words per sample; no cached
/// second value, so the stream position is a pure function of the call count.
inline double normal_double(std::mt19937_64& rng) {
  const double u1 = static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;  // (0,1]
  const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;       // [0,1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

}  // namespace maseg
