#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "recon/common.hpp"

namespace recon {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream per (global seed, stage tag, entity id).
inline Rng make_stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t id) {
  return Rng(splitmix64(splitmix64(seed ^ splitmix64(tag)) + id));
}

// Portable uniform in [0,1): std distributions are implementation-defined.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

inline double gaussian(Rng& rng) {
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

inline Vec3 uniform_sphere(Rng& rng) {
  double z = 2.0 * uniform01(rng) - 1.0;
  double phi = 2.0 * kPi * uniform01(rng);
  double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

/// Uniform over the hemisphere around `axis` (not cosine-weighted).
inline Vec3 uniform_hemisphere(Rng& rng, const Vec3& axis) {
  Vec3 d = uniform_sphere(rng);
  return d.dot(axis) < 0.0 ? Vec3(-d) : d;
}

}  // namespace recon
