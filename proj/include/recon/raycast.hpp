#pragma once

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "recon/common.hpp"
#include "recon/planes.hpp"
#include "recon/rng.hpp"

namespace recon {

/// Axis-aligned box used to reject rays before the plane test.
struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  bool valid() const { return lo.x() <= hi.x(); }

  /// True when the segment origin + t*dir, t in [tmin, tmax], may touch the box.
  bool overlaps(const Vec3& origin, const Vec3& inv_dir, double tmin, double tmax) const {
    for (int a = 0; a < 3; ++a) {
      double t0 = (lo[a] - origin[a]) * inv_dir[a];
      double t1 = (hi[a] - origin[a]) * inv_dir[a];
      if (t0 > t1) std::swap(t0, t1);
      if (std::isnan(t0) || std::isnan(t1)) {
        if (origin[a] < lo[a] || origin[a] > hi[a]) return false;
        continue;
      }
      tmin = std::max(tmin, t0);
      tmax = std::min(tmax, t1);
      if (tmin > tmax) return false;
    }
    return true;
  }
};

/// A plane whose occupied pixels block rays.
struct Occluder {
  PlaneFrame frame;
  const OccupancyBitmap* bitmap = nullptr;
  Aabb box;

  Occluder(const PlaneFrame& f, const OccupancyBitmap& bm) : frame(f), bitmap(&bm) {
    const double pad = 1e-9;
    for (int iy = 0; iy < bm.height; ++iy)
      for (int ix = 0; ix < bm.width; ++ix) {
        if (!bm.get(ix, iy)) continue;
        for (int cx = 0; cx <= 1; ++cx)
          for (int cy = 0; cy <= 1; ++cy) {
            Vec2 uv = bm.origin + Vec2((ix + cx) * bm.pixel_size, (iy + cy) * bm.pixel_size);
            Vec3 p = frame.lift(uv);
            box.extend(p - Vec3::Constant(pad));
            box.extend(p + Vec3::Constant(pad));
          }
      }
  }

  /// Ray parameter of an occupied-pixel hit in (tmin, tmax), or +inf.
  double hit(const Vec3& origin, const Vec3& dir, const Vec3& inv_dir, double tmin,
             double tmax) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (!box.valid() || !box.overlaps(origin, inv_dir, tmin, tmax)) return inf;
    double denom = frame.normal.dot(dir);
    if (std::abs(denom) < 1e-15) return inf;
    double t = (frame.offset - frame.normal.dot(origin)) / denom;
    if (!(t > tmin && t < tmax)) return inf;
    return bitmap->occupied(frame.project(origin + t * dir)) ? t : inf;
  }
};

inline Vec3 inverse_direction(const Vec3& d) { return {1.0 / d.x(), 1.0 / d.y(), 1.0 / d.z()}; }

inline std::vector<Occluder> make_occluders(const std::vector<DetectedPlane>& planes) {
  std::vector<Occluder> out;
  out.reserve(planes.size());
  for (const auto& p : planes) out.emplace_back(p.frame, p.occupancy);
  return out;
}

/// Stream id derived from a position so per-point randomness does not depend on order.
inline std::uint64_t position_key(const Vec3& p) {
  std::uint64_t h = 0;
  for (int a = 0; a < 3; ++a) {
    double v = p[a];
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = splitmix64(h ^ bits);
  }
  return h;
}

}  // namespace recon
