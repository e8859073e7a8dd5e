#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "recon/common.hpp"
#include "recon/pointcloud.hpp"

namespace recon {

/// Orthonormal frame of the plane {x : normal.x = offset}. Vertical planes use
/// u = z x normal (horizontal) and v = +z; near-horizontal planes use u along +x.
struct PlaneFrame {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();

  static PlaneFrame make(const Vec3& normal, double offset);

  Vec2 project(const Vec3& p) const { return {u.dot(p), v.dot(p)}; }
  Vec3 lift(const Vec2& uv) const { return normal * offset + u * uv.x() + v * uv.y(); }
  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
};

/// Binary support grid in a plane frame. Pixel (ix, iy) covers
/// [origin + (ix, iy) * pixel_size, origin + (ix+1, iy+1) * pixel_size).
struct OccupancyBitmap {
  Vec2 origin = Vec2::Zero();
  double pixel_size = 0.2;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // row-major, height rows of width

  bool empty() const { return width == 0 || height == 0; }
  bool get(int ix, int iy) const { return bits[static_cast<std::size_t>(iy) * width + ix] != 0; }
  void set(int ix, int iy, bool on = true) {
    bits[static_cast<std::size_t>(iy) * width + ix] = on ? 1 : 0;
  }
  /// Pixel containing `uv`, or nullopt outside the grid.
  std::optional<std::pair<int, int>> pixel_of(const Vec2& uv) const;
  bool occupied(const Vec2& uv) const {
    auto px = pixel_of(uv);
    return px && get(px->first, px->second);
  }
  Vec2 pixel_center(int ix, int iy) const {
    return origin + Vec2((ix + 0.5) * pixel_size, (iy + 0.5) * pixel_size);
  }
  std::size_t count() const;
  double support_area() const { return static_cast<double>(count()) * pixel_size * pixel_size; }

  /// Grid covering the bounding box of `uvs` with a bit set per pixel hit.
  static OccupancyBitmap from_points(const std::vector<Vec2>& uvs, double pixel_size);

  bool operator==(const OccupancyBitmap&) const = default;
};

struct DetectedPlane {
  PlaneFrame frame;
  std::vector<int> inliers;  // sorted indices into the source cloud
  OccupancyBitmap occupancy;

  const Vec3& normal() const { return frame.normal; }
  double offset() const { return frame.offset; }
};

struct RansacParams {
  double distance_threshold = 0.01;
  double cluster_epsilon = 0.20;
  double normal_threshold_deg = 6.0;
  std::size_t min_points = 1000;
  double miss_probability = 0.001;
  double pixel_size = 0.20;
  std::uint64_t seed = 0;
  std::size_t batch = 32;
  std::size_t max_draws = 400000;
};

/// Greedy locality-sampled RANSAC plane extraction. Each plane carries the
/// largest connected inlier component at cluster-epsilon resolution and its
/// occupancy bitmap. Throws PreconditionError when the cloud has no normals.
std::vector<DetectedPlane> detect_planes(const PointCloud& cloud, const RansacParams& params,
                                         Exec exec = Exec::parallel);

OccupancyBitmap build_occupancy(const DetectedPlane& plane, const PointCloud& cloud,
                                double pixel_size);

/// Plane with `removed` dropped from its inliers and occupancy rebuilt from
/// the survivors on the original pixel grid, cropped to the pixels they hit.
/// An empty survivor set yields an empty bitmap.
DetectedPlane remove_inliers(const DetectedPlane& plane, const PointCloud& cloud,
                             const std::set<int>& removed);

/// Least-squares plane through the points; normal oriented to agree with `hint`.
PlaneFrame fit_plane(const PointCloud& cloud, const std::vector<int>& indices, const Vec3& hint);

}  // namespace recon
