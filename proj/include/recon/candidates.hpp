#pragma once

#include <optional>
#include <span>
#include <vector>

#include "recon/planes.hpp"
#include "recon/pointcloud.hpp"

namespace recon {

enum class SurfaceClass { wall, slab };

/// Per-pixel soft room-label support in a surface frame. `values` holds
/// `labels` entries per pixel; `occupied` marks pixels that received any point.
struct MultiLabelBitmap {
  Vec2 origin = Vec2::Zero();
  double pixel_size = 0.10;
  int width = 0;
  int height = 0;
  int labels = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> occupied;

  bool empty() const { return width == 0 || height == 0; }
  std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(iy) * width + ix; }
  std::span<const double> at(int ix, int iy) const {
    return {values.data() + index(ix, iy) * labels, static_cast<std::size_t>(labels)};
  }
  bool is_occupied(int ix, int iy) const { return occupied[index(ix, iy)] != 0; }
  std::optional<std::pair<int, int>> pixel_of(const Vec2& uv) const;
  /// Occupancy at a frame coordinate; false outside the grid.
  bool occupied_at(const Vec2& uv) const {
    auto px = pixel_of(uv);
    return px && is_occupied(px->first, px->second);
  }
  bool operator==(const MultiLabelBitmap&) const = default;
};

/// World-space extent of a surface's observed support.
struct SurfaceExtent {
  double z_lo = 0, z_hi = 0;
  Vec2 xy_lo = Vec2::Zero(), xy_hi = Vec2::Zero();
  Vec2 end_a = Vec2::Zero(), end_b = Vec2::Zero();  // walls: horizontal endpoints of the support
  Vec3 center = Vec3::Zero();
};

struct SurfaceCandidate {
  SurfaceClass cls = SurfaceClass::wall;
  PlaneFrame frame;  // rectified
  OccupancyBitmap occupancy;
  MultiLabelBitmap support;
  SurfaceExtent extent;
  std::vector<int> inliers;
  int source_plane = -1;  // -1 for virtual surfaces
  bool is_virtual = false;
};

struct ClassifyParams {
  double min_wall_area = 2.0;
  double min_slab_area = 5.0;
  double vertical_tolerance_deg = 10.0;
  double horizontal_tolerance_deg = 10.0;
};

/// Keeps approximately vertical/horizontal planes above the class area
/// threshold, snaps their normals (walls into the xy-plane, slabs to +-z),
/// refits the offset over the inliers and rebuilds the occupancy.
std::vector<SurfaceCandidate> classify_rectify(const std::vector<DetectedPlane>& planes,
                                               const PointCloud& cloud,
                                               const ClassifyParams& params);

/// Per-label fraction of labeled inliers in each pixel. `labels` is the label count.
MultiLabelBitmap build_support(const SurfaceCandidate& surface, const PointCloud& cloud,
                               const std::vector<int>& point_labels, int labels,
                               double pixel_size = 0.10);

/// Chebyshev-radius dilation (entrywise max, occupancy OR). The grid grows
/// by `radius` pixels on each side.
MultiLabelBitmap dilate_support(const MultiLabelBitmap& bitmap, int radius);

SurfaceExtent compute_extent(const SurfaceClass cls, const PlaneFrame& frame,
                             const OccupancyBitmap& occupancy);

struct WallCandidate {
  int id = -1;
  int surface_a = -1;
  int surface_b = -1;
  double thickness = 0;
  SurfaceClass orientation = SurfaceClass::wall;
};

struct PairParams {
  double max_thickness = 0.6;
  double max_angle_deg = 5.0;
  double virtual_thickness = 0.3;
};

struct PairResult {
  std::vector<WallCandidate> walls;
  std::vector<SurfaceCandidate> surfaces;  // input surfaces followed by virtual ones
};

/// The pairing predicate: same class, opposing normals, each surface behind
/// the other at a gap in (0, max_thickness], overlapping footprints. Returns the gap.
std::optional<double> pair_gap(const SurfaceCandidate& s, const SurfaceCandidate& t,
                               const PairParams& params);

/// Every qualifying (s, t) pair becomes a candidate; surfaces with no match get a
/// virtual opposing surface `virtual_thickness` behind them.
PairResult pair_walls(const std::vector<SurfaceCandidate>& surfaces, const PairParams& params);

/// Virtual partner of `s` at distance `thickness` behind it, with empty support.
SurfaceCandidate make_virtual_partner(const SurfaceCandidate& s, double thickness);

}  // namespace recon
