#pragma once

#include <vector>

#include "recon/arrangement.hpp"
#include "recon/candidates.hpp"

namespace recon {

/// One candidate surface plane as seen by the complex. Vertical planes have
/// normal.z == 0, horizontal planes normal = +-z.
struct PlaneInput {
  bool vertical = true;
  Vec3 normal = Vec3::UnitX();
  double offset = 0;
  Vec3 anchor = Vec3::Zero();  // a point of the observed support; rotations pivot here
  double priority = 0;         // the highest-priority plane sets a merged plane's orientation
  bool is_virtual = false;
};

struct WallInput {
  bool vertical = true;
  int plane_a = -1, plane_b = -1;  // indices into ComplexInput::planes
  double z_lo = 0, z_hi = 0;       // observed z-extent (vertical walls)
  Vec2 xy_lo = Vec2::Zero(), xy_hi = Vec2::Zero();  // footprint box (slabs)
};

struct ComplexInput {
  std::vector<PlaneInput> planes;
  std::vector<WallInput> walls;
  Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
};

struct ComplexParams {
  double merge_distance = 0.005;
  double merge_angle_deg = 0.5;
  double bbox_margin = 1.0;
  double virtual_thickness = 0.3;
  double quantum = 1e-9;
};

struct Cell {
  int id = -1;
  int face2d = -1;
  int interval = -1;
  double z_lo = 0, z_hi = 0;
  double area2d = 0;
  double volume = 0;
  double diameter = 0;
  std::vector<Vec2> footprint;  // counter-clockwise
  std::vector<int> walls;       // W_c, sorted
};

/// Face between cells ca and cb; `normal` points into ca.
struct OrientedFace {
  int id = -1;
  int ca = -1, cb = -1;
  bool horizontal = false;
  int plane = -1;  // merged line (lateral) or z-level index (horizontal)
  int edge2d = -1;  // lateral faces
  double area = 0;
  double diameter = 0;
  Vec3 normal = Vec3::Zero();
  std::vector<Vec3> polygon;    // counter-clockwise seen from the normal side
  std::vector<int> boundary_walls;  // W_cb \ W_ca
  std::vector<int> inner_walls;     // W_ca intersect W_cb
};

struct CellComplex {
  Arrangement2D arr;
  std::vector<double> z_levels;              // ascending, first/last are the box
  std::vector<int> level_sign;               // orientation of interior z-levels (+1 normal +z)
  std::vector<std::vector<int>> line_planes;   // merged line -> input planes on it
  std::vector<std::vector<int>> level_planes;  // z-level -> input planes on it
  std::vector<int> plane_target;  // input plane -> merged line or z-level, -1 when outside the box
  std::vector<int> plane_sign;    // input plane orientation relative to its target
  std::vector<Cell> cells;
  std::vector<OrientedFace> faces;
  std::vector<std::vector<int>> wall_cells;  // C_w
  std::vector<std::vector<int>> cell_faces;  // incident face ids per cell
  Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
  std::size_t inner_face_diagnostics = 0;  // inner faces of a wall that bound no other wall

  int interval_count() const { return static_cast<int>(z_levels.size()) - 1; }
  int cell_id(int face2d, int interval) const {
    return interval * static_cast<int>(arr.faces.size()) + face2d;
  }
  std::size_t wall_count() const { return wall_cells.size(); }
  double volume() const { return (hi - lo).prod(); }
};

/// Direction clustering, offset merging, exact 2D arrangement, z-cuts, cells,
/// faces and wall membership. Throws ConfigError with fewer than 2 horizontal planes.
CellComplex build_complex(const ComplexInput& input, const ComplexParams& params = {});

/// True when the cell touches the bounding box: its 2D face has a clip
/// boundary edge, or it lies in the lowest or highest z-interval.
bool on_box_boundary(const CellComplex& cx, int cell);

/// Recomputes W_c, C_w and the per-face wall sets.
void wall_membership(CellComplex& cx, const ComplexInput& input);

/// Complex input from paired surfaces; the bounding box follows the surfaces'
/// extents plus margin in xy and the outermost horizontal planes +- virtual thickness in z.
ComplexInput complex_input(const PairResult& pairs, const ComplexParams& params = {});

}  // namespace recon
