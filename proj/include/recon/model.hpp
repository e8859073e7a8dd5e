#pragma once

#include <array>
#include <string>
#include <vector>

#include "recon/candidates.hpp"
#include "recon/complex.hpp"
#include "recon/ilp.hpp"

namespace recon {

/// Planar polygon, counter-clockwise seen from outside the entity.
using Polygon3 = std::vector<Vec3>;

struct RoomEntity {
  int id = -1;
  int label = -1;
  std::vector<int> cells;
  double volume = 0;
  int components = 0;  // face-connected pieces
  std::vector<Polygon3> boundary;
};

struct WallSurface {
  Vec3 normal = Vec3::UnitX();
  double offset = 0;
  bool is_virtual = false;
};

struct WallEntity {
  int id = -1;  // wall candidate id
  bool slab = false;
  Vec3 axis = Vec3::UnitX();  // along the wall for vertical walls, the normal for slabs
  double thickness = 0;
  std::array<WallSurface, 2> surfaces;
  std::vector<int> cells;
  double volume = 0;
  std::vector<Polygon3> boundary;
};

struct Intersection {
  std::vector<int> walls;
  std::vector<int> cells;
};

struct BuildingModel {
  std::vector<RoomEntity> rooms;
  std::vector<WallEntity> walls;
  std::vector<Intersection> intersections;  // one per distinct set of >= 2 walls
  std::vector<std::pair<int, int>> room_wall;  // (room id, wall id)
  std::vector<std::pair<int, int>> wall_wall;  // (wall id, wall id), first < second
  double outside_volume = 0;  // cells labeled outside, walls included
  double box_volume = 0;
  std::vector<std::string> warnings;

  bool empty() const { return rooms.empty() && walls.empty(); }
};

/// Groups cells by label. `pairs` supplies wall geometry; without it walls carry
/// only their cells.
BuildingModel extract(const IlpModel& model, const Labeling& lab, const CellComplex& cx,
                      const PairResult* pairs = nullptr, Exec exec = Exec::parallel);

/// Boundary of a union of cells: faces with exactly one side in the set plus
/// the box faces of member cells, merged per plane where the union is a
/// simple polygon. Outward winding.
std::vector<Polygon3> cell_set_boundary(const CellComplex& cx, const std::vector<int>& cells);

struct Triangle {
  std::array<int, 3> v;
};

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
};

/// Ear clipping of each polygon, vertices shared by exact coordinate.
Mesh triangulate(const std::vector<Polygon3>& polygons);

/// Every undirected edge used by exactly two triangles, in opposite directions.
bool watertight(const Mesh& mesh);

enum class MeshSelection { rooms, walls, all };
std::string export_mesh(const BuildingModel& model, MeshSelection what);

std::string export_model_json(const BuildingModel& model);

inline constexpr int kModelSchemaVersion = 1;

}  // namespace recon
