#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recon/pointcloud.hpp"

namespace recon {

struct StorySpec {
  double floor_z = 0;
  double height = 2.6;
};

/// Simple room footprint, counter-clockwise.
struct RoomSpec {
  std::vector<Vec2> polygon;
  int story = 0;
  /// Edges (index i joins vertex i and i+1) left unsampled, e.g. an open hallway end.
  std::vector<int> open_edges;
};

/// Furniture-like box standing on the floor of `room`; its top and sides are sampled.
struct ClutterBox {
  Vec2 lo = Vec2::Zero(), hi = Vec2::Zero();
  double height = 0;
  int room = 0;
};

struct SceneSpec {
  std::string name;
  std::vector<StorySpec> stories{StorySpec{}};
  std::vector<RoomSpec> rooms;
  std::vector<ClutterBox> clutter;
  double noise_sigma = 0.005;
  double density = 400;  // points per m^2
  std::size_t outlier_count = 500;
  double outlier_min_distance = 5;  // from the building's xy bounding box
  double outlier_max_distance = 10;
  std::uint64_t seed = 0;
};

/// Two antiparallel room edges facing each other across a gap.
struct GtWall {
  Vec2 a = Vec2::Zero(), b = Vec2::Zero();  // along the first room's edge
  Vec2 axis = Vec2::UnitX();
  double thickness = 0;
  int room_a = -1, room_b = -1;
  int story = 0;
};

struct GroundTruth {
  std::vector<RoomSpec> rooms;
  std::vector<double> z_lo, z_hi;   // per room
  std::vector<double> volumes;      // per room
  std::vector<int> point_room;      // per point, -1 for outliers
  std::vector<std::uint8_t> outlier;
  std::vector<GtWall> shared_walls;
  Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();  // building box
};

struct Scene {
  PointCloud cloud;  // positions and true normals; no labels
  GroundTruth truth;
};

/// Throws ConfigError on overlapping rooms, self-intersecting or clockwise footprints.
void validate_scene(const SceneSpec& spec);

/// Deterministic for a fixed seed. Each surface gets round(density * area)
/// points with Gaussian noise along its normal; outliers are uniform in a shell
/// around the building at the building's height range, with random normals.
Scene generate(const SceneSpec& spec);

/// Shared walls between rooms of one story: antiparallel edges with a gap in (0, max_gap].
std::vector<GtWall> shared_walls(const SceneSpec& spec, double max_gap = 0.6);

SceneSpec scene_s1(std::uint64_t seed = 0);
SceneSpec scene_s2(std::uint64_t seed = 0);
SceneSpec scene_s3(std::uint64_t seed = 0);
SceneSpec scene_s4(std::uint64_t seed = 0);
/// S2 with a 1.5 m corridor leaving room 0 whose far end is open.
SceneSpec scene_s2_hallway(std::uint64_t seed = 0);
/// Adds a table and a tall cabinet per room.
SceneSpec with_clutter(SceneSpec spec);

/// "S1".."S4", "S2-hallway", optionally with "+clutter".
SceneSpec scene_by_name(const std::string& name, std::uint64_t seed = 0);

std::string scene_to_json(const SceneSpec& spec);
SceneSpec scene_from_json(const std::string& text);
std::string truth_to_json(const GroundTruth& truth);

}  // namespace recon
