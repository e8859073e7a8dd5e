#pragma once

#include <cstdint>
#include <vector>

#include "recon/planes.hpp"
#include "recon/pointcloud.hpp"
#include "recon/raycast.hpp"

namespace recon {

/// Fraction of hemisphere rays from a point that hit occupied plane pixels.
struct InsideScore {
  int point_index = -1;
  int hits = 0;
  int rays = 0;
  double score() const { return rays ? static_cast<double>(hits) / rays : 0.0; }
};

struct CleanParams {
  double threshold = 0.5;
  int iterations = 3;
  int rays = 64;
  double self_epsilon = 1e-6;        // hits closer than this along the ray are ignored
  double distance_threshold = 0.01;  // planes this close to the origin are the point's own
  double own_plane_cos = 0.7;        // ... if also within about 45 degrees of its normal
  std::uint64_t seed = 0;
};

/// Casts `params.rays` uniform rays into the hemisphere around `normal`.
/// Randomness is keyed on the position, so scores do not depend on point order.
InsideScore inside_score(const Vec3& position, const Vec3& normal, int point_index,
                         const std::vector<Occluder>& occluders, const CleanParams& params,
                         int iteration);

/// Scores for every point of the cloud (one cleaning iteration).
std::vector<InsideScore> score_points(const PointCloud& cloud,
                                      const std::vector<DetectedPlane>& planes,
                                      const CleanParams& params, int iteration, Exec exec);

struct CleanResult {
  PointCloud cloud;                   // survivors, in input order
  std::vector<DetectedPlane> planes;  // inliers re-indexed into `cloud`
  std::vector<int> kept;              // survivor indices into the input cloud
  std::vector<std::size_t> removed_per_iteration;
};

/// Iterated outlier removal: drop points with score < threshold, shrink the
/// planes' inliers and bitmaps, repeat.
CleanResult clean(const PointCloud& cloud, const std::vector<DetectedPlane>& planes,
                  const CleanParams& params, Exec exec = Exec::parallel);

}  // namespace recon
