#include "recon/cleaning.hpp"

#include <limits>
#include <set>

#include "recon/rng.hpp"

namespace recon {

InsideScore inside_score(const Vec3& position, const Vec3& normal, int point_index,
                         const std::vector<Occluder>& occluders, const CleanParams& params,
                         int iteration) {
  InsideScore s;
  s.point_index = point_index;
  s.rays = params.rays;
  Rng rng = make_stream(params.seed, 0x434c4e00ULL + static_cast<std::uint64_t>(iteration),
                        position_key(position));
  // Only the nearest roughly parallel plane counts as the point's own. Points
  // on a seam (floor next to a wall) must still see the other plane, or half
  // their rays escape through it.
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::size_t own = occluders.size();
  double own_dist = params.distance_threshold;
  for (std::size_t k = 0; k < occluders.size(); ++k) {
    if (std::abs(occluders[k].frame.normal.dot(normal)) < params.own_plane_cos) continue;
    double dist = std::abs(occluders[k].frame.signed_distance(position));
    if (dist <= own_dist) {
      own_dist = dist;
      own = k;
    }
  }
  for (int r = 0; r < params.rays; ++r) {
    Vec3 d = uniform_hemisphere(rng, normal);
    Vec3 inv = inverse_direction(d);
    for (std::size_t k = 0; k < occluders.size(); ++k) {
      if (k == own) continue;
      if (occluders[k].hit(position, d, inv, params.self_epsilon, inf) < inf) {
        ++s.hits;
        break;
      }
    }
  }
  return s;
}

std::vector<InsideScore> score_points(const PointCloud& cloud,
                                      const std::vector<DetectedPlane>& planes,
                                      const CleanParams& params, int iteration, Exec exec) {
  if (!cloud.has_normals()) throw PreconditionError("cleaning requires point normals");
  auto occ = make_occluders(planes);
  std::vector<InsideScore> out(cloud.size());
  const auto n = static_cast<std::int64_t>(cloud.size());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 512)
    for (std::int64_t i = 0; i < n; ++i)
      out[i] = inside_score(cloud.positions[i], cloud.normals[i], static_cast<int>(i), occ, params,
                            iteration);
  } else {
    for (std::int64_t i = 0; i < n; ++i)
      out[i] = inside_score(cloud.positions[i], cloud.normals[i], static_cast<int>(i), occ, params,
                            iteration);
  }
  return out;
}

CleanResult clean(const PointCloud& cloud, const std::vector<DetectedPlane>& planes,
                  const CleanParams& params, Exec exec) {
  CleanResult res;
  res.cloud = cloud;
  res.planes = planes;
  res.kept.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) res.kept[i] = static_cast<int>(i);

  for (int it = 0; it < params.iterations; ++it) {
    auto scores = score_points(res.cloud, res.planes, params, it, exec);
    std::set<int> removed;
    std::vector<int> survivors;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i].score() < params.threshold) {
        removed.insert(static_cast<int>(i));
      } else {
        survivors.push_back(static_cast<int>(i));
      }
    }
    res.removed_per_iteration.push_back(removed.size());
    if (removed.empty()) continue;

    std::vector<int> remap(res.cloud.size(), -1);
    for (std::size_t k = 0; k < survivors.size(); ++k) remap[survivors[k]] = static_cast<int>(k);
    PointCloud next = res.cloud.select(survivors);
    for (auto& plane : res.planes) {
      DetectedPlane shrunk = remove_inliers(plane, res.cloud, removed);
      for (int& i : shrunk.inliers) i = remap[i];
      plane = std::move(shrunk);
    }
    std::vector<int> kept;
    kept.reserve(survivors.size());
    for (int s : survivors) kept.push_back(res.kept[s]);
    res.kept = std::move(kept);
    res.cloud = std::move(next);
  }
  return res;
}

}  // namespace recon
