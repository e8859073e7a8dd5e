#include "recon/planes.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "recon/kdtree.hpp"
#include "recon/rng.hpp"

namespace recon {

PlaneFrame PlaneFrame::make(const Vec3& normal, double offset) {
  PlaneFrame f;
  f.normal = normal.normalized();
  f.offset = offset;
  if (std::abs(f.normal.z()) < 0.9) {
    f.u = Vec3::UnitZ().cross(f.normal).normalized();
  } else {
    f.u = (Vec3::UnitX() - f.normal.x() * f.normal).normalized();
  }
  f.v = f.normal.cross(f.u);
  return f;
}

std::optional<std::pair<int, int>> OccupancyBitmap::pixel_of(const Vec2& uv) const {
  if (empty()) return std::nullopt;
  double fx = std::floor((uv.x() - origin.x()) / pixel_size);
  double fy = std::floor((uv.y() - origin.y()) / pixel_size);
  if (fx < 0 || fy < 0 || fx >= width || fy >= height) return std::nullopt;
  return std::make_pair(static_cast<int>(fx), static_cast<int>(fy));
}

std::size_t OccupancyBitmap::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

OccupancyBitmap OccupancyBitmap::from_points(const std::vector<Vec2>& uvs, double pixel_size) {
  OccupancyBitmap bm;
  bm.pixel_size = pixel_size;
  if (uvs.empty()) return bm;
  Vec2 mn = uvs.front(), mx = uvs.front();
  for (const auto& p : uvs) {
    mn = mn.cwiseMin(p);
    mx = mx.cwiseMax(p);
  }
  bm.origin = mn;
  bm.width = static_cast<int>(std::floor((mx.x() - mn.x()) / pixel_size)) + 1;
  bm.height = static_cast<int>(std::floor((mx.y() - mn.y()) / pixel_size)) + 1;
  bm.bits.assign(static_cast<std::size_t>(bm.width) * bm.height, 0);
  for (const auto& p : uvs) {
    int ix = std::min(bm.width - 1, static_cast<int>(std::floor((p.x() - mn.x()) / pixel_size)));
    int iy = std::min(bm.height - 1, static_cast<int>(std::floor((p.y() - mn.y()) / pixel_size)));
    bm.set(ix, iy);
  }
  return bm;
}

OccupancyBitmap build_occupancy(const DetectedPlane& plane, const PointCloud& cloud,
                                double pixel_size) {
  std::vector<Vec2> uvs;
  uvs.reserve(plane.inliers.size());
  for (int i : plane.inliers) uvs.push_back(plane.frame.project(cloud.positions[i]));
  return OccupancyBitmap::from_points(uvs, pixel_size);
}

DetectedPlane remove_inliers(const DetectedPlane& plane, const PointCloud& cloud,
                             const std::set<int>& removed) {
  if (removed.empty()) return plane;
  DetectedPlane out;
  out.frame = plane.frame;
  for (int i : plane.inliers)
    if (!removed.count(i)) out.inliers.push_back(i);
  // Survivors keep the original pixel grid so no bit can appear that was not
  // set before; the grid is then cropped to the pixels still in use.
  const OccupancyBitmap& old = plane.occupancy;
  if (out.inliers.empty() || old.empty()) {
    out.occupancy = build_occupancy(out, cloud, old.pixel_size);
    return out;
  }
  std::vector<std::pair<int, int>> hit;
  hit.reserve(out.inliers.size());
  int x0 = old.width, y0 = old.height, x1 = -1, y1 = -1;
  for (int i : out.inliers) {
    Vec2 uv = plane.frame.project(cloud.positions[i]);
    int ix = std::clamp(static_cast<int>(std::floor((uv.x() - old.origin.x()) / old.pixel_size)), 0, old.width - 1);
    int iy = std::clamp(static_cast<int>(std::floor((uv.y() - old.origin.y()) / old.pixel_size)), 0, old.height - 1);
    hit.emplace_back(ix, iy);
    x0 = std::min(x0, ix);
    y0 = std::min(y0, iy);
    x1 = std::max(x1, ix);
    y1 = std::max(y1, iy);
  }
  OccupancyBitmap& bm = out.occupancy;
  bm.pixel_size = old.pixel_size;
  bm.origin = old.origin + Vec2(x0 * old.pixel_size, y0 * old.pixel_size);
  bm.width = x1 - x0 + 1;
  bm.height = y1 - y0 + 1;
  bm.bits.assign(static_cast<std::size_t>(bm.width) * bm.height, 0);
  for (auto [ix, iy] : hit) bm.set(ix - x0, iy - y0);
  return out;
}

PlaneFrame fit_plane(const PointCloud& cloud, const std::vector<int>& indices, const Vec3& hint) {
  Vec3 mean = Vec3::Zero();
  for (int i : indices) mean += cloud.positions[i];
  mean /= static_cast<double>(indices.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int i : indices) {
    Vec3 d = cloud.positions[i] - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  Vec3 n = es.eigenvectors().col(0).normalized();
  if (n.dot(hint) < 0) n = -n;
  return PlaneFrame::make(n, n.dot(mean));
}

namespace {

struct Candidate {
  Vec3 normal;
  double offset = 0;
  std::vector<int> members;  // largest connected inlier component
  double area = 0;           // occupied cluster cells * eps^2

  std::size_t score() const { return members.size(); }
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.score() != b.score()) return a.score() > b.score();
  if (a.area != b.area) return a.area > b.area;
  return std::lexicographical_compare(a.normal.data(), a.normal.data() + 3, b.normal.data(),
                                      b.normal.data() + 3);
}

// Inliers of (n, d) among `alive`, reduced to the largest 8-connected component
// of their projection on a grid of cell size `eps`.
void score(Candidate& c, const PointCloud& cloud, const std::vector<int>& alive,
           const RansacParams& prm) {
  const double cos_tol = std::cos(deg2rad(prm.normal_threshold_deg));
  PlaneFrame frame = PlaneFrame::make(c.normal, c.offset);
  std::vector<int> inl;
  for (int i : alive) {
    if (std::abs(frame.signed_distance(cloud.positions[i])) > prm.distance_threshold) continue;
    if (std::abs(cloud.normals[i].dot(c.normal)) < cos_tol) continue;
    inl.push_back(i);
  }
  c.members.clear();
  c.area = 0;
  if (inl.empty()) return;
  const double eps = prm.cluster_epsilon;
  auto key = [](std::int64_t x, std::int64_t y) { return (x << 32) ^ (y & 0xffffffffLL); };
  std::unordered_map<std::int64_t, int> cell_of;
  std::vector<std::pair<std::int64_t, std::int64_t>> cells;
  std::vector<int> point_cell(inl.size());
  for (std::size_t k = 0; k < inl.size(); ++k) {
    Vec2 uv = frame.project(cloud.positions[inl[k]]);
    auto cx = static_cast<std::int64_t>(std::floor(uv.x() / eps));
    auto cy = static_cast<std::int64_t>(std::floor(uv.y() / eps));
    auto [it, ins] = cell_of.try_emplace(key(cx, cy), static_cast<int>(cells.size()));
    if (ins) cells.emplace_back(cx, cy);
    point_cell[k] = it->second;
  }
  std::vector<int> comp(cells.size(), -1);
  std::vector<std::size_t> comp_points;
  std::vector<int> comp_cells;
  int ncomp = 0;
  std::vector<int> stack;
  for (std::size_t s = 0; s < cells.size(); ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = ncomp;
    int ncells = 0;
    stack.push_back(static_cast<int>(s));
    while (!stack.empty()) {
      int cur = stack.back();
      stack.pop_back();
      ++ncells;
      auto [cx, cy] = cells[cur];
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy) {
          auto it = cell_of.find(key(cx + dx, cy + dy));
          if (it != cell_of.end() && comp[it->second] < 0) {
            comp[it->second] = ncomp;
            stack.push_back(it->second);
          }
        }
    }
    comp_cells.push_back(ncells);
    ++ncomp;
  }
  comp_points.assign(ncomp, 0);
  for (int pc : point_cell) ++comp_points[comp[pc]];
  int best = 0;
  for (int k = 1; k < ncomp; ++k)
    if (comp_points[k] > comp_points[best]) best = k;
  for (std::size_t k = 0; k < inl.size(); ++k)
    if (comp[point_cell[k]] == best) c.members.push_back(inl[k]);
  c.area = comp_cells[best] * eps * eps;
}

void score_all(std::vector<Candidate>& cands, const PointCloud& cloud,
               const std::vector<int>& alive, const RansacParams& prm, Exec exec) {
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(cands.size()); ++k)
      score(cands[k], cloud, alive, prm);
  } else {
    for (auto& c : cands) score(c, cloud, alive, prm);
  }
}

}  // namespace

std::vector<DetectedPlane> detect_planes(const PointCloud& cloud, const RansacParams& prm,
                                         Exec exec) {
  if (!cloud.has_normals()) throw PreconditionError("detect_planes requires point normals");
  std::vector<DetectedPlane> planes;
  if (cloud.size() < prm.min_points || cloud.size() < 3) return planes;

  const double cos_tol = std::cos(deg2rad(prm.normal_threshold_deg));
  const std::vector<double> radii = {0.3, 0.6, 1.2, 2.4};
  const double levels = static_cast<double>(radii.size());
  KdTree tree(cloud.positions);
  std::vector<char> alive_mask(cloud.size(), 1);
  std::vector<int> alive(cloud.size());
  for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = static_cast<int>(i);

  Rng rng = make_stream(prm.seed, 0x52414e53, 0);
  std::vector<Candidate> pool;
  std::size_t draws = 0;

  auto found_probability = [&](std::size_t n) {
    double p = static_cast<double>(n) / (static_cast<double>(alive.size()) * levels);
    p = std::min(p, 1.0);
    return 1.0 - std::pow(1.0 - p, static_cast<double>(draws));
  };

  while (alive.size() >= prm.min_points && draws < prm.max_draws) {
    std::vector<Candidate> fresh;
    for (std::size_t b = 0; b < prm.batch; ++b) {
      ++draws;
      int i1 = alive[uniform_index(rng, alive.size())];
      double r = radii[uniform_index(rng, radii.size())];
      std::vector<int> nb;
      for (int j : tree.radius(cloud.positions[i1], r))
        if (alive_mask[j] && j != i1) nb.push_back(j);
      if (nb.size() < 2) continue;
      std::sort(nb.begin(), nb.end());
      std::size_t a = uniform_index(rng, nb.size());
      std::size_t c = uniform_index(rng, nb.size() - 1);
      if (c >= a) ++c;
      const Vec3& p1 = cloud.positions[i1];
      Vec3 n = (cloud.positions[nb[a]] - p1).cross(cloud.positions[nb[c]] - p1);
      if (n.norm() < 1e-12) continue;
      n.normalize();
      if (std::abs(n.dot(cloud.normals[i1])) < cos_tol ||
          std::abs(n.dot(cloud.normals[nb[a]])) < cos_tol ||
          std::abs(n.dot(cloud.normals[nb[c]])) < cos_tol)
        continue;
      if (n.dot(cloud.normals[i1]) < 0) n = -n;
      Candidate cand;
      cand.normal = n;
      cand.offset = n.dot(p1);
      fresh.push_back(std::move(cand));
    }
    score_all(fresh, cloud, alive, prm, exec);
    for (auto& c : fresh)
      if (c.score() > 0) pool.push_back(std::move(c));
    std::sort(pool.begin(), pool.end(), better);
    if (pool.size() > 64) pool.resize(64);

    if (pool.empty() || pool.front().score() < prm.min_points) {
      if (found_probability(prm.min_points) >= 1.0 - prm.miss_probability) break;
      continue;
    }
    if (found_probability(pool.front().score()) < 1.0 - prm.miss_probability) continue;

    Candidate best = std::move(pool.front());
    pool.erase(pool.begin());
    PlaneFrame refit = fit_plane(cloud, best.members, best.normal);
    Candidate refined;
    refined.normal = refit.normal;
    refined.offset = refit.offset;
    score(refined, cloud, alive, prm);
    if (refined.score() < prm.min_points) continue;

    // Orient the plane with the majority of its inlier normals.
    double agree = 0;
    for (int i : refined.members) agree += cloud.normals[i].dot(refined.normal);
    Vec3 n = agree < 0 ? Vec3(-refined.normal) : refined.normal;
    double d = agree < 0 ? -refined.offset : refined.offset;

    DetectedPlane plane;
    plane.frame = PlaneFrame::make(n, d);
    plane.inliers = refined.members;
    std::sort(plane.inliers.begin(), plane.inliers.end());
    plane.occupancy = build_occupancy(plane, cloud, prm.pixel_size);
    for (int i : plane.inliers) alive_mask[i] = 0;
    std::vector<int> next;
    next.reserve(alive.size() - plane.inliers.size());
    for (int i : alive)
      if (alive_mask[i]) next.push_back(i);
    alive = std::move(next);
    planes.push_back(std::move(plane));

    score_all(pool, cloud, alive, prm, exec);
    std::erase_if(pool, [](const Candidate& c) { return c.score() == 0; });
    std::sort(pool.begin(), pool.end(), better);
  }
  return planes;
}

}  // namespace recon
