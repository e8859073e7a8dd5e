#include "recon/roomlabel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace recon {

PatchSet build_patches(const std::vector<DetectedPlane>& planes, const PointCloud& cloud,
                       double patch_size) {
  if (!(patch_size > 0)) throw PreconditionError("patch_size must be positive");
  PatchSet ps;
  ps.patch_size = patch_size;
  for (std::size_t p = 0; p < planes.size(); ++p) {
    OccupancyBitmap coarse = build_occupancy(planes[p], cloud, patch_size);
    std::vector<int> ids(coarse.bits.size(), -1);
    for (int iy = 0; iy < coarse.height; ++iy)
      for (int ix = 0; ix < coarse.width; ++ix) {
        if (!coarse.get(ix, iy)) continue;
        ids[static_cast<std::size_t>(iy) * coarse.width + ix] = static_cast<int>(ps.patches.size());
        Patch patch;
        patch.plane_index = static_cast<int>(p);
        patch.ix = ix;
        patch.iy = iy;
        patch.center = planes[p].frame.lift(coarse.pixel_center(ix, iy));
        patch.normal = planes[p].frame.normal;
        ps.patches.push_back(patch);
      }
    ps.coarse.push_back(std::move(coarse));
    ps.pixel_patch.push_back(std::move(ids));
  }
  return ps;
}

std::size_t VisibilityGraph::edge_count() const {
  std::size_t s = 0;
  for (const auto& a : adj) s += a.size();
  return s / 2;
}

bool VisibilityGraph::has_edge(int i, int j) const {
  return std::binary_search(adj[i].begin(), adj[i].end(), j);
}

bool segment_blocked(const Vec3& a, const Vec3& b, const std::vector<Occluder>& occluders,
                     int own_a, int own_b, double eps) {
  const Vec3 d = b - a;
  const double len = d.norm();
  if (len <= 0) return false;
  const Vec3 inv = inverse_direction(d);
  const double tol = 1e-9;
  for (std::size_t k = 0; k < occluders.size(); ++k) {
    double t = occluders[k].hit(a, d, inv, 0.0, 1.0);
    if (!(t < std::numeric_limits<double>::infinity())) continue;
    if (static_cast<int>(k) == own_a && t * len < eps - tol) continue;
    if (static_cast<int>(k) == own_b && (1.0 - t) * len < eps - tol) continue;
    return true;
  }
  return false;
}

VisibilityGraph visibility_graph(const PatchSet& ps, const std::vector<DetectedPlane>& planes,
                                 double eps, Exec exec) {
  if (!(eps > 0)) throw PreconditionError("visibility epsilon must be positive");
  auto occ = make_occluders(planes);
  const auto n = static_cast<std::int64_t>(ps.patches.size());
  std::vector<Vec3> ends(n);
  for (std::int64_t i = 0; i < n; ++i) ends[i] = ps.patches[i].center + eps * ps.patches[i].normal;
  // Row i stores its visible partners j > i.
  std::vector<std::vector<int>> upper(n);
  auto row = [&](std::int64_t i) {
    for (std::int64_t j = i + 1; j < n; ++j)
      if (!segment_blocked(ends[i], ends[j], occ, ps.patches[i].plane_index,
                           ps.patches[j].plane_index, eps))
        upper[i].push_back(static_cast<int>(j));
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 8)
    for (std::int64_t i = 0; i < n; ++i) row(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) row(i);
  }
  VisibilityGraph g;
  g.adj.resize(n);
  for (std::int64_t i = 0; i < n; ++i)
    for (int j : upper[i]) {
      g.adj[i].push_back(j);
      g.adj[j].push_back(static_cast<int>(i));
    }
  for (auto& a : g.adj) std::sort(a.begin(), a.end());
  return g;
}

namespace {

void normalize(std::vector<std::pair<int, double>>& col) {
  double s = 0;
  for (auto& e : col) s += e.second;
  if (s > 0)
    for (auto& e : col) e.second /= s;
}

// Prune small entries, keep the largest `keep_top`, renormalize, inflate, renormalize.
void finish_column(std::vector<std::pair<int, double>>& col, const MclParams& prm) {
  normalize(col);
  std::erase_if(col, [&](const auto& e) { return e.second < prm.prune_epsilon; });
  if (col.size() > prm.keep_top) {
    std::nth_element(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(prm.keep_top), col.end(),
                     [](const auto& a, const auto& b) {
                       return a.second != b.second ? a.second > b.second : a.first < b.first;
                     });
    col.resize(prm.keep_top);
    std::sort(col.begin(), col.end());
  }
  for (auto& e : col) e.second = std::pow(e.second, prm.inflation);
  normalize(col);
}

}  // namespace

SparseColumns mcl_step(const SparseColumns& m, const MclParams& prm, Exec exec) {
  SparseColumns out;
  out.n = m.n;
  out.cols.resize(m.n);
  const auto n = static_cast<std::int64_t>(m.n);
  auto body = [&](std::vector<double>& acc, std::vector<int>& touched, std::int64_t j) {
    touched.clear();
    for (const auto& [k, w] : m.cols[j])
      for (const auto& [i, v] : m.cols[k]) {
        if (acc[i] == 0.0) touched.push_back(i);
        acc[i] += w * v;
      }
    std::sort(touched.begin(), touched.end());
    auto& col = out.cols[j];
    col.reserve(touched.size());
    for (int i : touched) {
      if (acc[i] > 0) col.emplace_back(i, acc[i]);
      acc[i] = 0.0;
    }
    finish_column(col, prm);
  };
  if (exec == Exec::parallel) {
#pragma omp parallel
    {
      std::vector<double> acc(m.n, 0.0);
      std::vector<int> touched;
#pragma omp for schedule(dynamic, 16)
      for (std::int64_t j = 0; j < n; ++j) body(acc, touched, j);
    }
  } else {
    std::vector<double> acc(m.n, 0.0);
    std::vector<int> touched;
    for (std::int64_t j = 0; j < n; ++j) body(acc, touched, j);
  }
  return out;
}

double mcl_chaos(const SparseColumns& m) {
  double worst = 0;
  for (const auto& col : m.cols) {
    double mx = 0, sq = 0;
    for (const auto& e : col) {
      mx = std::max(mx, e.second);
      sq += e.second * e.second;
    }
    worst = std::max(worst, mx - sq);
  }
  return worst;
}

Clustering markov_cluster(const VisibilityGraph& graph, const MclParams& prm, Exec exec) {
  if (!(prm.inflation > 1.0)) throw PreconditionError("MCL inflation must exceed 1");
  Clustering res;
  const std::size_t n = graph.node_count();
  if (n == 0) return res;
  SparseColumns m;
  m.n = n;
  m.cols.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto& col = m.cols[j];
    col.emplace_back(static_cast<int>(j), 1.0);
    for (int i : graph.adj[j]) col.emplace_back(i, 1.0);
    std::sort(col.begin(), col.end());
    normalize(col);
  }
  for (res.iterations = 0; res.iterations < prm.max_iterations; ++res.iterations) {
    m = mcl_step(m, prm, exec);
    if (mcl_chaos(m) < prm.chaos_tolerance) {
      ++res.iterations;
      break;
    }
  }
  // Weakly connected components of the nonzero pattern.
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t j = 0; j < n; ++j)
    for (const auto& [i, v] : m.cols[j]) {
      int a = find(i), b = find(static_cast<int>(j));
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  res.label.assign(n, -1);
  std::vector<int> root_label(n, -1);
  for (std::size_t v = 0; v < n; ++v) {
    int r = find(static_cast<int>(v));
    if (root_label[r] < 0) root_label[r] = res.count++;
    res.label[v] = root_label[r];
  }
  return res;
}

RoomLabelSet label_points(const PointCloud& cloud, const std::vector<DetectedPlane>& planes,
                          const PatchSet& ps, const Clustering& patch_labels) {
  RoomLabelSet out;
  out.n = patch_labels.count;
  out.assignment.assign(cloud.size(), -1);
  for (std::size_t p = 0; p < planes.size() && p < ps.coarse.size(); ++p) {
    const auto& coarse = ps.coarse[p];
    for (int i : planes[p].inliers) {
      auto px = coarse.pixel_of(planes[p].frame.project(cloud.positions[i]));
      if (!px) continue;
      int patch = ps.pixel_patch[p][static_cast<std::size_t>(px->second) * coarse.width + px->first];
      if (patch >= 0) out.assignment[i] = patch_labels.label[patch];
    }
  }
  return out;
}

}  // namespace recon
