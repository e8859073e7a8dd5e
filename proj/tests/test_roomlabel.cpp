#include <doctest.h>

#include <Eigen/Dense>
#include <map>
#include <numeric>

#include "recon/roomlabel.hpp"
#include "recon/synthgen.hpp"

using namespace recon;

namespace {

VisibilityGraph graph_from(std::size_t n, const std::vector<std::pair<int, int>>& edges) {
  VisibilityGraph g;
  g.adj.resize(n);
  for (auto [a, b] : edges) {
    g.adj[a].push_back(b);
    g.adj[b].push_back(a);
  }
  for (auto& a : g.adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  return g;
}

void clique(std::vector<std::pair<int, int>>& edges, int first, int size) {
  for (int i = 0; i < size; ++i)
    for (int j = i + 1; j < size; ++j) edges.emplace_back(first + i, first + j);
}

// Textbook dense MCL: self loops, expansion, inflation, pruning, components of the limit.
std::vector<int> reference_mcl(const VisibilityGraph& g, double inflation) {
  const int n = static_cast<int>(g.node_count());
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (int j = 0; j < n; ++j)
    for (int i : g.adj[j]) m(i, j) = 1;
  auto normalize = [&] {
    for (int j = 0; j < n; ++j) m.col(j) /= m.col(j).sum();
  };
  normalize();
  for (int it = 0; it < 200; ++it) {
    m = (m * m).eval();
    normalize();
    m = m.unaryExpr([](double v) { return v < 1e-5 ? 0.0 : v; });
    normalize();
    m = m.array().pow(inflation).matrix();
    normalize();
    double chaos = 0;
    for (int j = 0; j < n; ++j) chaos = std::max(chaos, m.col(j).maxCoeff() - m.col(j).squaredNorm());
    if (chaos < 1e-8) break;
  }
  std::vector<int> comp(n, -1);
  int next = 0;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack{s};
    comp[s] = next;
    while (!stack.empty()) {
      int x = stack.back();
      stack.pop_back();
      for (int y = 0; y < n; ++y)
        if (comp[y] < 0 && (m(x, y) > 0 || m(y, x) > 0)) {
          comp[y] = next;
          stack.push_back(y);
        }
    }
    ++next;
  }
  return comp;
}

// Same partition, possibly under different numbering.
bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [x, okx] = ab.emplace(a[i], b[i]);
    auto [y, oky] = ba.emplace(b[i], a[i]);
    if (x->second != b[i] || y->second != a[i]) return false;
  }
  return true;
}

PointCloud square_patch(double side, double step, double z) {
  PointCloud c;
  for (double x = 0; x < side - 1e-12; x += step)
    for (double y = 0; y < side - 1e-12; y += step) c.positions.push_back(Vec3(x, y, z));
  return c;
}

DetectedPlane all_inliers(const PointCloud& c, std::size_t first, std::size_t last, const Vec3& n,
                          double offset) {
  DetectedPlane p;
  p.frame = PlaneFrame::make(n, offset);
  for (std::size_t i = first; i < last; ++i) p.inliers.push_back(static_cast<int>(i));
  p.occupancy = build_occupancy(p, c, 0.2);
  return p;
}

// Wall x = x0 spanning y in [0, 4], z in [0, 2.6] grown by `grow`, normal `sign` * x.
void add_wall(PointCloud& c, std::vector<DetectedPlane>& planes, double x0, int sign, double grow = 0) {
  std::size_t first = c.size();
  for (double y = 0.02 - grow; y < 4 + grow; y += 0.05)
    for (double z = 0.02 - grow; z < 2.6 + grow; z += 0.05) c.positions.push_back(Vec3(x0, y, z));
  planes.push_back(all_inliers(c, first, c.size(), Vec3(sign, 0, 0), sign * x0));
}

// Independent check of one visibility decision: sign change of the plane
// distance along the segment, then a direct look-up in the bitmap bits.
bool oracle_blocked(const Vec3& a, const Vec3& b, const std::vector<DetectedPlane>& planes, int own_a,
                    int own_b, double eps) {
  const double len = (b - a).norm();
  for (std::size_t k = 0; k < planes.size(); ++k) {
    const auto& f = planes[k].frame;
    const double da = f.normal.dot(a) - f.offset, db = f.normal.dot(b) - f.offset;
    if ((da > 0) == (db > 0) || da == db) continue;
    const double s = da / (da - db);
    if (s <= 0 || s >= 1) continue;
    if (static_cast<int>(k) == own_a && s * len < eps - 1e-9) continue;
    if (static_cast<int>(k) == own_b && (1 - s) * len < eps - 1e-9) continue;
    const Vec3 p = a + s * (b - a);
    const auto& bm = planes[k].occupancy;
    const double u = (f.u.dot(p) - bm.origin.x()) / bm.pixel_size;
    const double v = (f.v.dot(p) - bm.origin.y()) / bm.pixel_size;
    if (u < 0 || v < 0 || u >= bm.width || v >= bm.height) continue;
    if (bm.bits[static_cast<std::size_t>(v) * bm.width + static_cast<std::size_t>(u)]) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("patches: dense square, single inlier, plane partition") {
  PointCloud c = square_patch(1.0, 0.01, 0);
  std::vector<DetectedPlane> planes{all_inliers(c, 0, c.size(), Vec3::UnitZ(), 0)};
  PatchSet ps = build_patches(planes, c, 0.4);
  CHECK(ps.patches.size() >= 4);
  CHECK(ps.patches.size() <= 9);

  PointCloud one;
  one.positions.push_back(Vec3(1, 2, 0));
  std::vector<DetectedPlane> single{all_inliers(one, 0, 1, Vec3::UnitZ(), 0)};
  PatchSet s1 = build_patches(single, one, 0.4);
  REQUIRE(s1.patches.size() == 1);
  CHECK((s1.patches[0].center - Vec3(1.2, 2.2, 0)).norm() < 1e-12);

  PointCloud two = square_patch(1.0, 0.05, 0);
  const std::size_t half = two.size();
  for (std::size_t i = 0; i < half; ++i) two.positions.push_back(two.positions[i] + Vec3(0, 0, 2));
  std::vector<DetectedPlane> pl{all_inliers(two, 0, half, Vec3::UnitZ(), 0),
                                all_inliers(two, half, two.size(), -Vec3::UnitZ(), -2)};
  PatchSet ps2 = build_patches(pl, two, 0.4);
  for (const auto& p : ps2.patches) {
    const double z = p.center.z();
    CHECK(z == doctest::Approx(p.plane_index == 0 ? 0.0 : 2.0));
  }
}

TEST_CASE("visibility: open room versus a divider") {
  PointCloud c;
  std::vector<DetectedPlane> planes;
  add_wall(c, planes, 0, 1);
  add_wall(c, planes, 4, -1);
  PatchSet ps = build_patches(planes, c, 0.4);
  auto g = visibility_graph(ps, planes, 0.1);
  int a = -1, b = -1;
  for (std::size_t i = 0; i < ps.patches.size(); ++i) {
    const Vec3& m = ps.patches[i].center;
    if (std::abs(m.y() - 2) < 0.21 && std::abs(m.z() - 1.3) < 0.21) (ps.patches[i].plane_index == 0 ? a : b) = static_cast<int>(i);
  }
  REQUIRE(a >= 0);
  REQUIRE(b >= 0);
  CHECK(g.has_edge(a, b));

  // The divider overhangs the walls so coarse patch centres on their rim are covered too.
  add_wall(c, planes, 2, 1, 0.5);
  PatchSet ps3 = build_patches(planes, c, 0.4);
  auto g3 = visibility_graph(ps3, planes, 0.1);
  for (std::size_t i = 0; i < ps3.patches.size(); ++i)
    for (std::size_t j = 0; j < ps3.patches.size(); ++j)
      if (ps3.patches[i].plane_index == 0 && ps3.patches[j].plane_index == 1) CHECK_FALSE(g3.has_edge(i, j));
  CHECK_THROWS_AS(visibility_graph(ps3, planes, 0.0), PreconditionError);
}

TEST_CASE("two-room scene: no edges through the shared wall, oracle agrees, labels are pure") {
  SceneSpec spec = scene_s2();
  spec.density = 200;
  spec.outlier_count = 0;
  Scene scene = generate(spec);
  auto planes = detect_planes(scene.cloud, RansacParams{});
  PatchSet ps = build_patches(planes, scene.cloud, 0.4);
  auto g = visibility_graph(ps, planes, 0.1, Exec::parallel);
  auto gs = visibility_graph(ps, planes, 0.1, Exec::serial);
  CHECK(g.adj == gs.adj);

  std::vector<Vec3> ends;
  for (const auto& p : ps.patches) ends.push_back(p.center + 0.1 * p.normal);
  const int n = static_cast<int>(ps.patches.size());
  std::size_t cross = 0, mismatches = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const bool edge = g.has_edge(i, j);
      if (edge == oracle_blocked(ends[i], ends[j], planes, ps.patches[i].plane_index, ps.patches[j].plane_index, 0.1))
        ++mismatches;
      // Through the wall means from one room to the other across the wall's
      // extent. Patch centres on the outer seam can pass around its edges, and a
      // ceiling pixel straddling the wall has its centre inside it.
      const Vec3 &p = ends[i], &q = ends[j];
      if (!edge || !((p.x() < 4 && q.x() > 4.24) || (q.x() < 4 && p.x() > 4.24))) continue;
      const Vec3 m = p + (4.12 - p.x()) / (q.x() - p.x()) * (q - p);
      if (m.y() > 0.05 && m.y() < 4.95 && m.z() > 0.05 && m.z() < 2.55) ++cross;
    }
  CHECK(mismatches == 0);
  CHECK(cross == 0);

  Clustering cl = markov_cluster(g, MclParams{});
  RoomLabelSet labels = label_points(scene.cloud, planes, ps, cl);
  // Every label must be dominated by one true room.
  std::map<int, std::array<std::size_t, 2>> counts;
  std::size_t labeled = 0;
  for (std::size_t i = 0; i < labels.assignment.size(); ++i) {
    int l = labels.assignment[i];
    if (l < 0) continue;
    CHECK(l < labels.n);
    ++labeled;
    ++counts[l][scene.truth.point_room[i]];
  }
  std::size_t dominant = 0;
  for (auto& [l, c] : counts) dominant += std::max(c[0], c[1]);
  CHECK(labeled > 0.9 * scene.cloud.size());
  CHECK(static_cast<double>(dominant) / labeled >= 0.95);
}

TEST_CASE("MCL: cliques, a bridge, a complete graph") {
  std::vector<std::pair<int, int>> edges;
  clique(edges, 0, 10);
  clique(edges, 10, 10);
  auto disjoint = graph_from(20, edges);
  Clustering c = markov_cluster(disjoint, MclParams{});
  CHECK(c.count == 2);
  for (int i = 0; i < 20; ++i) CHECK(c.label[i] == (i < 10 ? 0 : 1));

  edges.emplace_back(9, 10);
  auto bridged = graph_from(20, edges);
  Clustering b = markov_cluster(bridged, MclParams{});
  CHECK(b.count == 2);
  CHECK(same_partition(b.label, reference_mcl(bridged, 2.0)));

  std::vector<std::pair<int, int>> k;
  clique(k, 0, 20);
  CHECK(markov_cluster(graph_from(20, k), MclParams{}).count == 1);

  CHECK(markov_cluster(VisibilityGraph{}, MclParams{}).count == 0);
}

TEST_CASE("MCL on random graphs: reference, node order, inflation, kernels") {
  for (int trial = 0; trial < 5; ++trial) {
    Rng rng = make_stream(17, 20, trial);
    const int n = 40;
    std::vector<std::pair<int, int>> edges;
    // Four loose communities with a few links between them.
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double p = (i / 10 == j / 10) ? 0.6 : 0.02;
        if (uniform01(rng) < p) edges.emplace_back(i, j);
      }
    auto g = graph_from(n, edges);
    Clustering c = markov_cluster(g, MclParams{});
    CHECK(same_partition(c.label, reference_mcl(g, 2.0)));

    MclParams serial_params;
    CHECK(markov_cluster(g, serial_params, Exec::serial).label == c.label);

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[uniform_index(rng, i + 1)]);
    std::vector<std::pair<int, int>> pe;
    for (auto [a, b] : edges) pe.emplace_back(perm[a], perm[b]);
    Clustering cp = markov_cluster(graph_from(n, pe), MclParams{});
    std::vector<int> back(n);
    for (int i = 0; i < n; ++i) back[i] = cp.label[perm[i]];
    CHECK(same_partition(back, c.label));

    int last = 0;
    for (double inflation : {1.4, 2.0, 2.6}) {
      MclParams p;
      p.inflation = inflation;
      int count = markov_cluster(g, p).count;
      CHECK(count >= last);
      last = count;
    }
  }
}

TEST_CASE("label_points: one cluster and points off every plane") {
  PointCloud c = square_patch(1.0, 0.05, 0);
  const std::size_t on = c.size();
  c.positions.push_back(Vec3(0.5, 0.5, 3));
  std::vector<DetectedPlane> planes{all_inliers(c, 0, on, Vec3::UnitZ(), 0)};
  PatchSet ps = build_patches(planes, c, 0.4);
  Clustering one;
  one.count = 1;
  one.label.assign(ps.patches.size(), 0);
  RoomLabelSet l = label_points(c, planes, ps, one);
  CHECK(l.n == 1);
  for (std::size_t i = 0; i < on; ++i) CHECK(l.assignment[i] == 0);
  CHECK(l.assignment[on] == -1);
}
