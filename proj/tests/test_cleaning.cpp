#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "recon/cleaning.hpp"
#include "recon/synthgen.hpp"

using namespace recon;

namespace {

// Plane with every pixel of a square grid set, without backing points.
DetectedPlane full_plane(const Vec3& normal, double offset, double half, double pixel) {
  DetectedPlane p;
  p.frame = PlaneFrame::make(normal, offset);
  auto& bm = p.occupancy;
  bm.pixel_size = pixel;
  bm.origin = Vec2(-half, -half) + p.frame.project(normal * offset);
  bm.width = bm.height = static_cast<int>(std::lround(2 * half / pixel));
  bm.bits.assign(static_cast<std::size_t>(bm.width) * bm.height, 1);
  return p;
}

std::vector<DetectedPlane> closed_cube(double size) {
  std::vector<DetectedPlane> planes;
  const double h = size / 2;
  for (int a = 0; a < 3; ++a)
    for (int s : {-1, 1}) {
      Vec3 n = Vec3::Zero();
      n[a] = s;
      planes.push_back(full_plane(n, h, h + 0.2, 0.2));
    }
  return planes;
}

// Hit fraction of hemisphere rays against a square ceiling at z = height, by
// direct geometry and a million rays.
double ceiling_oracle(const Vec3& normal, double height, double half) {
  Rng rng = make_stream(99, 1, 0);
  const int n = 1000000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    Vec3 d = uniform_hemisphere(rng, normal);
    if (d.z() <= 0) continue;
    double t = height / d.z();
    if (std::abs(t * d.x()) <= half && std::abs(t * d.y()) <= half) ++hits;
  }
  return static_cast<double>(hits) / n;
}

SceneSpec small(SceneSpec s) {
  s.density = 200;
  return s;
}

std::vector<DetectedPlane> planes_of(const PointCloud& cloud) {
  RansacParams rp;
  return detect_planes(cloud, rp);
}

}  // namespace

TEST_CASE("inside score: closed cube and empty space") {
  auto planes = closed_cube(4.0);
  auto occ = make_occluders(planes);
  CleanParams p;
  p.rays = 256;
  CHECK(inside_score(Vec3::Zero(), Vec3::UnitZ(), 0, occ, p, 0).score() == 1.0);
  CHECK(inside_score(Vec3::Zero(), Vec3::UnitZ(), 0, {}, p, 0).score() == 0.0);
}

TEST_CASE("inside score under a ceiling matches a Monte-Carlo oracle") {
  const double half = 100;
  std::vector<DetectedPlane> planes{full_plane(-Vec3::UnitZ(), -1.0, half, 0.5)};
  auto occ = make_occluders(planes);
  CleanParams p;
  p.rays = 256;
  for (Vec3 normal : {Vec3(Vec3::UnitZ()), Vec3(Vec3::UnitX())}) {
    const double expect = ceiling_oracle(normal, 1.0, half);
    double mean = 0;
    const int points = 40;
    for (int i = 0; i < points; ++i)
      mean += inside_score(Vec3(0.01 * i, 0.02 * i, 0), normal, i, occ, p, 0).score();
    mean /= points;
    CHECK(mean == doctest::Approx(expect).epsilon(0.03));
  }
  // A horizontal normal sees the ceiling with half its hemisphere.
  CHECK(ceiling_oracle(Vec3::UnitX(), 1.0, half) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("cleaning a closed room keeps every point") {
  SceneSpec s = scene_s1();
  s.outlier_count = 0;
  s.noise_sigma = 0;
  Scene scene = generate(s);
  auto planes = planes_of(scene.cloud);
  REQUIRE(planes.size() == 6);
  CleanResult r = clean(scene.cloud, planes, CleanParams{});
  CHECK(r.cloud.size() == scene.cloud.size());

  // With noise a few seam points end up behind a neighbouring plane or below
  // the lowest pixel row of a wall.
  s.noise_sigma = 0.005;
  scene = generate(s);
  r = clean(scene.cloud, planes_of(scene.cloud), CleanParams{});
  CHECK(r.cloud.size() >= 0.998 * scene.cloud.size());
}

TEST_CASE("cleaning removes outliers, is monotone and order independent") {
  Scene scene = generate(small(scene_s1()));
  auto planes = planes_of(scene.cloud);
  CleanResult r = clean(scene.cloud, planes, CleanParams{});

  std::size_t out_total = 0, out_kept = 0, in_total = 0, in_kept = 0;
  std::vector<std::uint8_t> kept(scene.cloud.size(), 0);
  for (int i : r.kept) kept[i] = 1;
  for (std::size_t i = 0; i < scene.cloud.size(); ++i) {
    if (scene.truth.outlier[i]) {
      ++out_total;
      out_kept += kept[i];
    } else {
      ++in_total;
      in_kept += kept[i];
    }
  }
  REQUIRE(out_total == 500);
  CHECK(out_total - out_kept >= 0.95 * out_total);
  CHECK(in_total - in_kept <= 0.01 * in_total);

  CHECK(std::is_sorted(r.kept.begin(), r.kept.end()));
  std::size_t removed = std::accumulate(r.removed_per_iteration.begin(), r.removed_per_iteration.end(), std::size_t{0});
  CHECK(removed + r.kept.size() == scene.cloud.size());
  for (std::size_t k = 0; k < planes.size(); ++k)
    CHECK(r.planes[k].occupancy.support_area() <= planes[k].occupancy.support_area());

  // Reverse the point order and map the planes' inliers along.
  const int n = static_cast<int>(scene.cloud.size());
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = n - 1 - i;
  PointCloud rev = scene.cloud.select(perm);
  auto rev_planes = planes;
  for (auto& p : rev_planes) {
    for (int& i : p.inliers) i = n - 1 - i;
    std::sort(p.inliers.begin(), p.inliers.end());
  }
  CleanResult rr = clean(rev, rev_planes, CleanParams{}, Exec::serial);
  std::vector<int> back;
  for (int i : rr.kept) back.push_back(n - 1 - i);
  std::sort(back.begin(), back.end());
  CHECK(back == r.kept);
}

TEST_CASE("threshold 0 removes nothing") {
  Scene scene = generate(small(scene_s1()));
  auto planes = planes_of(scene.cloud);
  CleanParams p;
  p.threshold = 0;
  CHECK(clean(scene.cloud, planes, p).kept.size() == scene.cloud.size());
}

TEST_CASE("serial and parallel scoring agree") {
  Scene scene = generate(small(scene_s1()));
  auto planes = planes_of(scene.cloud);
  auto a = score_points(scene.cloud, planes, CleanParams{}, 0, Exec::serial);
  auto b = score_points(scene.cloud, planes, CleanParams{}, 0, Exec::parallel);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].hits == b[i].hits);
}
