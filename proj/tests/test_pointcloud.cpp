#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <tuple>

#include "recon/pointcloud.hpp"
#include "recon/rng.hpp"

using namespace recon;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
  fs::path dir = fs::temp_directory_path() / "recon_test_pointcloud";
  fs::create_directories(dir);
  fs::path p = dir / name;
  std::ofstream(p, std::ios::binary) << content;
  return p;
}

PointCloud grid_on_plane(int n, const Vec3& o, const Vec3& u, const Vec3& v, double step) {
  PointCloud c;
  Rng rng = make_stream(7, 1, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double a = (i + 0.3 * uniform01(rng)) * step, b = (j + 0.3 * uniform01(rng)) * step;
      c.positions.push_back(o + a * u + b * v);
    }
  return c;
}

}  // namespace

TEST_CASE("xyz text load: positions, normals, errors") {
  auto p = temp_file("three.xyz", "0 0 0\n1 0 0\n0 1 0\n");
  PointCloud c = load(p);
  CHECK(c.size() == 3);
  CHECK_FALSE(c.has_normals());
  CHECK(c.positions[1] == Vec3(1, 0, 0));

  auto bad = temp_file("bad.xyz", "a b c\n");
  try {
    load(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.record() == 1);
  }

  CHECK_THROWS_AS(load(temp_file("empty.xyz", "")), EmptyCloudError);
  CHECK_THROWS_AS(load(fs::temp_directory_path() / "recon_test_pointcloud" / "nope.xyz"), IoError);
}

TEST_CASE("ascii ply with normals populates them") {
  auto p = temp_file("n.ply",
                     "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                     "property float z\nproperty float nx\nproperty float ny\nproperty float nz\n"
                     "end_header\n0 0 0 0 0 1\n1 2 3 1 0 0\n");
  PointCloud c = load(p);
  REQUIRE(c.size() == 2);
  REQUIRE(c.has_normals());
  CHECK(c.normals[0] == Vec3(0, 0, 1));
  CHECK(c.positions[1] == Vec3(1, 2, 3));
}

TEST_CASE("save then load keeps full precision") {
  PointCloud c;
  Rng rng = make_stream(3, 2, 0);
  for (int i = 0; i < 50; ++i) {
    c.positions.push_back(Vec3(uniform01(rng), uniform01(rng), uniform01(rng)) * 17.123456789);
    c.normals.push_back(uniform_sphere(rng));
  }
  fs::path dir = fs::temp_directory_path() / "recon_test_pointcloud";
  fs::create_directories(dir);
  for (auto [fmt, name] : {std::pair{CloudFormat::xyz_text, "rt.xyz"},
                           std::pair{CloudFormat::ply_ascii, "rt_a.ply"},
                           std::pair{CloudFormat::ply_binary, "rt_b.ply"}}) {
    save(c, dir / name, fmt);
    PointCloud r = load(dir / name);
    REQUIRE(r.size() == c.size());
    REQUIRE(r.has_normals());
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(r.positions[i] == c.positions[i]);
      CHECK(r.normals[i] == c.normals[i]);
    }
  }
}

TEST_CASE("normals of planar samples are axis aligned") {
  PointCloud z0 = grid_on_plane(10, Vec3(0, 0, 0), Vec3::UnitX(), Vec3::UnitY(), 0.1);
  auto est = estimate_normals(z0, 10);
  for (const auto& n : est.cloud.normals) CHECK(std::abs(std::abs(n.z()) - 1.0) < 1e-6);

  PointCloud x2 = grid_on_plane(10, Vec3(2, 0, 0), Vec3::UnitY(), Vec3::UnitZ(), 0.1);
  est = estimate_normals(x2, 10);
  for (const auto& n : est.cloud.normals) {
    CHECK(std::abs(std::abs(n.x()) - 1.0) < 1e-6);
    CHECK(std::abs(n.norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("sphere normals follow the radius") {
  PointCloud c;
  const int n = 2000;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    double z = 1.0 - 2.0 * (i + 0.5) / n;
    double r = std::sqrt(1 - z * z);
    c.positions.push_back(Vec3(r * std::cos(golden * i), r * std::sin(golden * i), z));
  }
  for (Exec exec : {Exec::serial, Exec::parallel}) {
    auto est = estimate_normals(c, 20, exec);
    for (int i = 0; i < n; ++i) {
      double cosang = std::abs(est.cloud.normals[i].dot(c.positions[i]));
      CHECK(cosang >= std::cos(deg2rad(5.0)));
      CHECK(std::abs(est.cloud.normals[i].norm() - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("degenerate neighbourhoods get +z and are flagged") {
  PointCloud c;
  for (int i = 0; i < 12; ++i) c.positions.push_back(Vec3(1, 1, 1));
  auto est = estimate_normals(c, 5);
  CHECK(est.degenerate.size() == 12);
  for (const auto& nrm : est.cloud.normals) CHECK(nrm == Vec3::UnitZ());
  CHECK_THROWS_AS(estimate_normals(c, 2), PreconditionError);
  CHECK_THROWS_AS(estimate_normals(c, 20), PreconditionError);
}

TEST_CASE("subsample: spacing examples, voxel oracle, idempotence") {
  PointCloud two;
  two.positions = {Vec3(0.001, 0.001, 0.001), Vec3(0.011, 0.001, 0.001)};
  CHECK(subsample(two, 0.02).size() == 1);
  two.positions[1] = Vec3(0.051, 0.001, 0.001);
  CHECK(subsample(two, 0.02).size() == 2);

  PointCloud cube;
  Rng rng = make_stream(11, 3, 0);
  for (int i = 0; i < 10000; ++i) cube.positions.push_back(Vec3(uniform01(rng), uniform01(rng), uniform01(rng)));
  std::set<std::tuple<long, long, long>> voxels;
  for (const auto& p : cube.positions)
    voxels.emplace(std::lround(std::floor(p.x() / 0.02)), std::lround(std::floor(p.y() / 0.02)),
                   std::lround(std::floor(p.z() / 0.02)));
  PointCloud s = subsample(cube, 0.02);
  CHECK(s.size() == voxels.size());
  CHECK(subsample(s, 0.02).size() == s.size());
  CHECK_THROWS_AS(subsample(cube, 0.0), PreconditionError);
}
