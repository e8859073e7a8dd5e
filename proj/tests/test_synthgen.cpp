#include <doctest.h>

#include <json.hpp>

#include "recon/synthgen.hpp"

using namespace recon;

namespace {

// Distance from p to the nearest sampled surface of an axis-aligned box room.
double box_surface_distance(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  double d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    d = std::min(d, std::abs(p[k] - lo[k]));
    d = std::min(d, std::abs(p[k] - hi[k]));
  }
  return d;
}

double footprint_area(const std::vector<Vec2>& poly) {
  double a = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - p.y() * q.x();
  }
  return 0.5 * a;
}

}  // namespace

TEST_CASE("noise-free S1 points lie on the room surfaces") {
  auto spec = scene_s1(3);
  spec.noise_sigma = 0;
  auto scene = generate(spec);
  const auto& gt = scene.truth;
  std::size_t interior = 0;
  for (std::size_t i = 0; i < scene.cloud.size(); ++i) {
    if (gt.outlier[i]) continue;
    ++interior;
    const Vec3& p = scene.cloud.positions[i];
    CHECK(box_surface_distance(p, Vec3(0, 0, 0), Vec3(4, 5, 2.6)) < 1e-12);
    CHECK((p.array() >= -1e-12).all());
    CHECK((p.array() <= Vec3(4, 5, 2.6).array() + 1e-12).all());
  }
  // Surface area 2 * 20 + 2.6 * 18 = 86.8 m^2.
  CHECK(interior == 86.8 * spec.density);
}

TEST_CASE("point counts follow density and outliers stay in the shell") {
  for (const char* name : {"S1", "S2", "S3", "S4", "S2-hallway", "S2+clutter"}) {
    CAPTURE(name);
    auto spec = scene_by_name(name, 11);
    auto scene = generate(spec);
    const auto& gt = scene.truth;
    REQUIRE(gt.point_room.size() == scene.cloud.size());
    REQUIRE(gt.outlier.size() == scene.cloud.size());
    std::size_t outliers = 0;
    for (std::size_t i = 0; i < scene.cloud.size(); ++i) {
      if (!gt.outlier[i]) {
        CHECK(gt.point_room[i] >= 0);
        CHECK(gt.point_room[i] < static_cast<int>(spec.rooms.size()));
        continue;
      }
      ++outliers;
      CHECK(gt.point_room[i] == -1);
      const Vec3& p = scene.cloud.positions[i];
      const double dx = std::max({gt.lo.x() - p.x(), 0.0, p.x() - gt.hi.x()});
      const double dy = std::max({gt.lo.y() - p.y(), 0.0, p.y() - gt.hi.y()});
      CHECK(std::max(dx, dy) >= spec.outlier_min_distance);
      CHECK(std::max(dx, dy) <= spec.outlier_max_distance);
      CHECK(p.z() >= gt.lo.z());
      CHECK(p.z() <= gt.hi.z());
      CHECK(scene.cloud.normals[i].norm() == doctest::Approx(1));
    }
    CHECK(outliers == 500);

    // Expected interior count from the footprints, independent of the sampler.
    double area = 0;
    for (const auto& r : spec.rooms) {
      const double h = spec.stories[r.story].height;
      area += 2 * footprint_area(r.polygon);
      const std::size_t n = r.polygon.size();
      for (std::size_t e = 0; e < n; ++e)
        if (!std::count(r.open_edges.begin(), r.open_edges.end(), static_cast<int>(e)))
          area += (r.polygon[(e + 1) % n] - r.polygon[e]).norm() * h;
    }
    for (const auto& c : spec.clutter) {
      const Vec2 d = c.hi - c.lo;
      area += d.x() * d.y() + 2 * (d.x() + d.y()) * c.height;
    }
    const double expect = spec.density * area;
    CHECK(std::abs(double(scene.cloud.size() - outliers) - expect) <= 0.01 * expect);

    for (std::size_t r = 0; r < spec.rooms.size(); ++r)
      CHECK(gt.volumes[r] == doctest::Approx(footprint_area(spec.rooms[r].polygon) *
                                             spec.stories[spec.rooms[r].story].height));
  }
}

TEST_CASE("generation is deterministic per seed") {
  auto a = generate(scene_s2(5));
  auto b = generate(scene_s2(5));
  auto c = generate(scene_s2(6));
  REQUIRE(a.cloud.size() == b.cloud.size());
  CHECK(a.cloud.positions == b.cloud.positions);
  CHECK(a.truth.point_room == b.truth.point_room);
  CHECK(a.cloud.positions != c.cloud.positions);
}

TEST_CASE("shared walls of the canned scenes") {
  auto s2 = shared_walls(scene_s2());
  REQUIRE(s2.size() == 1);
  CHECK(s2[0].thickness == doctest::Approx(0.24));
  CHECK(std::abs(s2[0].axis.x()) == doctest::Approx(0).epsilon(1e-12));
  CHECK((s2[0].b - s2[0].a).norm() == doctest::Approx(5));

  auto s3 = shared_walls(scene_s3());
  CHECK(s3.size() == 2);
  for (const auto& w : s3) CHECK(w.room_a / 2 == w.room_b / 2);

  auto s4 = shared_walls(scene_s4());
  REQUIRE(s4.size() == 3);  // A-B, A-C, B-C
  for (const auto& w : s4) CHECK(w.thickness == doctest::Approx(0.24));
  // The slanted east wall of room 2 is 30 degrees from the y axis.
  const auto& c = scene_s4().rooms[2].polygon;
  const Vec2 d = (c[2] - c[1]).normalized();
  CHECK(rad2deg(std::acos(d.y())) == doctest::Approx(30));
}

TEST_CASE("invalid scenes are rejected") {
  auto s = scene_s2();
  s.rooms[1].polygon[0].x() = 3.0;  // overlaps room 0
  CHECK_THROWS_AS(validate_scene(s), ConfigError);
  s = scene_s1();
  std::reverse(s.rooms[0].polygon.begin(), s.rooms[0].polygon.end());
  CHECK_THROWS_AS(validate_scene(s), ConfigError);
  s = scene_s1();
  s.rooms[0].polygon = {Vec2(0, 0), Vec2(2, 2), Vec2(2, 0), Vec2(0, 2)};
  CHECK_THROWS_AS(validate_scene(s), ConfigError);
  s = scene_s1();
  s.density = 0;
  CHECK_THROWS_AS(validate_scene(s), ConfigError);
  CHECK_THROWS_AS(scene_by_name("S9"), ConfigError);
  CHECK_THROWS_AS(scene_from_json("{"), ConfigError);
  CHECK_THROWS_AS(scene_from_json(R"({"rooms": [{"polygon": [[0,0],[1,0]]}]})"), ConfigError);
}

TEST_CASE("scene spec round-trips through JSON") {
  auto s = with_clutter(scene_s4(9));
  auto back = scene_from_json(scene_to_json(s));
  CHECK(back.name == s.name);
  CHECK(back.seed == 9);
  REQUIRE(back.rooms.size() == s.rooms.size());
  for (std::size_t r = 0; r < s.rooms.size(); ++r) CHECK(back.rooms[r].polygon == s.rooms[r].polygon);
  CHECK(back.clutter.size() == s.clutter.size());
  CHECK(generate(back).cloud.positions == generate(s).cloud.positions);
  auto j = nlohmann::json::parse(truth_to_json(generate(scene_s1()).truth));
  CHECK(j["outliers"] == 500);
  CHECK(j["rooms"][0]["volume"].get<double>() == doctest::Approx(52));
}
