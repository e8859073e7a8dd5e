#include <doctest.h>

#include <set>

#include "recon/arrangement.hpp"
#include "recon/complex.hpp"
#include "recon/rng.hpp"
#include "fixtures.hpp"

using namespace recon::fixtures;

using namespace recon;

namespace {

QLine vline(long x) { return {1, 0, x}; }
QLine hline(long y) { return {0, 1, y}; }
QPoint pt(long x, long y) { return {x, y}; }

bool strictly_inside(const QPoint& p, const QPoint& lo, const QPoint& hi) {
  return p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y;
}

bool crosses(const QLine& l, const QPoint& lo, const QPoint& hi) {
  bool pos = false, neg = false;
  for (const QPoint& c : {lo, QPoint{hi.x, lo.y}, hi, QPoint{lo.x, hi.y}}) {
    pos = pos || sgn(l.eval(c)) > 0;
    neg = neg || sgn(l.eval(c)) < 0;
  }
  return pos && neg;
}

// Face count by incremental counting: each line adds one face per piece it is cut into.
std::size_t face_count_oracle(const std::vector<QLine>& lines, const QPoint& lo, const QPoint& hi) {
  std::size_t faces = 1;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!crosses(lines[i], lo, hi)) continue;
    std::set<std::pair<Rational, Rational>> pts;
    for (std::size_t j = 0; j < i; ++j) {
      const auto &l = lines[i], &m = lines[j];
      Rational det = l.a * m.b - l.b * m.a;
      if (det == 0) continue;
      QPoint p{(l.c * m.b - l.b * m.c) / det, (l.a * m.c - l.c * m.a) / det};
      if (strictly_inside(p, lo, hi)) pts.emplace(p.x, p.y);
    }
    faces += pts.size() + 1;
  }
  return faces;
}

std::vector<QLine> random_lines(Rng& rng, int n) {
  std::vector<QLine> out;
  for (int i = 0; i < n; ++i) {
    // Through two random points of a coarse grid so that concurrent lines occur.
    long x0 = static_cast<long>(uniform_index(rng, 11)), y0 = static_cast<long>(uniform_index(rng, 11));
    long x1 = static_cast<long>(uniform_index(rng, 11)), y1 = static_cast<long>(uniform_index(rng, 11));
    if (x0 == x1 && y0 == y1) x1 += 1;
    Rational a = y1 - y0, b = x0 - x1;
    out.push_back({a, b, a * x0 + b * y0});
  }
  return out;
}

}  // namespace

TEST_CASE("two crossing lines give four faces and one interior vertex") {
  auto arr = exact_arrangement_2d({vline(0), hline(0)}, pt(-1, -1), pt(1, 1));
  CHECK(arr.faces.size() == 4);
  int interior = 0;
  for (const auto& v : arr.vertices) interior += strictly_inside(v, arr.lo, arr.hi);
  CHECK(interior == 1);
  CHECK(arr.euler_characteristic() == 2);
}

TEST_CASE("n parallel lines give n+1 faces") {
  for (int n = 1; n <= 6; ++n) {
    std::vector<QLine> lines;
    for (int i = 0; i < n; ++i) lines.push_back(vline(i));
    auto arr = exact_arrangement_2d(lines, pt(-1, -1), pt(n, 1));
    CHECK(arr.faces.size() == static_cast<std::size_t>(n + 1));
  }
}

TEST_CASE("coincident lines merge and keep relative orientation") {
  auto arr = exact_arrangement_2d({vline(0), QLine{-2, 0, 0}, hline(0)}, pt(-1, -1), pt(1, 1));
  CHECK(arr.lines.size() == 2);
  CHECK(arr.merged_of[1] == 0);
  CHECK(arr.relative_sign[1] == -1);
  CHECK(arr.faces.size() == 4);
}

TEST_CASE("axis-aligned grid matches the (nx+1)(ny+1) count") {
  for (int nx = 0; nx <= 8; nx += 2)
    for (int ny = 0; ny <= 8; ny += 4) {
      std::vector<QLine> lines;
      for (int i = 0; i < nx; ++i) lines.push_back(vline(i));
      for (int j = 0; j < ny; ++j) lines.push_back(hline(j));
      auto arr = exact_arrangement_2d(lines, pt(-1, -1), pt(10, 10));
      CHECK(arr.faces.size() == static_cast<std::size_t>((nx + 1) * (ny + 1)));
      CHECK(arr.euler_characteristic() == 2);
    }
}

TEST_CASE("random line sets: Euler, convexity, tiling and the incremental oracle") {
  Rng rng = make_stream(7, 1, 0);
  const QPoint lo{Rational(1, 3), Rational(-1, 7)}, hi{Rational(29, 3), Rational(71, 7)};
  for (int trial = 0; trial < 30; ++trial) {
    auto lines = random_lines(rng, 10);
    auto arr = exact_arrangement_2d(lines, lo, hi);
    CHECK(arr.euler_characteristic() == 2);
    CHECK(faces_convex(arr));
    CHECK(area_tiled(arr));
    for (std::size_t l = 0; l < arr.lines.size(); ++l) CHECK(line_tiled(arr, static_cast<int>(l)));
    // The oracle sees the merged line set (coincident inputs add nothing).
    CHECK(arr.faces.size() == face_count_oracle(arr.lines, lo, hi));
  }
}

TEST_CASE("edges know the face on each side of their line") {
  auto arr = exact_arrangement_2d({vline(0)}, pt(-1, -1), pt(1, 1));
  REQUIRE(arr.faces.size() == 2);
  for (const auto& e : arr.edges) {
    if (e.line < 0) {
      CHECK(e.neg == -1);
      continue;
    }
    CHECK(sgn(arr.lines[0].eval(arr.centroid(e.pos))) > 0);
    CHECK(sgn(arr.lines[0].eval(arr.centroid(e.neg))) < 0);
  }
}


TEST_CASE("square room complex: grid counts, partition and orientation") {
  auto in = square_room();
  auto cx = build_complex(in);
  // 4 distinct x lines and 4 distinct y lines -> 5 x 5 faces; 4 z planes -> 5 intervals.
  CHECK(cx.arr.faces.size() == 25);
  CHECK(cx.interval_count() == 5);
  CHECK(cx.cells.size() == 125);
  double vol = 0;
  for (const auto& c : cx.cells) vol += c.volume;
  CHECK(vol == doctest::Approx(cx.volume()).epsilon(1e-9));
  for (const auto& f : cx.faces) {
    // Normal points into ca: the ca centroid lies on the positive side of the face plane.
    const auto& ca = cx.cells[f.ca];
    Vec2 c2 = Vec2::Zero();
    for (const auto& p : ca.footprint) c2 += p;
    c2 /= static_cast<double>(ca.footprint.size());
    Vec3 cc(c2.x(), c2.y(), 0.5 * (ca.z_lo + ca.z_hi));
    CHECK((cc - f.polygon[0]).dot(f.normal) > 0);
    // Polygon winding agrees with the normal.
    Vec3 n = (f.polygon[1] - f.polygon[0]).cross(f.polygon[2] - f.polygon[0]);
    CHECK(n.dot(f.normal) > 0);
  }
}

TEST_CASE("wall membership: strict strip, z-range and footprint") {
  auto in = square_room();
  auto cx = build_complex(in);
  for (const auto& c : cx.cells) {
    Vec2 m = Vec2::Zero();
    for (const auto& p : c.footprint) m += p;
    m /= static_cast<double>(c.footprint.size());
    const double zm = 0.5 * (c.z_lo + c.z_hi);
    // z-range 0..2.6 touches one interval; one more on each side is added.
    const bool west = m.x() > -0.2 && m.x() < 0 && zm > -0.3 && zm < 2.9;
    const bool has = std::find(c.walls.begin(), c.walls.end(), 0) != c.walls.end();
    CHECK(has == west);
    const bool floor_slab = zm > -0.3 && zm < 0 && m.x() > -0.2 && m.x() < 4.2 && m.y() > -0.2 &&
                            m.y() < 4.2;
    const bool has_floor = std::find(c.walls.begin(), c.walls.end(), 4) != c.walls.end();
    CHECK(has_floor == floor_slab);
  }
  for (const auto& f : cx.faces)
    for (int w : f.boundary_walls) {
      CHECK(std::find(cx.cells[f.cb].walls.begin(), cx.cells[f.cb].walls.end(), w) !=
            cx.cells[f.cb].walls.end());
      CHECK(std::find(cx.cells[f.ca].walls.begin(), cx.cells[f.ca].walls.end(), w) ==
            cx.cells[f.ca].walls.end());
    }
}

TEST_CASE("two crossing walls: a face inner to one wall bounds the other") {
  ComplexInput in;
  in.planes.push_back(vplane({1, 0}, 0.1));    // w0 faces: x = 0.1 (+x), x = -0.1 (-x)
  in.planes.push_back(vplane({-1, 0}, 0.1));
  in.planes.push_back(vplane({0, 1}, 0.1));    // w1: y = 0.1 (+y), y = -0.1 (-y)
  in.planes.push_back(vplane({0, -1}, 0.1));
  in.planes.push_back(hplane(0, 1));
  in.planes.push_back(hplane(1, -1));
  for (int w = 0; w < 2; ++w) {
    WallInput wi;
    wi.plane_a = 2 * w;
    wi.plane_b = 2 * w + 1;
    wi.z_lo = 0;
    wi.z_hi = 1;
    in.walls.push_back(wi);
  }
  in.lo = Vec3(-1, -1, -0.5);
  in.hi = Vec3(1, 1, 1.5);
  auto cx = build_complex(in);
  // The face on y = 0.1 inside w0's strip (|x| < 0.1) is inner for w0 and boundary for w1.
  int found = 0;
  for (const auto& f : cx.faces) {
    if (f.horizontal || std::abs(f.polygon[0].y() - 0.1) > 1e-12 ||
        std::abs(f.polygon[1].y() - 0.1) > 1e-12)
      continue;
    const double xm = 0.5 * (f.polygon[0].x() + f.polygon[1].x());
    const double zm = 0.5 * (f.polygon[0].z() + f.polygon[2].z());
    if (std::abs(xm) < 0.1 && zm > 0 && zm < 1) {
      ++found;
      CHECK(f.inner_walls == std::vector<int>{0});
      CHECK(f.boundary_walls == std::vector<int>{1});
    }
  }
  CHECK(found == 1);
}

TEST_CASE("fewer than two horizontal planes is a configuration error") {
  ComplexInput in;
  in.planes.push_back(vplane({1, 0}, 0));
  in.planes.push_back(hplane(0, 1));
  in.lo = Vec3(-1, -1, -1);
  in.hi = Vec3(1, 1, 1);
  CHECK_THROWS_AS(build_complex(in), ConfigError);
}

TEST_CASE("near-parallel planes within the merge tolerances collapse to one line") {
  ComplexInput in;
  in.planes.push_back(vplane({1, 0}, 0, 2));
  in.planes.push_back(vplane({std::cos(0.001), std::sin(0.001)}, 0.003, 1));
  in.planes.push_back(hplane(0, 1));
  in.planes.push_back(hplane(1, -1));
  in.lo = Vec3(-1, -1, -0.5);
  in.hi = Vec3(1, 1, 1.5);
  auto cx = build_complex(in);
  CHECK(cx.arr.lines.size() == 1);
  CHECK(cx.plane_target[0] == cx.plane_target[1]);
  CHECK(cx.line_planes[0] == std::vector<int>{0, 1});
}
