#include <doctest.h>

#include <json.hpp>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "recon/model.hpp"

using namespace recon;
using namespace recon::fixtures;

namespace {

Vec3 cell_center(const Cell& c) {
  Vec2 m = Vec2::Zero();
  for (const auto& p : c.footprint) m += p;
  m /= static_cast<double>(c.footprint.size());
  return {m.x(), m.y(), 0.5 * (c.z_lo + c.z_hi)};
}

Priors room_priors(const CellComplex& cx, const Vec3& lo, const Vec3& hi) {
  Priors p;
  p.labels = 1;
  for (const auto& c : cx.cells) {
    const Vec3 m = cell_center(c);
    const bool in = (m.array() > lo.array()).all() && (m.array() < hi.array()).all();
    p.cell.push_back(in ? std::vector<double>{1, 0} : std::vector<double>{0, 1});
  }
  p.face.assign(cx.faces.size(), 0.5);
  return p;
}

std::size_t count_lines(const std::string& s, const std::string& prefix) {
  std::size_t n = 0, pos = 0;
  while ((pos = s.find("\n" + prefix, pos)) != std::string::npos) {
    ++n;
    ++pos;
  }
  return n;
}

}  // namespace

TEST_CASE("square room: one box room enclosed by six walls") {
  auto cx = build_complex(square_room());
  auto priors = room_priors(cx, Vec3(0, 0, 0), Vec3(4, 4, 2.6));
  auto model = build_model(cx, priors, 0.04);
  SolveParams sp;
  sp.gap_tolerance = 0;
  auto lab = solve(model, sp);
  REQUIRE(lab.status == Labeling::Status::optimal);
  REQUIRE(validate(lab, model, cx).empty());
  auto bm = extract(model, lab, cx);
  REQUIRE(bm.rooms.size() == 1);
  CHECK(bm.rooms[0].volume == doctest::Approx(4 * 4 * 2.6));
  CHECK(bm.rooms[0].components == 1);
  CHECK(bm.walls.size() == 6);
  double rooms = 0;
  for (const auto& r : bm.rooms) rooms += r.volume;
  CHECK(rooms + bm.outside_volume == doctest::Approx(bm.box_volume).epsilon(1e-6));
  std::set<int> touching;
  for (auto [r, w] : bm.room_wall) touching.insert(w);
  CHECK(touching.size() == 6);
  // Box room: 6 quads after merging.
  auto room_mesh = triangulate(bm.rooms[0].boundary);
  CHECK(room_mesh.triangles.size() == 12);
  CHECK(watertight(room_mesh));
  for (const auto& w : bm.walls) {
    CAPTURE(w.id);
    CHECK(watertight(triangulate(w.boundary)));
    // Every wall touches a room or another wall.
    bool linked = std::any_of(bm.room_wall.begin(), bm.room_wall.end(), [&](auto e) { return e.second == w.id; }) ||
                  std::any_of(bm.wall_wall.begin(), bm.wall_wall.end(),
                              [&](auto e) { return e.first == w.id || e.second == w.id; });
    CHECK(linked);
  }
  // Outward winding: signed volume of the room mesh is positive and equals the cell volume.
  double vol6 = 0;
  for (const auto& t : room_mesh.triangles)
    vol6 += room_mesh.vertices[t.v[0]].dot(room_mesh.vertices[t.v[1]].cross(room_mesh.vertices[t.v[2]]));
  CHECK(vol6 / 6 == doctest::Approx(4 * 4 * 2.6));

  const std::string obj = export_mesh(bm, MeshSelection::rooms);
  CHECK(obj.find("o room_0") != std::string::npos);
  CHECK(count_lines(obj, "f ") == 12);
  CHECK(count_lines(export_mesh(bm, MeshSelection::all), "o ") == 7);

  auto j = nlohmann::json::parse(export_model_json(bm));
  CHECK(j["schema_version"] == kModelSchemaVersion);
  CHECK(j["rooms"].size() == 1);
  CHECK(j["rooms"][0]["volume"].get<double>() == doctest::Approx(41.6).epsilon(1e-12));
  CHECK(j["walls"].size() == 6);
  CHECK(j["adjacency"]["room_wall"].size() == 6);
}

TEST_CASE("room made of several cells merges coplanar faces") {
  auto cx = build_complex(square_room());
  std::vector<int> cells;
  double vol = 0;
  for (const auto& c : cx.cells) {
    const Vec3 m = cell_center(c);
    if (m.x() > -0.2 && m.x() < 4.2 && m.y() > 0 && m.y() < 4 && m.z() > 0 && m.z() < 2.6) {
      cells.push_back(c.id);
      vol += c.volume;
    }
  }
  REQUIRE(cells.size() == 3);
  auto poly = cell_set_boundary(cx, cells);
  CHECK(poly.size() == 6);
  auto mesh = triangulate(poly);
  CHECK(mesh.triangles.size() == 12);
  CHECK(watertight(mesh));
  // An L-shaped set stays watertight and keeps its volume.
  std::vector<int> ell;
  for (const auto& c : cx.cells) {
    const Vec3 m = cell_center(c);
    if (m.z() > 0 && m.z() < 2.6 && ((m.x() > 0 && m.x() < 4 && m.y() > -0.2 && m.y() < 4) ||
                                      (m.x() > -0.2 && m.x() < 0 && m.y() > -0.2 && m.y() < 0)))
      ell.push_back(c.id);
  }
  auto ell_mesh = triangulate(cell_set_boundary(cx, ell));
  CHECK(watertight(ell_mesh));
  double expect = 0;
  for (int c : ell) expect += cx.cells[c].volume;
  double vol6 = 0;
  for (const auto& t : ell_mesh.triangles)
    vol6 += ell_mesh.vertices[t.v[0]].dot(ell_mesh.vertices[t.v[1]].cross(ell_mesh.vertices[t.v[2]]));
  CHECK(vol6 / 6 == doctest::Approx(expect));
}

TEST_CASE("cells on the box boundary are closed by box faces") {
  auto cx = build_complex(square_room());
  std::vector<int> all(cx.cells.size());
  std::iota(all.begin(), all.end(), 0);
  auto mesh = triangulate(cell_set_boundary(cx, all));
  CHECK(mesh.triangles.size() == 12);
  CHECK(watertight(mesh));
}

TEST_CASE("two crossing active walls share one intersection") {
  ComplexInput in;
  in.planes.push_back(vplane({1, 0}, 0.1));
  in.planes.push_back(vplane({-1, 0}, 0.1));
  in.planes.push_back(vplane({0, 1}, 0.1));
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
  Priors p;
  p.labels = 1;
  p.cell.assign(cx.cells.size(), {0, 1});
  p.face.assign(cx.faces.size(), 0);
  auto model = build_model(cx, p, 0.04);
  Labeling lab;
  lab.x.assign(model.vars.size(), 0);
  for (const auto& c : cx.cells) {
    lab.x[model.var(c.id, model.outside_label())] = 1;
    for (int w : c.walls) lab.x[model.var(c.id, model.wall_label(w))] = 1;
  }
  auto bm = extract(model, lab, cx);
  CHECK(bm.rooms.empty());
  REQUIRE(bm.walls.size() == 2);
  REQUIRE(bm.intersections.size() == 1);
  CHECK(bm.intersections[0].walls == std::vector<int>{0, 1});
  CHECK(bm.intersections[0].cells.size() == 3);  // the crossing column, one cell per interval
  CHECK(bm.wall_wall == std::vector<std::pair<int, int>>{{0, 1}});
  for (const auto& w : bm.walls) CHECK(watertight(triangulate(w.boundary)));
}

TEST_CASE("all-outside labeling gives an empty model and OBJ") {
  auto cx = build_complex(square_room());
  Priors p;
  p.labels = 1;
  p.cell.assign(cx.cells.size(), {0, 1});
  p.face.assign(cx.faces.size(), 0);
  auto model = build_model(cx, p, 0.04);
  auto lab = solve(model);
  auto bm = extract(model, lab, cx);
  CHECK(bm.empty());
  CHECK(bm.outside_volume == doctest::Approx(bm.box_volume));
  const std::string obj = export_mesh(bm, MeshSelection::all);
  CHECK(obj.find("\nf ") == std::string::npos);
  CHECK(obj.find("\nv ") == std::string::npos);
  auto j = nlohmann::json::parse(export_model_json(bm));
  CHECK(j["rooms"].empty());
  CHECK(j.contains("schema_version"));
}
