#include "recon/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <json.hpp>

#include "recon/rng.hpp"

namespace recon {

namespace {

constexpr std::uint64_t kSurfaceTag = 0x53594e53;
constexpr std::uint64_t kOutlierTag = 0x53594e4f;

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double signed_area(const std::vector<Vec2>& poly) {
  double a = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) a += cross2(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * a;
}

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y()) &&
        p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x())
      in = !in;
  }
  return in;
}

bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double d1 = cross2(b - a, c - a), d2 = cross2(b - a, d - a);
  const double d3 = cross2(d - c, a - c), d4 = cross2(d - c, b - c);
  return ((d1 > 1e-12 && d2 < -1e-12) || (d1 < -1e-12 && d2 > 1e-12)) &&
         ((d3 > 1e-12 && d4 < -1e-12) || (d3 < -1e-12 && d4 > 1e-12));
}

// Ear clipping for a simple counter-clockwise polygon.
std::vector<std::array<Vec2, 3>> triangulate2d(std::vector<Vec2> poly) {
  std::vector<std::array<Vec2, 3>> out;
  while (poly.size() > 3) {
    const std::size_t n = poly.size();
    bool clipped = false;
    for (std::size_t k = 0; k < n && !clipped; ++k) {
      const Vec2& a = poly[(k + n - 1) % n];
      const Vec2& b = poly[k];
      const Vec2& c = poly[(k + 1) % n];
      if (cross2(b - a, c - b) <= 1e-14) continue;
      bool clear = true;
      for (std::size_t j = 0; j < n && clear; ++j) {
        const Vec2& q = poly[j];
        if (q == a || q == b || q == c) continue;
        clear = !(cross2(b - a, q - a) >= 0 && cross2(c - b, q - b) >= 0 && cross2(a - c, q - c) >= 0);
      }
      if (!clear) continue;
      out.push_back({a, b, c});
      poly.erase(poly.begin() + static_cast<long>(k));
      clipped = true;
    }
    if (!clipped) throw ConfigError("room polygon could not be triangulated");
  }
  out.push_back({poly[0], poly[1], poly[2]});
  return out;
}

struct Surface {
  // Planar polygon given as origin + s * u + t * v over 2D triangles.
  Vec3 origin, u, v, normal;
  std::vector<std::array<Vec2, 3>> triangles;
  int room = -1;

  double area() const {
    double a = 0;
    for (const auto& t : triangles) a += 0.5 * std::abs(cross2(t[1] - t[0], t[2] - t[0]));
    return a;
  }
};

Surface horizontal(const std::vector<Vec2>& poly, double z, bool up, int room) {
  Surface s;
  s.origin = Vec3(0, 0, z);
  s.u = Vec3::UnitX();
  s.v = Vec3::UnitY();
  s.normal = Vec3(0, 0, up ? 1 : -1);
  s.triangles = triangulate2d(poly);
  s.room = room;
  return s;
}

// Rectangle a-b x [z0, z1] with the given normal.
Surface vertical(const Vec2& a, const Vec2& b, double z0, double z1, const Vec3& normal, int room) {
  Surface s;
  s.origin = Vec3(a.x(), a.y(), z0);
  const Vec2 d = b - a;
  const double len = d.norm();
  s.u = Vec3(d.x() / len, d.y() / len, 0);
  s.v = Vec3::UnitZ();
  s.normal = normal;
  const double h = z1 - z0;
  s.triangles = {{Vec2(0, 0), Vec2(len, 0), Vec2(len, h)}, {Vec2(0, 0), Vec2(len, h), Vec2(0, h)}};
  s.room = room;
  return s;
}

std::vector<Surface> surfaces_of(const SceneSpec& spec) {
  std::vector<Surface> out;
  for (std::size_t r = 0; r < spec.rooms.size(); ++r) {
    const auto& room = spec.rooms[r];
    const auto& st = spec.stories[room.story];
    const int id = static_cast<int>(r);
    out.push_back(horizontal(room.polygon, st.floor_z, true, id));
    out.push_back(horizontal(room.polygon, st.floor_z + st.height, false, id));
    const std::size_t n = room.polygon.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (std::count(room.open_edges.begin(), room.open_edges.end(), static_cast<int>(i))) continue;
      const Vec2 a = room.polygon[i], b = room.polygon[(i + 1) % n];
      const Vec2 d = (b - a).normalized();
      out.push_back(vertical(a, b, st.floor_z, st.floor_z + st.height, Vec3(-d.y(), d.x(), 0), id));
    }
  }
  for (const auto& box : spec.clutter) {
    const double z0 = spec.stories[spec.rooms[box.room].story].floor_z;
    const double z1 = z0 + box.height;
    const std::vector<Vec2> top{box.lo, Vec2(box.hi.x(), box.lo.y()), box.hi, Vec2(box.lo.x(), box.hi.y())};
    out.push_back(horizontal(top, z1, true, box.room));
    for (std::size_t i = 0; i < 4; ++i) {
      const Vec2 a = top[i], b = top[(i + 1) % 4];
      const Vec2 d = (b - a).normalized();
      out.push_back(vertical(a, b, z0, z1, Vec3(d.y(), -d.x(), 0), box.room));
    }
  }
  return out;
}

void building_box(const SceneSpec& spec, Vec3& lo, Vec3& hi) {
  lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  hi = -lo;
  for (const auto& room : spec.rooms) {
    const auto& st = spec.stories[room.story];
    for (const auto& p : room.polygon) {
      lo = lo.cwiseMin(Vec3(p.x(), p.y(), st.floor_z));
      hi = hi.cwiseMax(Vec3(p.x(), p.y(), st.floor_z + st.height));
    }
  }
}

}  // namespace

void validate_scene(const SceneSpec& spec) {
  if (spec.rooms.empty()) throw ConfigError("scene has no rooms");
  if (!(spec.density > 0)) throw ConfigError("density must be positive");
  if (!(spec.noise_sigma >= 0)) throw ConfigError("noise must be non-negative");
  if (!(spec.outlier_max_distance > spec.outlier_min_distance) || spec.outlier_min_distance < 0)
    throw ConfigError("outlier shell is empty");
  for (const auto& st : spec.stories)
    if (!(st.height > 0)) throw ConfigError("story height must be positive");
  for (std::size_t r = 0; r < spec.rooms.size(); ++r) {
    const auto& room = spec.rooms[r];
    if (room.story < 0 || room.story >= static_cast<int>(spec.stories.size()))
      throw ConfigError("room " + std::to_string(r) + " references a missing story");
    if (room.polygon.size() < 3 || signed_area(room.polygon) <= 0)
      throw ConfigError("room " + std::to_string(r) + " footprint must be counter-clockwise");
    const std::size_t n = room.polygon.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        if (segments_cross(room.polygon[i], room.polygon[(i + 1) % n], room.polygon[j], room.polygon[(j + 1) % n]))
          throw ConfigError("room " + std::to_string(r) + " footprint self-intersects");
      }
  }
  for (std::size_t r = 0; r < spec.rooms.size(); ++r)
    for (std::size_t s = r + 1; s < spec.rooms.size(); ++s) {
      const auto& a = spec.rooms[r];
      const auto& b = spec.rooms[s];
      if (a.story != b.story) continue;
      bool overlap = false;
      for (std::size_t i = 0; i < a.polygon.size() && !overlap; ++i)
        for (std::size_t j = 0; j < b.polygon.size() && !overlap; ++j)
          overlap = segments_cross(a.polygon[i], a.polygon[(i + 1) % a.polygon.size()], b.polygon[j],
                                   b.polygon[(j + 1) % b.polygon.size()]);
      // Containment: a vertex or the centroid of one inside the other.
      auto centroid = [](const std::vector<Vec2>& p) {
        Vec2 c = Vec2::Zero();
        for (const auto& q : p) c += q;
        return Vec2(c / static_cast<double>(p.size()));
      };
      overlap = overlap || point_in_polygon(centroid(a.polygon), b.polygon) ||
                point_in_polygon(centroid(b.polygon), a.polygon);
      if (overlap) throw ConfigError("rooms " + std::to_string(r) + " and " + std::to_string(s) + " overlap");
    }
  for (const auto& box : spec.clutter) {
    if (box.room < 0 || box.room >= static_cast<int>(spec.rooms.size()))
      throw ConfigError("clutter references a missing room");
    if (!(box.hi.x() > box.lo.x() && box.hi.y() > box.lo.y() && box.height > 0))
      throw ConfigError("clutter box is empty");
  }
}

std::vector<GtWall> shared_walls(const SceneSpec& spec, double max_gap) {
  std::vector<GtWall> out;
  for (std::size_t r = 0; r < spec.rooms.size(); ++r)
    for (std::size_t s = r + 1; s < spec.rooms.size(); ++s) {
      const auto& A = spec.rooms[r];
      const auto& B = spec.rooms[s];
      if (A.story != B.story) continue;
      for (std::size_t i = 0; i < A.polygon.size(); ++i)
        for (std::size_t j = 0; j < B.polygon.size(); ++j) {
          const Vec2 a0 = A.polygon[i], a1 = A.polygon[(i + 1) % A.polygon.size()];
          const Vec2 b0 = B.polygon[j], b1 = B.polygon[(j + 1) % B.polygon.size()];
          const Vec2 da = (a1 - a0).normalized(), db = (b1 - b0).normalized();
          if (da.dot(db) > -std::cos(deg2rad(1.0))) continue;
          const Vec2 na(-da.y(), da.x());  // into room A
          const double gap = (b0 - a0).dot(-na);
          const double gap1 = (b1 - a0).dot(-na);
          if (!(gap > 0 && gap <= max_gap && std::abs(gap1 - gap) < 1e-6)) continue;
          const double t0 = std::max(0.0, std::min((b0 - a0).dot(da), (b1 - a0).dot(da)));
          const double t1 = std::min((a1 - a0).norm(), std::max((b0 - a0).dot(da), (b1 - a0).dot(da)));
          if (t1 - t0 <= 1e-6) continue;
          GtWall w;
          w.a = a0 + t0 * da;
          w.b = a0 + t1 * da;
          w.axis = da;
          w.thickness = gap;
          w.room_a = static_cast<int>(r);
          w.room_b = static_cast<int>(s);
          w.story = A.story;
          out.push_back(w);
        }
    }
  return out;
}

Scene generate(const SceneSpec& spec) {
  validate_scene(spec);
  Scene scene;
  auto& cloud = scene.cloud;
  auto& gt = scene.truth;
  gt.rooms = spec.rooms;
  for (const auto& room : spec.rooms) {
    const auto& st = spec.stories[room.story];
    gt.z_lo.push_back(st.floor_z);
    gt.z_hi.push_back(st.floor_z + st.height);
    gt.volumes.push_back(signed_area(room.polygon) * st.height);
  }
  gt.shared_walls = shared_walls(spec);
  building_box(spec, gt.lo, gt.hi);

  const auto surfaces = surfaces_of(spec);
  for (std::size_t si = 0; si < surfaces.size(); ++si) {
    const auto& s = surfaces[si];
    Rng rng = make_stream(spec.seed, kSurfaceTag, si);
    std::vector<double> cum;
    double total = 0;
    for (const auto& t : s.triangles) {
      total += 0.5 * std::abs(cross2(t[1] - t[0], t[2] - t[0]));
      cum.push_back(total);
    }
    const auto count = static_cast<std::size_t>(std::llround(spec.density * total));
    for (std::size_t k = 0; k < count; ++k) {
      const double pick = uniform01(rng) * total;
      const std::size_t ti = std::min<std::size_t>(
          static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), pick) - cum.begin()),
          s.triangles.size() - 1);
      const auto& t = s.triangles[ti];
      double r1 = std::sqrt(uniform01(rng)), r2 = uniform01(rng);
      const Vec2 q = (1 - r1) * t[0] + r1 * (1 - r2) * t[1] + r1 * r2 * t[2];
      const double noise = spec.noise_sigma > 0 ? spec.noise_sigma * gaussian(rng) : 0.0;
      cloud.positions.push_back(s.origin + q.x() * s.u + q.y() * s.v + noise * s.normal);
      cloud.normals.push_back(s.normal);
      gt.point_room.push_back(s.room);
      gt.outlier.push_back(0);
    }
  }

  Rng rng = make_stream(spec.seed, kOutlierTag, 0);
  const double dmin = spec.outlier_min_distance, dmax = spec.outlier_max_distance;
  for (std::size_t k = 0; k < spec.outlier_count; ++k) {
    Vec2 p;
    for (;;) {
      p = Vec2(gt.lo.x() - dmax + uniform01(rng) * (gt.hi.x() - gt.lo.x() + 2 * dmax),
               gt.lo.y() - dmax + uniform01(rng) * (gt.hi.y() - gt.lo.y() + 2 * dmax));
      const double dx = std::max({gt.lo.x() - p.x(), 0.0, p.x() - gt.hi.x()});
      const double dy = std::max({gt.lo.y() - p.y(), 0.0, p.y() - gt.hi.y()});
      if (std::max(dx, dy) >= dmin) break;
    }
    const double z = gt.lo.z() + uniform01(rng) * (gt.hi.z() - gt.lo.z());
    cloud.positions.emplace_back(p.x(), p.y(), z);
    cloud.normals.push_back(uniform_sphere(rng));
    gt.point_room.push_back(-1);
    gt.outlier.push_back(1);
  }
  return scene;
}

SceneSpec scene_s1(std::uint64_t seed) {
  SceneSpec s;
  s.name = "S1";
  s.seed = seed;
  s.rooms.push_back({{Vec2(0, 0), Vec2(4, 0), Vec2(4, 5), Vec2(0, 5)}, 0, {}});
  return s;
}

SceneSpec scene_s2(std::uint64_t seed) {
  SceneSpec s;
  s.name = "S2";
  s.seed = seed;
  s.rooms.push_back({{Vec2(0, 0), Vec2(4, 0), Vec2(4, 5), Vec2(0, 5)}, 0, {}});
  s.rooms.push_back({{Vec2(4.24, 0), Vec2(8.24, 0), Vec2(8.24, 5), Vec2(4.24, 5)}, 0, {}});
  return s;
}

SceneSpec scene_s3(std::uint64_t seed) {
  SceneSpec s = scene_s2(seed);
  s.name = "S3";
  s.stories = {StorySpec{0.0, 2.6}, StorySpec{2.9, 2.6}};
  auto upper = s.rooms;
  for (auto& r : upper) r.story = 1;
  s.rooms.insert(s.rooms.end(), upper.begin(), upper.end());
  return s;
}

SceneSpec scene_s4(std::uint64_t seed) {
  SceneSpec s;
  s.name = "S4";
  s.seed = seed;
  s.rooms.push_back({{Vec2(0, 0), Vec2(4, 0), Vec2(4, 5), Vec2(0, 5)}, 0, {}});
  s.rooms.push_back({{Vec2(4.24, 0), Vec2(8, 0), Vec2(8, 5), Vec2(4.24, 5)}, 0, {}});
  // Room 2's east wall leans 30 degrees off the y axis.
  const double rise = 3.5;
  s.rooms.push_back({{Vec2(0, 5.24), Vec2(5, 5.24), Vec2(5 + rise * std::tan(deg2rad(30.0)), 5.24 + rise),
                      Vec2(0, 5.24 + rise)},
                     0,
                     {}});
  return s;
}

SceneSpec scene_s2_hallway(std::uint64_t seed) {
  SceneSpec s = scene_s2(seed);
  s.name = "S2-hallway";
  s.rooms[0].polygon = {Vec2(0, 0), Vec2(4, 0), Vec2(4, 5), Vec2(1.5, 5), Vec2(1.5, 7), Vec2(0, 7)};
  s.rooms[0].open_edges = {4};
  return s;
}

SceneSpec with_clutter(SceneSpec spec) {
  for (std::size_t r = 0; r < spec.rooms.size(); ++r) {
    Vec2 lo = spec.rooms[r].polygon[0], hi = lo;
    for (const auto& p : spec.rooms[r].polygon) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Vec2 c = 0.5 * (lo + hi);
    const int id = static_cast<int>(r);
    spec.clutter.push_back({c - Vec2(0.6, 0.4), c + Vec2(0.6, 0.4), 0.75, id});
    spec.clutter.push_back({Vec2(lo.x() + 0.4, hi.y() - 1.0), Vec2(lo.x() + 2.0, hi.y() - 0.5), 1.8, id});
  }
  spec.name += "+clutter";
  return spec;
}

SceneSpec scene_by_name(const std::string& name, std::uint64_t seed) {
  std::string base = name;
  bool clutter = false;
  if (auto p = base.find("+clutter"); p != std::string::npos) {
    clutter = true;
    base = base.substr(0, p);
  }
  SceneSpec s;
  if (base == "S1") s = scene_s1(seed);
  else if (base == "S2") s = scene_s2(seed);
  else if (base == "S3") s = scene_s3(seed);
  else if (base == "S4") s = scene_s4(seed);
  else if (base == "S2-hallway") s = scene_s2_hallway(seed);
  else throw ConfigError("unknown scene '" + name + "' (S1, S2, S3, S4, S2-hallway, optional +clutter)");
  return clutter ? with_clutter(s) : s;
}

std::string scene_to_json(const SceneSpec& spec) {
  using nlohmann::json;
  json j;
  j["name"] = spec.name;
  j["seed"] = spec.seed;
  j["noise_sigma"] = spec.noise_sigma;
  j["density"] = spec.density;
  j["outlier_count"] = spec.outlier_count;
  j["outlier_min_distance"] = spec.outlier_min_distance;
  j["outlier_max_distance"] = spec.outlier_max_distance;
  for (const auto& st : spec.stories) j["stories"].push_back({{"floor_z", st.floor_z}, {"height", st.height}});
  j["rooms"] = json::array();
  for (const auto& r : spec.rooms) {
    json poly = json::array();
    for (const auto& p : r.polygon) poly.push_back({p.x(), p.y()});
    j["rooms"].push_back({{"polygon", poly}, {"story", r.story}, {"open_edges", r.open_edges}});
  }
  j["clutter"] = json::array();
  for (const auto& c : spec.clutter)
    j["clutter"].push_back({{"lo", {c.lo.x(), c.lo.y()}}, {"hi", {c.hi.x(), c.hi.y()}}, {"height", c.height}, {"room", c.room}});
  return j.dump(2);
}

SceneSpec scene_from_json(const std::string& text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene spec is not valid JSON: ") + e.what());
  }
  SceneSpec s;
  try {
    s.name = j.value("name", std::string("custom"));
    s.seed = j.value("seed", std::uint64_t{0});
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.density = j.value("density", s.density);
    s.outlier_count = j.value("outlier_count", s.outlier_count);
    s.outlier_min_distance = j.value("outlier_min_distance", s.outlier_min_distance);
    s.outlier_max_distance = j.value("outlier_max_distance", s.outlier_max_distance);
    if (j.contains("stories")) {
      s.stories.clear();
      for (const auto& st : j["stories"]) s.stories.push_back({st.at("floor_z").get<double>(), st.at("height").get<double>()});
    }
    for (const auto& r : j.at("rooms")) {
      RoomSpec room;
      for (const auto& p : r.at("polygon")) room.polygon.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      room.story = r.value("story", 0);
      room.open_edges = r.value("open_edges", std::vector<int>{});
      s.rooms.push_back(std::move(room));
    }
    if (j.contains("clutter"))
      for (const auto& c : j["clutter"])
        s.clutter.push_back({Vec2(c.at("lo").at(0).get<double>(), c.at("lo").at(1).get<double>()),
                             Vec2(c.at("hi").at(0).get<double>(), c.at("hi").at(1).get<double>()),
                             c.at("height").get<double>(), c.at("room").get<int>()});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene spec: ") + e.what());
  }
  validate_scene(s);
  return s;
}

std::string truth_to_json(const GroundTruth& gt) {
  using nlohmann::json;
  json j;
  j["rooms"] = json::array();
  for (std::size_t r = 0; r < gt.rooms.size(); ++r) {
    json poly = json::array();
    for (const auto& p : gt.rooms[r].polygon) poly.push_back({p.x(), p.y()});
    j["rooms"].push_back({{"id", r}, {"polygon", poly}, {"z_lo", gt.z_lo[r]}, {"z_hi", gt.z_hi[r]},
                          {"volume", gt.volumes[r]}});
  }
  j["shared_walls"] = json::array();
  for (const auto& w : gt.shared_walls)
    j["shared_walls"].push_back({{"a", {w.a.x(), w.a.y()}}, {"b", {w.b.x(), w.b.y()}}, {"axis", {w.axis.x(), w.axis.y()}},
                                 {"thickness", w.thickness}, {"rooms", {w.room_a, w.room_b}}, {"story", w.story}});
  j["point_room"] = gt.point_room;
  j["outliers"] = std::count(gt.outlier.begin(), gt.outlier.end(), 1);
  return j.dump();
}

}  // namespace recon
