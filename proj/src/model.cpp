#include "recon/model.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>
#include <functional>

#include <json.hpp>

namespace recon {

namespace {

using Key = std::array<double, 3>;

Key key_of(const Vec3& p) { return {p.x(), p.y(), p.z()}; }

struct VertexIndex {
  std::map<Key, int> ids;
  std::vector<Vec3> points;
  int operator()(const Vec3& p) {
    auto [it, fresh] = ids.try_emplace(key_of(p), static_cast<int>(points.size()));
    if (fresh) points.push_back(p);
    return it->second;
  }
};

using Loop = std::vector<int>;

// Union of coplanar loops by cancelling opposite directed edges. Returns
// nothing unless the result is one simple loop.
std::optional<Loop> merge_loops(const std::vector<Loop>& loops) {
  std::map<std::pair<int, int>, int> directed;
  for (const auto& l : loops)
    for (std::size_t i = 0; i < l.size(); ++i) ++directed[{l[i], l[(i + 1) % l.size()]}];
  std::map<int, int> next;
  for (const auto& [e, n] : directed) {
    if (n != 1) return std::nullopt;
    auto back = directed.find({e.second, e.first});
    if (back != directed.end()) continue;
    if (!next.emplace(e.first, e.second).second) return std::nullopt;
  }
  if (next.empty()) return std::nullopt;
  Loop out;
  int v = next.begin()->first;
  do {
    out.push_back(v);
    auto it = next.find(v);
    if (it == next.end() || out.size() > next.size()) return std::nullopt;
    v = it->second;
  } while (v != out.front());
  if (out.size() != next.size()) return std::nullopt;
  return out;
}

bool collinear_at(const std::vector<Vec3>& pts, const Loop& l, std::size_t i) {
  const Vec3& a = pts[l[(i + l.size() - 1) % l.size()]];
  const Vec3& p = pts[l[i]];
  const Vec3& b = pts[l[(i + 1) % l.size()]];
  const Vec3 u = p - a, w = b - p;
  return u.cross(w).norm() <= 1e-12 * u.norm() * w.norm() && u.dot(w) > 0;
}

// Drops vertices that sit in the middle of a straight edge of exactly the two
// polygons sharing that edge; no other polygon can then see them.
void drop_collinear(const std::vector<Vec3>& pts, std::vector<Loop>& loops) {
  for (bool changed = true; changed;) {
    changed = false;
    std::map<int, std::vector<std::pair<int, std::size_t>>> where;
    for (std::size_t p = 0; p < loops.size(); ++p)
      for (std::size_t i = 0; i < loops[p].size(); ++i) where[loops[p][i]].emplace_back(static_cast<int>(p), i);
    std::set<int> drop;
    for (const auto& [v, occ] : where) {
      if (occ.size() != 2) continue;
      bool ok = true;
      for (const auto& [p, i] : occ) ok = ok && loops[p].size() > 3 && collinear_at(pts, loops[p], i);
      if (ok) drop.insert(v);
    }
    for (auto& l : loops) {
      Loop kept;
      for (int v : l)
        if (!drop.count(v)) kept.push_back(v);
      if (kept.size() >= 3 && kept.size() != l.size()) {
        l = std::move(kept);
        changed = true;
      }
    }
  }
}

Vec3 newell(const Polygon3& poly) {
  Vec3 n = Vec3::Zero();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec3& a = poly[i];
    const Vec3& b = poly[(i + 1) % poly.size()];
    n += Vec3((a.y() - b.y()) * (a.z() + b.z()), (a.z() - b.z()) * (a.x() + b.x()),
              (a.x() - b.x()) * (a.y() + b.y()));
  }
  return n;
}

double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a - o).x() * (b - o).y() - (a - o).y() * (b - o).x();
}

bool in_triangle(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  return cross2(a, b, p) >= 0 && cross2(b, c, p) >= 0 && cross2(c, a, p) >= 0;
}

// Ear clipping in the projection that drops the dominant normal axis.
std::vector<std::array<int, 3>> ear_clip(const Polygon3& poly) {
  const std::size_t n = poly.size();
  std::vector<std::array<int, 3>> out;
  if (n < 3) return out;
  const Vec3 nn = newell(poly);
  int axis = 0;
  nn.cwiseAbs().maxCoeff(&axis);
  const int i0 = (axis + 1) % 3, i1 = (axis + 2) % 3;
  const double flip = nn[axis] < 0 ? -1.0 : 1.0;
  std::vector<Vec2> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = Vec2(poly[i][i0], flip * poly[i][i1]);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  while (idx.size() > 3) {
    const std::size_t m = idx.size();
    int ear = -1, fallback = -1;
    for (std::size_t k = 0; k < m && ear < 0; ++k) {
      const int a = idx[(k + m - 1) % m], b = idx[k], c = idx[(k + 1) % m];
      if (cross2(p[a], p[b], p[c]) <= 0) continue;
      if (fallback < 0) fallback = static_cast<int>(k);
      bool clear = true;
      for (std::size_t j = 0; j < m && clear; ++j) {
        const int q = idx[j];
        if (q == a || q == b || q == c) continue;
        if (p[q] == p[a] || p[q] == p[b] || p[q] == p[c]) continue;
        clear = !in_triangle(p[q], p[a], p[b], p[c]);
      }
      if (clear) ear = static_cast<int>(k);
    }
    if (ear < 0) ear = fallback;
    if (ear < 0) break;
    const std::size_t k = static_cast<std::size_t>(ear);
    out.push_back({idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]});
    idx.erase(idx.begin() + ear);
  }
  if (idx.size() == 3) out.push_back({idx[0], idx[1], idx[2]});
  return out;
}

}  // namespace

std::vector<Polygon3> cell_set_boundary(const CellComplex& cx, const std::vector<int>& cells) {
  std::vector<char> in(cx.cells.size(), 0);
  for (int c : cells) in[c] = 1;
  // Plane key: (kind, index, outward side). Kind 0 lateral, 1 horizontal, 2 box side.
  std::map<std::tuple<int, int, int>, std::vector<Polygon3>> groups;
  for (const auto& f : cx.faces) {
    const bool a = in[f.ca], b = in[f.cb];
    if (a == b) continue;
    Polygon3 poly = f.polygon;
    if (a) std::reverse(poly.begin(), poly.end());
    groups[{f.horizontal ? 1 : 0, f.plane, b ? 1 : -1}].push_back(std::move(poly));
  }
  const auto& arr = cx.arr;
  const int nk = cx.interval_count();
  for (int c : cells) {
    const Cell& cell = cx.cells[c];
    const auto& loop = arr.faces[cell.face2d];
    for (std::size_t i = 0; i < loop.size(); ++i) {
      const auto& e = arr.edges[arr.face_edges[cell.face2d][i]];
      if (e.pos >= 0 && e.neg >= 0) continue;
      const QPoint& q0 = arr.vertices[loop[i]];
      const QPoint& q1 = arr.vertices[loop[(i + 1) % loop.size()]];
      int side = q0.x == arr.lo.x && q1.x == arr.lo.x ? 0
                 : q0.x == arr.hi.x && q1.x == arr.hi.x ? 1
                 : q0.y == arr.lo.y && q1.y == arr.lo.y ? 2
                                                          : 3;
      const Vec2 p0 = cell.footprint[i], p1 = cell.footprint[(i + 1) % loop.size()];
      groups[{2, side, 1}].push_back({Vec3(p0.x(), p0.y(), cell.z_lo), Vec3(p1.x(), p1.y(), cell.z_lo),
                                      Vec3(p1.x(), p1.y(), cell.z_hi), Vec3(p0.x(), p0.y(), cell.z_hi)});
    }
    if (cell.interval == 0) {
      Polygon3 poly;
      for (auto it = cell.footprint.rbegin(); it != cell.footprint.rend(); ++it)
        poly.emplace_back(it->x(), it->y(), cell.z_lo);
      groups[{2, 4, 1}].push_back(std::move(poly));
    }
    if (cell.interval == nk - 1) {
      Polygon3 poly;
      for (const auto& p : cell.footprint) poly.emplace_back(p.x(), p.y(), cell.z_hi);
      groups[{2, 5, 1}].push_back(std::move(poly));
    }
  }

  VertexIndex vx;
  std::vector<Loop> loops;
  for (const auto& [key, polys] : groups) {
    std::vector<Loop> ls;
    for (const auto& poly : polys) {
      Loop l;
      for (const auto& p : poly) l.push_back(vx(p));
      ls.push_back(std::move(l));
    }
    if (ls.size() > 1)
      if (auto merged = merge_loops(ls)) ls = {*merged};
    for (auto& l : ls) loops.push_back(std::move(l));
  }
  drop_collinear(vx.points, loops);
  std::vector<Polygon3> out;
  for (const auto& l : loops) {
    Polygon3 poly;
    for (int v : l) poly.push_back(vx.points[v]);
    out.push_back(std::move(poly));
  }
  return out;
}

Mesh triangulate(const std::vector<Polygon3>& polygons) {
  Mesh mesh;
  VertexIndex vx;
  for (const auto& poly : polygons) {
    std::vector<int> ids;
    for (const auto& p : poly) ids.push_back(vx(p));
    for (const auto& t : ear_clip(poly)) mesh.triangles.push_back({{ids[t[0]], ids[t[1]], ids[t[2]]}});
  }
  mesh.vertices = std::move(vx.points);
  return mesh;
}

bool watertight(const Mesh& mesh) {
  std::map<std::pair<int, int>, int> directed;
  for (const auto& t : mesh.triangles)
    for (int i = 0; i < 3; ++i) ++directed[{t.v[i], t.v[(i + 1) % 3]}];
  for (const auto& [e, n] : directed) {
    if (n != 1) return false;
    auto back = directed.find({e.second, e.first});
    if (back == directed.end() || back->second != 1) return false;
  }
  return true;
}

BuildingModel extract(const IlpModel& model, const Labeling& lab, const CellComplex& cx,
                      const PairResult* pairs, Exec exec) {
  BuildingModel bm;
  bm.box_volume = cx.volume();
  const auto labels = cell_labels(model, lab);
  const int nc = static_cast<int>(cx.cells.size());

  for (int r = 0; r < model.rooms; ++r) {
    RoomEntity room;
    room.label = r;
    for (int c = 0; c < nc; ++c)
      if (labels.room[c] == r) {
        room.cells.push_back(c);
        room.volume += cx.cells[c].volume;
      }
    if (room.cells.empty()) continue;
    room.id = static_cast<int>(bm.rooms.size());
    // Face-connected pieces.
    std::vector<int> parent(nc);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
    for (const auto& f : cx.faces)
      if (labels.room[f.ca] == r && labels.room[f.cb] == r) parent[find(f.ca)] = find(f.cb);
    std::set<int> roots;
    for (int c : room.cells) roots.insert(find(c));
    room.components = static_cast<int>(roots.size());
    if (room.components > 1)
      bm.warnings.push_back("room label " + std::to_string(r) + " has " + std::to_string(room.components) +
                            " disconnected components");
    bm.rooms.push_back(std::move(room));
  }
  for (int c = 0; c < nc; ++c)
    if (labels.room[c] == -1) bm.outside_volume += cx.cells[c].volume;

  std::vector<int> wall_entity(model.walls, -1);
  for (int w = 0; w < model.walls; ++w) {
    WallEntity we;
    we.id = w;
    for (int c = 0; c < nc; ++c)
      if (std::binary_search(labels.walls[c].begin(), labels.walls[c].end(), w)) {
        we.cells.push_back(c);
        we.volume += cx.cells[c].volume;
      }
    if (we.cells.empty()) continue;
    if (pairs && w < static_cast<int>(pairs->walls.size())) {
      const auto& cand = pairs->walls[w];
      const auto& a = pairs->surfaces[cand.surface_a];
      const auto& b = pairs->surfaces[cand.surface_b];
      we.slab = cand.orientation == SurfaceClass::slab;
      we.thickness = cand.thickness;
      const Vec3 n = a.frame.normal;
      we.axis = we.slab ? Vec3(0, 0, n.z() > 0 ? 1 : -1) : Vec3(-n.y(), n.x(), 0).normalized();
      we.surfaces[0] = {a.frame.normal, a.frame.offset, a.is_virtual};
      we.surfaces[1] = {b.frame.normal, b.frame.offset, b.is_virtual};
    }
    wall_entity[w] = static_cast<int>(bm.walls.size());
    bm.walls.push_back(std::move(we));
  }

  std::map<std::vector<int>, std::vector<int>> by_set;
  for (int c = 0; c < nc; ++c)
    if (labels.walls[c].size() >= 2) by_set[labels.walls[c]].push_back(c);
  std::set<std::pair<int, int>> ww;
  for (auto& [walls, cells] : by_set) {
    bm.intersections.push_back({walls, cells});
    for (std::size_t i = 0; i < walls.size(); ++i)
      for (std::size_t j = i + 1; j < walls.size(); ++j) ww.emplace(walls[i], walls[j]);
  }
  bm.wall_wall.assign(ww.begin(), ww.end());

  std::vector<int> room_id(model.rooms, -1);
  for (const auto& r : bm.rooms) room_id[r.label] = r.id;
  std::set<std::pair<int, int>> rw;
  for (const auto& f : cx.faces)
    for (auto [x, y] : {std::pair{f.ca, f.cb}, std::pair{f.cb, f.ca}})
      if (labels.room[x] >= 0)
        for (int w : labels.walls[y]) rw.emplace(room_id[labels.room[x]], w);
  bm.room_wall.assign(rw.begin(), rw.end());

  const int nr = static_cast<int>(bm.rooms.size());
  const int ne = nr + static_cast<int>(bm.walls.size());
  auto boundary = [&](int e) {
    if (e < nr)
      bm.rooms[e].boundary = cell_set_boundary(cx, bm.rooms[e].cells);
    else
      bm.walls[e - nr].boundary = cell_set_boundary(cx, bm.walls[e - nr].cells);
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int e = 0; e < ne; ++e) boundary(e);
  } else {
    for (int e = 0; e < ne; ++e) boundary(e);
  }
  return bm;
}

std::string export_mesh(const BuildingModel& model, MeshSelection what) {
  std::ostringstream os;
  os << "# building model\n";
  int base = 1;
  char buf[128];
  auto emit = [&](const std::string& name, const std::vector<Polygon3>& polys) {
    const Mesh mesh = triangulate(polys);
    os << "o " << name << "\n";
    for (const auto& v : mesh.vertices) {
      std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
      os << buf;
    }
    for (const auto& t : mesh.triangles)
      os << "f " << t.v[0] + base << ' ' << t.v[1] + base << ' ' << t.v[2] + base << "\n";
    base += static_cast<int>(mesh.vertices.size());
  };
  if (what != MeshSelection::walls)
    for (const auto& r : model.rooms) emit("room_" + std::to_string(r.id), r.boundary);
  if (what != MeshSelection::rooms)
    for (const auto& w : model.walls) emit((w.slab ? "slab_" : "wall_") + std::to_string(w.id), w.boundary);
  return os.str();
}

std::string export_model_json(const BuildingModel& model) {
  using nlohmann::json;
  auto vec = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
  auto polys = [&](const std::vector<Polygon3>& ps) {
    json out = json::array();
    for (const auto& p : ps) {
      json poly = json::array();
      for (const auto& v : p) poly.push_back(vec(v));
      out.push_back(poly);
    }
    return out;
  };
  json j;
  j["schema_version"] = kModelSchemaVersion;
  j["rooms"] = json::array();
  double room_volume = 0, wall_volume = 0;
  for (const auto& r : model.rooms) {
    j["rooms"].push_back({{"id", r.id}, {"label", r.label}, {"volume", r.volume}, {"cells", r.cells},
                          {"components", r.components}, {"boundary_polygons", polys(r.boundary)}});
    room_volume += r.volume;
  }
  j["walls"] = json::array();
  for (const auto& w : model.walls) {
    json surfaces = json::array();
    for (const auto& s : w.surfaces)
      surfaces.push_back({{"normal", vec(s.normal)}, {"offset", s.offset}, {"virtual", s.is_virtual}});
    j["walls"].push_back({{"id", w.id}, {"kind", w.slab ? "slab" : "wall"}, {"axis", vec(w.axis)},
                          {"thickness", w.thickness}, {"surfaces", surfaces}, {"cells", w.cells},
                          {"volume", w.volume}, {"boundary_polygons", polys(w.boundary)}});
    wall_volume += w.volume;
  }
  j["intersections"] = json::array();
  for (const auto& i : model.intersections) j["intersections"].push_back({{"walls", i.walls}, {"cells", i.cells}});
  json rw = json::array(), ww = json::array();
  for (auto [r, w] : model.room_wall) rw.push_back({r, w});
  for (auto [a, b] : model.wall_wall) ww.push_back({a, b});
  j["adjacency"] = {{"room_wall", rw}, {"wall_wall", ww}};
  j["volumes"] = {{"rooms", room_volume}, {"walls", wall_volume}, {"outside", model.outside_volume},
                  {"box", model.box_volume}};
  j["warnings"] = model.warnings;
  return j.dump(2);
}

}  // namespace recon
