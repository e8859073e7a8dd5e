#include "recon/complex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace recon {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Highest priority, then lowest index.
int preferred(const std::vector<int>& members, const std::vector<PlaneInput>& planes) {
  int best = members.front();
  for (int m : members)
    if (planes[m].priority > planes[best].priority ||
        (planes[m].priority == planes[best].priority && m < best))
      best = m;
  return best;
}

double diameter2d(const std::vector<Vec2>& poly) {
  double d = 0;
  for (std::size_t i = 0; i < poly.size(); ++i)
    for (std::size_t j = i + 1; j < poly.size(); ++j) d = std::max(d, (poly[i] - poly[j]).norm());
  return d;
}

double clipped_area(std::vector<Vec2> poly, const Vec2& lo, const Vec2& hi) {
  for (int side = 0; side < 4; ++side) {
    const int axis = side % 2;
    const bool upper = side >= 2;
    const double bound = upper ? hi[axis] : lo[axis];
    auto in = [&](const Vec2& p) { return upper ? p[axis] <= bound : p[axis] >= bound; };
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2& p = poly[i];
      const Vec2& q = poly[(i + 1) % poly.size()];
      if (in(p)) out.push_back(p);
      if (in(p) != in(q)) {
        double t = (bound - p[axis]) / (q[axis] - p[axis]);
        out.push_back(p + t * (q - p));
      }
    }
    poly = std::move(out);
    if (poly.empty()) return 0;
  }
  double a2 = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a2 += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a2;
}

}  // namespace

CellComplex build_complex(const ComplexInput& input, const ComplexParams& params) {
  const auto& planes = input.planes;
  const int np = static_cast<int>(planes.size());
  std::vector<int> vert, horz;
  for (int i = 0; i < np; ++i) (planes[i].vertical ? vert : horz).push_back(i);
  if (horz.size() < 2) throw ConfigError("cannot bound interior vertically: fewer than 2 horizontal planes");
  if (!(input.lo.array() < input.hi.array()).all()) throw PreconditionError("empty bounding box");

  CellComplex cx;
  cx.lo = input.lo;
  cx.hi = input.hi;
  cx.plane_target.assign(np, -1);
  cx.plane_sign.assign(np, 1);

  // Direction clusters of vertical planes; paired planes always share one.
  UnionFind uf(np);
  auto theta = [&](int i) {
    double t = std::atan2(planes[i].normal.y(), planes[i].normal.x());
    return t < 0 ? t + kPi : (t >= kPi ? t - kPi : t);
  };
  const double tol = deg2rad(params.merge_angle_deg);
  for (std::size_t x = 0; x < vert.size(); ++x)
    for (std::size_t y = x + 1; y < vert.size(); ++y) {
      double d = std::abs(theta(vert[x]) - theta(vert[y]));
      if (std::min(d, kPi - d) <= tol) uf.unite(vert[x], vert[y]);
    }
  for (const auto& w : input.walls)
    if (w.vertical) uf.unite(w.plane_a, w.plane_b);

  std::vector<std::vector<int>> clusters;
  {
    std::vector<int> slot(np, -1);
    for (int i : vert) {
      int r = uf.find(i);
      if (slot[r] < 0) {
        slot[r] = static_cast<int>(clusters.size());
        clusters.emplace_back();
      }
      clusters[slot[r]].push_back(i);
    }
  }

  std::vector<QLine> lines;
  std::vector<std::vector<int>> line_members;
  std::vector<std::vector<int>> member_sign;
  for (const auto& cl : clusters) {
    const int rep = preferred(cl, planes);
    const Vec2 r = planes[rep].normal.head<2>().normalized();
    const Rational a = snap_rational(r.x(), params.quantum);
    const Rational b = snap_rational(r.y(), params.quantum);
    const Vec2 rd(a.get_d(), b.get_d());
    std::vector<std::pair<double, int>> by_offset;
    for (int i : cl) by_offset.emplace_back(rd.dot(planes[i].anchor.head<2>()), i);
    std::sort(by_offset.begin(), by_offset.end());
    std::size_t g = 0;
    while (g < by_offset.size()) {
      std::size_t e = g;
      std::vector<int> members;
      while (e < by_offset.size() && by_offset[e].first - by_offset[g].first <= params.merge_distance)
        members.push_back(by_offset[e++].second);
      std::sort(members.begin(), members.end());
      const int p = preferred(members, planes);
      double po = 0;
      for (auto& [o, i] : by_offset)
        if (i == p) po = o;
      const int sp = planes[p].normal.head<2>().dot(r) >= 0 ? 1 : -1;
      const Rational c = snap_rational(po, params.quantum);
      lines.push_back(sp > 0 ? QLine{a, b, c} : QLine{-a, -b, -c});
      std::vector<int> signs;
      for (int i : members) signs.push_back((planes[i].normal.head<2>().dot(r) >= 0 ? 1 : -1) * sp);
      line_members.push_back(std::move(members));
      member_sign.push_back(std::move(signs));
      g = e;
    }
  }

  const QPoint qlo{snap_rational(input.lo.x(), params.quantum), snap_rational(input.lo.y(), params.quantum)};
  const QPoint qhi{snap_rational(input.hi.x(), params.quantum), snap_rational(input.hi.y(), params.quantum)};
  cx.arr = exact_arrangement_2d(lines, qlo, qhi);
  cx.line_planes.resize(cx.arr.lines.size());
  for (std::size_t l = 0; l < lines.size(); ++l) {
    const int m = cx.arr.merged_of[l];
    for (std::size_t k = 0; k < line_members[l].size(); ++k) {
      const int i = line_members[l][k];
      cx.plane_target[i] = m;
      cx.plane_sign[i] = member_sign[l][k] * cx.arr.relative_sign[l];
      cx.line_planes[m].push_back(i);
    }
  }
  for (auto& v : cx.line_planes) std::sort(v.begin(), v.end());

  // z-levels.
  std::vector<std::pair<double, int>> by_z;
  for (int i : horz) by_z.emplace_back(planes[i].offset * planes[i].normal.z(), i);
  std::sort(by_z.begin(), by_z.end());
  cx.z_levels.push_back(input.lo.z());
  cx.level_sign.push_back(0);
  cx.level_planes.emplace_back();
  for (std::size_t g = 0; g < by_z.size();) {
    std::size_t e = g;
    std::vector<int> members;
    while (e < by_z.size() && by_z[e].first - by_z[g].first <= params.merge_distance)
      members.push_back(by_z[e++].second);
    std::sort(members.begin(), members.end());
    const int p = preferred(members, planes);
    const double z = planes[p].offset * planes[p].normal.z();
    if (z > input.lo.z() && z < input.hi.z()) {
      const int level = static_cast<int>(cx.z_levels.size());
      const int sp = planes[p].normal.z() > 0 ? 1 : -1;
      cx.z_levels.push_back(z);
      cx.level_sign.push_back(sp);
      for (int i : members) {
        cx.plane_target[i] = level;
        cx.plane_sign[i] = (planes[i].normal.z() > 0 ? 1 : -1) * sp;
      }
      cx.level_planes.push_back(members);
    }
    g = e;
  }
  cx.z_levels.push_back(input.hi.z());
  cx.level_sign.push_back(0);
  cx.level_planes.emplace_back();

  // Cells.
  const int nf = static_cast<int>(cx.arr.faces.size());
  const int nk = cx.interval_count();
  std::vector<std::vector<Vec2>> foot(nf);
  std::vector<double> area2d(nf), diam2d(nf);
  for (int f = 0; f < nf; ++f) {
    foot[f] = cx.arr.polygon(f);
    area2d[f] = cx.arr.area(f).get_d();
    diam2d[f] = diameter2d(foot[f]);
  }
  for (int k = 0; k < nk; ++k)
    for (int f = 0; f < nf; ++f) {
      Cell c;
      c.id = static_cast<int>(cx.cells.size());
      c.face2d = f;
      c.interval = k;
      c.z_lo = cx.z_levels[k];
      c.z_hi = cx.z_levels[k + 1];
      c.area2d = area2d[f];
      const double dz = c.z_hi - c.z_lo;
      c.volume = area2d[f] * dz;
      c.diameter = std::sqrt(diam2d[f] * diam2d[f] + dz * dz);
      c.footprint = foot[f];
      cx.cells.push_back(std::move(c));
    }

  // Lateral faces.
  for (std::size_t e = 0; e < cx.arr.edges.size(); ++e) {
    const auto& edge = cx.arr.edges[e];
    if (edge.line < 0 || edge.pos < 0 || edge.neg < 0) continue;
    const auto& l = cx.arr.lines[edge.line];
    const Vec3 n = Vec3(l.a.get_d(), l.b.get_d(), 0).normalized();
    Vec2 p0(cx.arr.vertices[edge.v0].x.get_d(), cx.arr.vertices[edge.v0].y.get_d());
    Vec2 p1(cx.arr.vertices[edge.v1].x.get_d(), cx.arr.vertices[edge.v1].y.get_d());
    const Vec2 d = p1 - p0;
    if (d.y() * n.x() - d.x() * n.y() < 0) std::swap(p0, p1);
    const double len = d.norm();
    for (int k = 0; k < nk; ++k) {
      OrientedFace of;
      of.id = static_cast<int>(cx.faces.size());
      of.ca = cx.cell_id(edge.pos, k);
      of.cb = cx.cell_id(edge.neg, k);
      of.plane = edge.line;
      of.edge2d = static_cast<int>(e);
      const double z0 = cx.z_levels[k], z1 = cx.z_levels[k + 1];
      of.area = len * (z1 - z0);
      of.diameter = std::hypot(len, z1 - z0);
      of.normal = n;
      of.polygon = {Vec3(p0.x(), p0.y(), z0), Vec3(p1.x(), p1.y(), z0), Vec3(p1.x(), p1.y(), z1),
                    Vec3(p0.x(), p0.y(), z1)};
      cx.faces.push_back(std::move(of));
    }
  }
  // Horizontal faces.
  for (int k = 1; k < nk; ++k) {
    const int s = cx.level_sign[k];
    for (int f = 0; f < nf; ++f) {
      OrientedFace of;
      of.id = static_cast<int>(cx.faces.size());
      of.horizontal = true;
      of.plane = k;
      const int upper = cx.cell_id(f, k), lower = cx.cell_id(f, k - 1);
      of.ca = s > 0 ? upper : lower;
      of.cb = s > 0 ? lower : upper;
      of.area = area2d[f];
      of.diameter = diam2d[f];
      of.normal = Vec3(0, 0, s);
      for (const auto& p : foot[f]) of.polygon.emplace_back(p.x(), p.y(), cx.z_levels[k]);
      if (s < 0) std::reverse(of.polygon.begin(), of.polygon.end());
      cx.faces.push_back(std::move(of));
    }
  }
  cx.cell_faces.resize(cx.cells.size());
  for (const auto& f : cx.faces) {
    cx.cell_faces[f.ca].push_back(f.id);
    cx.cell_faces[f.cb].push_back(f.id);
  }
  wall_membership(cx, input);
  return cx;
}

void wall_membership(CellComplex& cx, const ComplexInput& input) {
  const int nf = static_cast<int>(cx.arr.faces.size());
  const int nk = cx.interval_count();
  std::vector<QPoint> centroid(nf);
  for (int f = 0; f < nf; ++f) centroid[f] = cx.arr.centroid(f);

  for (auto& c : cx.cells) c.walls.clear();
  cx.wall_cells.assign(input.walls.size(), {});
  for (std::size_t w = 0; w < input.walls.size(); ++w) {
    const auto& wall = input.walls[w];
    const int ta = cx.plane_target[wall.plane_a], tb = cx.plane_target[wall.plane_b];
    if (ta < 0 || tb < 0) continue;
    const int sa = cx.plane_sign[wall.plane_a], sb = cx.plane_sign[wall.plane_b];
    std::vector<char> face_in(nf, 0), interval_in(nk, 0);
    if (wall.vertical) {
      const auto& la = cx.arr.lines[ta];
      const auto& lb = cx.arr.lines[tb];
      for (int f = 0; f < nf; ++f)
        face_in[f] = sa * sgn(la.eval(centroid[f])) < 0 && sb * sgn(lb.eval(centroid[f])) < 0;
      int k0 = nk, k1 = -1;
      for (int k = 0; k < nk; ++k)
        if (cx.z_levels[k] < wall.z_hi && cx.z_levels[k + 1] > wall.z_lo) {
          k0 = std::min(k0, k);
          k1 = std::max(k1, k);
        }
      if (k1 >= 0)
        for (int k = std::max(0, k0 - 1); k <= std::min(nk - 1, k1 + 1); ++k) interval_in[k] = 1;
    } else {
      const double za = cx.z_levels[ta], zb = cx.z_levels[tb];
      for (int k = 0; k < nk; ++k) {
        const double zm = 0.5 * (cx.z_levels[k] + cx.z_levels[k + 1]);
        interval_in[k] = sa * cx.level_sign[ta] * (zm - za) < 0 && sb * cx.level_sign[tb] * (zm - zb) < 0;
      }
      for (int f = 0; f < nf; ++f)
        face_in[f] = clipped_area(cx.cells[f].footprint, wall.xy_lo, wall.xy_hi) > 1e-12;
    }
    for (int k = 0; k < nk; ++k) {
      if (!interval_in[k]) continue;
      for (int f = 0; f < nf; ++f)
        if (face_in[f]) {
          const int c = cx.cell_id(f, k);
          cx.wall_cells[w].push_back(c);
          cx.cells[c].walls.push_back(static_cast<int>(w));
        }
    }
    std::sort(cx.wall_cells[w].begin(), cx.wall_cells[w].end());
  }

  cx.inner_face_diagnostics = 0;
  for (auto& f : cx.faces) {
    const auto& wa = cx.cells[f.ca].walls;
    const auto& wb = cx.cells[f.cb].walls;
    f.boundary_walls.clear();
    f.inner_walls.clear();
    std::set_difference(wb.begin(), wb.end(), wa.begin(), wa.end(), std::back_inserter(f.boundary_walls));
    std::set_intersection(wa.begin(), wa.end(), wb.begin(), wb.end(), std::back_inserter(f.inner_walls));
    if (!f.inner_walls.empty() && f.boundary_walls.empty()) ++cx.inner_face_diagnostics;
  }
}

ComplexInput complex_input(const PairResult& pairs, const ComplexParams& params) {
  ComplexInput in;
  constexpr double inf = std::numeric_limits<double>::infinity();
  Vec2 xy_lo = Vec2::Constant(inf), xy_hi = Vec2::Constant(-inf);
  double z_lo = inf, z_hi = -inf, hz_lo = inf, hz_hi = -inf;
  for (const auto& s : pairs.surfaces) {
    PlaneInput p;
    p.vertical = s.cls == SurfaceClass::wall;
    p.normal = s.frame.normal;
    p.offset = s.frame.offset;
    p.anchor = s.extent.center;
    p.priority = s.is_virtual ? -1.0 : s.occupancy.support_area();
    p.is_virtual = s.is_virtual;
    in.planes.push_back(p);
    xy_lo = xy_lo.cwiseMin(s.extent.xy_lo);
    xy_hi = xy_hi.cwiseMax(s.extent.xy_hi);
    z_lo = std::min(z_lo, s.extent.z_lo);
    z_hi = std::max(z_hi, s.extent.z_hi);
    if (!p.vertical) {
      const double z = s.frame.offset * s.frame.normal.z();
      hz_lo = std::min(hz_lo, z);
      hz_hi = std::max(hz_hi, z);
    }
  }
  for (const auto& w : pairs.walls) {
    const auto& a = pairs.surfaces[w.surface_a];
    const auto& b = pairs.surfaces[w.surface_b];
    WallInput wi;
    wi.vertical = w.orientation == SurfaceClass::wall;
    wi.plane_a = w.surface_a;
    wi.plane_b = w.surface_b;
    wi.z_lo = std::min(a.extent.z_lo, b.extent.z_lo);
    wi.z_hi = std::max(a.extent.z_hi, b.extent.z_hi);
    wi.xy_lo = a.extent.xy_lo.cwiseMin(b.extent.xy_lo);
    wi.xy_hi = a.extent.xy_hi.cwiseMax(b.extent.xy_hi);
    in.walls.push_back(wi);
  }
  if (pairs.surfaces.empty()) return in;
  in.lo.head<2>() = xy_lo - Vec2::Constant(params.bbox_margin);
  in.hi.head<2>() = xy_hi + Vec2::Constant(params.bbox_margin);
  if (hz_lo <= hz_hi) {
    in.lo.z() = hz_lo - params.virtual_thickness;
    in.hi.z() = hz_hi + params.virtual_thickness;
  } else {
    in.lo.z() = z_lo - params.virtual_thickness;
    in.hi.z() = z_hi + params.virtual_thickness;
  }
  return in;
}

bool on_box_boundary(const CellComplex& cx, int cell) {
  const Cell& c = cx.cells[cell];
  if (c.interval == 0 || c.interval == cx.interval_count() - 1) return true;
  if (c.face2d < 0 || c.face2d >= static_cast<int>(cx.arr.face_edges.size())) return false;
  for (int e : cx.arr.face_edges[c.face2d])
    if (cx.arr.edges[e].line < 0) return true;
  return false;
}

}  // namespace recon
