#include "recon/arrangement.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace recon {

Rational snap_rational(double v, double quantum) {
  if (!std::isfinite(v)) throw PreconditionError("cannot snap a non-finite value");
  const long denom = std::lround(1.0 / quantum);
  Rational r(std::lround(v * static_cast<double>(denom)), denom);
  r.canonicalize();
  return r;
}

int sign_of(const Rational& v) { return sgn(v); }

namespace {

struct Vertex {
  QPoint p;
  int tag;  // line of the edge leaving this vertex
};
using Poly = std::vector<Vertex>;

QPoint intersect(const QPoint& p, const QPoint& q, const Rational& sp,
                 const Rational& sq) {
  Rational t = sp / (sp - sq);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

// Part of `poly` on side `side` (+1 or -1) of line `li`.
Poly clip(const Poly& poly, const std::vector<Rational>& s, int li, int side) {
  Poly out;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    const int sp = sgn(s[i]) * side;
    const int sq = sgn(s[j]) * side;
    if (sp > 0) {
      out.push_back(poly[i]);
      if (sq < 0) out.push_back({intersect(poly[i].p, poly[j].p, s[i], s[j]), li});
    } else if (sp == 0) {
      out.push_back({poly[i].p, sq < 0 ? li : poly[i].tag});
    } else if (sq > 0) {
      out.push_back({intersect(poly[i].p, poly[j].p, s[i], s[j]), poly[i].tag});
    }
  }
  return out;
}

bool coincident(const QLine& l, const QLine& m) {
  return l.a * m.b - l.b * m.a == 0 && l.a * m.c - l.c * m.a == 0 && l.b * m.c - l.c * m.b == 0;
}

struct PointLess {
  bool operator()(const QPoint& a, const QPoint& b) const {
    int c = cmp(a.x, b.x);
    return c != 0 ? c < 0 : cmp(a.y, b.y) < 0;
  }
};

}  // namespace

QPoint Arrangement2D::centroid(int face) const {
  QPoint c{0, 0};
  for (int v : faces[face]) {
    c.x += vertices[v].x;
    c.y += vertices[v].y;
  }
  Rational n(static_cast<long>(faces[face].size()));
  c.x /= n;
  c.y /= n;
  return c;
}

Rational Arrangement2D::area(int face) const {
  Rational a2 = 0;
  const auto& f = faces[face];
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto& p = vertices[f[i]];
    const auto& q = vertices[f[(i + 1) % f.size()]];
    a2 += p.x * q.y - q.x * p.y;
  }
  return a2 / 2;
}

std::vector<Vec2> Arrangement2D::polygon(int face) const {
  std::vector<Vec2> out;
  for (int v : faces[face]) out.emplace_back(vertices[v].x.get_d(), vertices[v].y.get_d());
  return out;
}

Arrangement2D exact_arrangement_2d(const std::vector<QLine>& input, const QPoint& lo,
                                   const QPoint& hi) {
  if (!(lo.x < hi.x && lo.y < hi.y)) throw PreconditionError("clip rectangle is empty");
  Arrangement2D arr;
  arr.lo = lo;
  arr.hi = hi;
  for (const auto& l : input) {
    if (l.a == 0 && l.b == 0) throw PreconditionError("degenerate line");
    int found = -1;
    for (std::size_t m = 0; m < arr.lines.size(); ++m)
      if (coincident(l, arr.lines[m])) {
        found = static_cast<int>(m);
        break;
      }
    if (found < 0) {
      arr.merged_of.push_back(static_cast<int>(arr.lines.size()));
      arr.relative_sign.push_back(1);
      arr.lines.push_back(l);
    } else {
      const auto& m = arr.lines[found];
      arr.merged_of.push_back(found);
      arr.relative_sign.push_back(sgn(l.a * m.a + l.b * m.b) >= 0 ? 1 : -1);
    }
  }

  std::vector<Poly> polys{Poly{{{lo.x, lo.y}, -1}, {{hi.x, lo.y}, -1}, {{hi.x, hi.y}, -1},
                               {{lo.x, hi.y}, -1}}};
  for (std::size_t li = 0; li < arr.lines.size(); ++li) {
    const auto& line = arr.lines[li];
    std::vector<Poly> next;
    next.reserve(polys.size() + 8);
    for (auto& poly : polys) {
      std::vector<Rational> s(poly.size());
      bool pos = false, neg = false;
      for (std::size_t i = 0; i < poly.size(); ++i) {
        s[i] = line.eval(poly[i].p);
        pos = pos || sgn(s[i]) > 0;
        neg = neg || sgn(s[i]) < 0;
      }
      if (pos && neg) {
        next.push_back(clip(poly, s, static_cast<int>(li), 1));
        next.push_back(clip(poly, s, static_cast<int>(li), -1));
      } else {
        next.push_back(std::move(poly));
      }
    }
    polys = std::move(next);
  }

  std::map<QPoint, int, PointLess> vid;
  std::map<std::pair<int, int>, int> eid;
  for (std::size_t f = 0; f < polys.size(); ++f) {
    std::vector<int> loop;
    for (const auto& v : polys[f]) {
      auto [it, fresh] = vid.try_emplace(v.p, static_cast<int>(arr.vertices.size()));
      if (fresh) arr.vertices.push_back(v.p);
      loop.push_back(it->second);
    }
    arr.faces.push_back(loop);
  }
  arr.face_edges.resize(polys.size());
  for (std::size_t f = 0; f < polys.size(); ++f) {
    const auto& loop = arr.faces[f];
    const QPoint c = arr.centroid(static_cast<int>(f));
    for (std::size_t i = 0; i < loop.size(); ++i) {
      int a = loop[i], b = loop[(i + 1) % loop.size()];
      auto key = std::minmax(a, b);
      auto [it, fresh] = eid.try_emplace(key, static_cast<int>(arr.edges.size()));
      if (fresh) {
        Arrangement2D::Edge e;
        e.v0 = key.first;
        e.v1 = key.second;
        e.line = polys[f][i].tag;
        arr.edges.push_back(e);
      }
      auto& e = arr.edges[it->second];
      if (e.line < 0 || sgn(arr.lines[e.line].eval(c)) > 0)
        (e.pos < 0 ? e.pos : e.neg) = static_cast<int>(f);
      else
        e.neg = static_cast<int>(f);
      arr.face_edges[f].push_back(it->second);
    }
  }
  return arr;
}

bool faces_convex(const Arrangement2D& arr) {
  for (const auto& f : arr.faces) {
    const std::size_t n = f.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = arr.vertices[f[i]];
      const auto& q = arr.vertices[f[(i + 1) % n]];
      const auto& r = arr.vertices[f[(i + 2) % n]];
      if (sgn((q.x - p.x) * (r.y - q.y) - (q.y - p.y) * (r.x - q.x)) <= 0) return false;
    }
  }
  return true;
}

namespace {

// Coordinate used to measure length along a line: x unless the line is vertical.
Rational param(const QLine& l, const QPoint& p) { return l.b != 0 ? p.x : p.y; }

}  // namespace

bool line_tiled(const Arrangement2D& arr, int li) {
  const auto& l = arr.lines[li];
  // Chord through the rectangle from its intersections with the four sides.
  std::vector<QPoint> hits;
  auto inside = [&](const QPoint& p) {
    return p.x >= arr.lo.x && p.x <= arr.hi.x && p.y >= arr.lo.y && p.y <= arr.hi.y;
  };
  if (l.b != 0)
    for (const Rational& x : {arr.lo.x, arr.hi.x}) {
      QPoint p{x, (l.c - l.a * x) / l.b};
      if (inside(p)) hits.push_back(p);
    }
  if (l.a != 0)
    for (const Rational& y : {arr.lo.y, arr.hi.y}) {
      QPoint p{(l.c - l.b * y) / l.a, y};
      if (inside(p)) hits.push_back(p);
    }
  Rational chord = 0;
  if (!hits.empty()) {
    Rational mn = param(l, hits[0]), mx = mn;
    for (const auto& h : hits) {
      mn = std::min(mn, param(l, h));
      mx = std::max(mx, param(l, h));
    }
    chord = mx - mn;
  }
  Rational covered = 0;
  bool has_edges = false;
  for (const auto& e : arr.edges)
    if (e.line == li) {
      has_edges = true;
      covered += abs(param(l, arr.vertices[e.v1]) - param(l, arr.vertices[e.v0]));
    }
  // Lines along the clip boundary or missing the interior own no edges.
  bool pos = false, neg = false;
  for (const QPoint& c : {arr.lo, QPoint{arr.hi.x, arr.lo.y}, arr.hi, QPoint{arr.lo.x, arr.hi.y}}) {
    pos = pos || sgn(l.eval(c)) > 0;
    neg = neg || sgn(l.eval(c)) < 0;
  }
  if (!(pos && neg)) return !has_edges;
  return covered == chord;
}

bool area_tiled(const Arrangement2D& arr) {
  Rational total = 0;
  for (std::size_t f = 0; f < arr.faces.size(); ++f) total += arr.area(static_cast<int>(f));
  return total == (arr.hi.x - arr.lo.x) * (arr.hi.y - arr.lo.y);
}

}  // namespace recon
