#pragma once

#include <gmpxx.h>

#include <vector>

#include "recon/common.hpp"

namespace recon {

using Rational = mpq_class;

struct QPoint {
  Rational x, y;
  bool operator==(const QPoint&) const = default;
};

/// a x + b y = c. The positive side is a x + b y > c.
struct QLine {
  Rational a, b, c;
  Rational eval(const QPoint& p) const { return a * p.x + b * p.y - c; }
};

/// Nearest multiple of `quantum` (a power of ten such as 1e-9) as an exact fraction.
Rational snap_rational(double v, double quantum = 1e-9);

int sign_of(const Rational& v);

/// Planar subdivision of a clip rectangle by a set of lines, in exact arithmetic.
struct Arrangement2D {
  struct Edge {
    int v0 = -1, v1 = -1;
    int line = -1;  // merged line index; -1 for the clip boundary
    int pos = -1;   // face on the positive side of `line` (the only face for boundary edges)
    int neg = -1;   // face on the negative side, -1 on the boundary
  };

  QPoint lo, hi;
  std::vector<QLine> lines;        // merged (pairwise non-coincident) lines
  std::vector<int> merged_of;      // input line -> merged line
  std::vector<int> relative_sign;  // input line orientation relative to its merged line
  std::vector<QPoint> vertices;
  std::vector<Edge> edges;
  std::vector<std::vector<int>> faces;       // counter-clockwise vertex loops
  std::vector<std::vector<int>> face_edges;  // edge i joins faces[f][i] and faces[f][i+1]

  /// V - E + F with the unbounded face counted; 2 for a valid subdivision.
  long euler_characteristic() const {
    return static_cast<long>(vertices.size()) - static_cast<long>(edges.size()) +
           static_cast<long>(faces.size()) + 1;
  }
  QPoint centroid(int face) const;
  Rational area(int face) const;
  std::vector<Vec2> polygon(int face) const;
};

/// Incremental construction: every face is split by each line in turn.
/// Coincident lines are merged (the first keeps its orientation).
Arrangement2D exact_arrangement_2d(const std::vector<QLine>& lines, const QPoint& lo,
                                   const QPoint& hi);

/// Exact checks used by the tests and the pipeline's self-diagnostics.
bool faces_convex(const Arrangement2D& arr);
/// Edges on `line` cover the line's chord through the clip rectangle exactly once.
bool line_tiled(const Arrangement2D& arr, int line);
/// Face areas sum to the clip rectangle area exactly.
bool area_tiled(const Arrangement2D& arr);

}  // namespace recon
