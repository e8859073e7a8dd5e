#include "recon/candidates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace recon {

std::optional<std::pair<int, int>> MultiLabelBitmap::pixel_of(const Vec2& uv) const {
  if (empty()) return std::nullopt;
  double fx = std::floor((uv.x() - origin.x()) / pixel_size);
  double fy = std::floor((uv.y() - origin.y()) / pixel_size);
  if (fx < 0 || fy < 0 || fx >= width || fy >= height) return std::nullopt;
  return std::make_pair(static_cast<int>(fx), static_cast<int>(fy));
}

SurfaceExtent compute_extent(const SurfaceClass cls, const PlaneFrame& frame,
                             const OccupancyBitmap& occ) {
  SurfaceExtent e;
  int ix0 = occ.width, ix1 = -1, iy0 = occ.height, iy1 = -1;
  for (int iy = 0; iy < occ.height; ++iy)
    for (int ix = 0; ix < occ.width; ++ix)
      if (occ.get(ix, iy)) {
        ix0 = std::min(ix0, ix);
        ix1 = std::max(ix1, ix);
        iy0 = std::min(iy0, iy);
        iy1 = std::max(iy1, iy);
      }
  if (ix1 < 0) {
    Vec3 c = frame.lift(Vec2::Zero());
    e.z_lo = e.z_hi = c.z();
    e.xy_lo = e.xy_hi = e.end_a = e.end_b = c.head<2>();
    e.center = c;
    return e;
  }
  const double ps = occ.pixel_size;
  const Vec2 lo = occ.origin + Vec2(ix0 * ps, iy0 * ps);
  const Vec2 hi = occ.origin + Vec2((ix1 + 1) * ps, (iy1 + 1) * ps);
  Vec3 mn = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 mx = -mn;
  for (int k = 0; k < 4; ++k) {
    Vec3 p = frame.lift(Vec2(k & 1 ? hi.x() : lo.x(), k & 2 ? hi.y() : lo.y()));
    mn = mn.cwiseMin(p);
    mx = mx.cwiseMax(p);
  }
  e.z_lo = mn.z();
  e.z_hi = mx.z();
  e.xy_lo = mn.head<2>();
  e.xy_hi = mx.head<2>();
  e.center = frame.lift(0.5 * (lo + hi));
  if (cls == SurfaceClass::wall) {
    e.end_a = frame.lift(Vec2(lo.x(), 0)).head<2>();
    e.end_b = frame.lift(Vec2(hi.x(), 0)).head<2>();
  } else {
    e.end_a = e.xy_lo;
    e.end_b = e.xy_hi;
  }
  return e;
}

std::vector<SurfaceCandidate> classify_rectify(const std::vector<DetectedPlane>& planes,
                                               const PointCloud& cloud,
                                               const ClassifyParams& params) {
  std::vector<SurfaceCandidate> out;
  for (std::size_t p = 0; p < planes.size(); ++p) {
    const auto& plane = planes[p];
    if (plane.inliers.empty()) continue;
    const Vec3 n = plane.frame.normal;
    const double tilt = rad2deg(std::acos(std::min(1.0, std::abs(n.z()))));
    SurfaceCandidate s;
    Vec3 snapped;
    if (tilt <= params.horizontal_tolerance_deg) {
      s.cls = SurfaceClass::slab;
      snapped = Vec3(0, 0, n.z() >= 0 ? 1.0 : -1.0);
    } else if (tilt >= 90.0 - params.vertical_tolerance_deg) {
      s.cls = SurfaceClass::wall;
      Vec2 h = n.head<2>();
      if (h.norm() <= 0) continue;
      h.normalize();
      snapped = Vec3(h.x(), h.y(), 0);
    } else {
      continue;
    }
    const double area = plane.occupancy.support_area();
    if (area < (s.cls == SurfaceClass::wall ? params.min_wall_area : params.min_slab_area)) continue;
    double off = 0;
    for (int i : plane.inliers) off += snapped.dot(cloud.positions[i]);
    off /= static_cast<double>(plane.inliers.size());
    s.frame = PlaneFrame::make(snapped, off);
    DetectedPlane rect{s.frame, plane.inliers, {}};
    double ps = plane.occupancy.pixel_size > 0 ? plane.occupancy.pixel_size : 0.2;
    s.occupancy = build_occupancy(rect, cloud, ps);
    s.extent = compute_extent(s.cls, s.frame, s.occupancy);
    s.inliers = plane.inliers;
    s.source_plane = static_cast<int>(p);
    out.push_back(std::move(s));
  }
  return out;
}

MultiLabelBitmap build_support(const SurfaceCandidate& surface, const PointCloud& cloud,
                               const std::vector<int>& point_labels, int labels,
                               double pixel_size) {
  if (!(pixel_size > 0)) throw PreconditionError("support pixel size must be positive");
  MultiLabelBitmap bm;
  bm.pixel_size = pixel_size;
  bm.labels = labels;
  std::vector<Vec2> uvs;
  uvs.reserve(surface.inliers.size());
  for (int i : surface.inliers) uvs.push_back(surface.frame.project(cloud.positions[i]));
  OccupancyBitmap grid = OccupancyBitmap::from_points(uvs, pixel_size);
  bm.origin = grid.origin;
  bm.width = grid.width;
  bm.height = grid.height;
  bm.occupied = grid.bits;
  const std::size_t npx = static_cast<std::size_t>(bm.width) * bm.height;
  bm.values.assign(npx * labels, 0.0);
  std::vector<double> labeled(npx, 0.0);
  for (std::size_t k = 0; k < uvs.size(); ++k) {
    int lab = point_labels.empty() ? -1 : point_labels[surface.inliers[k]];
    if (lab < 0 || lab >= labels) continue;
    auto px = grid.pixel_of(uvs[k]);
    int ix = px ? px->first : grid.width - 1;
    int iy = px ? px->second : grid.height - 1;
    std::size_t id = bm.index(ix, iy);
    bm.values[id * labels + lab] += 1.0;
    labeled[id] += 1.0;
  }
  for (std::size_t id = 0; id < npx; ++id)
    if (labeled[id] > 0)
      for (int l = 0; l < labels; ++l) bm.values[id * labels + l] /= labeled[id];
  return bm;
}

MultiLabelBitmap dilate_support(const MultiLabelBitmap& in, int radius) {
  if (radius < 0) throw PreconditionError("dilation radius must be non-negative");
  if (radius == 0 || in.empty()) return in;
  MultiLabelBitmap out;
  out.pixel_size = in.pixel_size;
  out.labels = in.labels;
  out.width = in.width + 2 * radius;
  out.height = in.height + 2 * radius;
  out.origin = in.origin - Vec2::Constant(radius * in.pixel_size);
  const std::size_t npx = static_cast<std::size_t>(out.width) * out.height;
  out.values.assign(npx * in.labels, 0.0);
  out.occupied.assign(npx, 0);
  for (int iy = 0; iy < in.height; ++iy)
    for (int ix = 0; ix < in.width; ++ix) {
      auto src = in.at(ix, iy);
      const bool occ = in.is_occupied(ix, iy);
      bool any = occ;
      for (double v : src) any = any || v > 0;
      if (!any) continue;
      // (ix, iy) sits at (ix + radius, iy + radius) in the output; window is +-radius around it.
      for (int oy = iy; oy <= iy + 2 * radius; ++oy)
        for (int ox = ix; ox <= ix + 2 * radius; ++ox) {
          std::size_t id = out.index(ox, oy);
          if (occ) out.occupied[id] = 1;
          for (int l = 0; l < in.labels; ++l) {
            double& dst = out.values[id * in.labels + l];
            dst = std::max(dst, src[l]);
          }
        }
    }
  return out;
}

namespace {

bool intervals_overlap(double a0, double a1, double b0, double b1) {
  if (a0 > a1) std::swap(a0, a1);
  if (b0 > b1) std::swap(b0, b1);
  return std::min(a1, b1) - std::max(a0, b0) > 0;
}

}  // namespace

std::optional<double> pair_gap(const SurfaceCandidate& s, const SurfaceCandidate& t,
                               const PairParams& params) {
  if (s.cls != t.cls || s.is_virtual || t.is_virtual) return std::nullopt;
  const Vec3& ns = s.frame.normal;
  const Vec3& nt = t.frame.normal;
  if (s.cls == SurfaceClass::wall) {
    if (ns.dot(nt) > -std::cos(deg2rad(params.max_angle_deg))) return std::nullopt;
  } else if (ns.z() * nt.z() >= 0) {
    return std::nullopt;
  }
  const double g_st = s.frame.offset - ns.dot(t.extent.center);
  const double g_ts = t.frame.offset - nt.dot(s.extent.center);
  if (!(g_st > 0 && g_st <= params.max_thickness)) return std::nullopt;
  if (!(g_ts > 0 && g_ts <= params.max_thickness)) return std::nullopt;
  if (s.cls == SurfaceClass::wall) {
    const Vec2 u = s.frame.u.head<2>();
    if (!intervals_overlap(u.dot(s.extent.end_a), u.dot(s.extent.end_b), u.dot(t.extent.end_a),
                           u.dot(t.extent.end_b)))
      return std::nullopt;
    if (!intervals_overlap(s.extent.z_lo, s.extent.z_hi, t.extent.z_lo, t.extent.z_hi))
      return std::nullopt;
  } else {
    for (int k = 0; k < 2; ++k)
      if (!intervals_overlap(s.extent.xy_lo[k], s.extent.xy_hi[k], t.extent.xy_lo[k],
                             t.extent.xy_hi[k]))
        return std::nullopt;
  }
  return 0.5 * (g_st + g_ts);
}

SurfaceCandidate make_virtual_partner(const SurfaceCandidate& s, double thickness) {
  if (!(thickness > 0)) throw PreconditionError("virtual thickness must be positive");
  SurfaceCandidate v;
  v.cls = s.cls;
  const Vec3 n = -s.frame.normal;
  v.frame = PlaneFrame::make(n, thickness - s.frame.offset);
  v.occupancy.pixel_size = s.occupancy.pixel_size;
  v.support.pixel_size = s.support.pixel_size;
  v.support.labels = s.support.labels;
  const Vec3 shift = n * thickness;
  v.extent = s.extent;
  v.extent.z_lo += shift.z();
  v.extent.z_hi += shift.z();
  v.extent.xy_lo += shift.head<2>();
  v.extent.xy_hi += shift.head<2>();
  v.extent.end_a += shift.head<2>();
  v.extent.end_b += shift.head<2>();
  v.extent.center += shift;
  v.is_virtual = true;
  v.source_plane = -1;
  return v;
}

PairResult pair_walls(const std::vector<SurfaceCandidate>& surfaces, const PairParams& params) {
  PairResult res;
  res.surfaces = surfaces;
  const std::size_t n = surfaces.size();
  std::vector<char> matched(n, 0);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t t = s + 1; t < n; ++t) {
      auto gap = pair_gap(surfaces[s], surfaces[t], params);
      if (!gap) continue;
      WallCandidate w;
      w.id = static_cast<int>(res.walls.size());
      w.surface_a = static_cast<int>(s);
      w.surface_b = static_cast<int>(t);
      w.thickness = *gap;
      w.orientation = surfaces[s].cls;
      res.walls.push_back(w);
      matched[s] = matched[t] = 1;
    }
  for (std::size_t s = 0; s < n; ++s) {
    if (matched[s] || surfaces[s].is_virtual) continue;
    WallCandidate w;
    w.id = static_cast<int>(res.walls.size());
    w.surface_a = static_cast<int>(s);
    w.surface_b = static_cast<int>(res.surfaces.size());
    w.thickness = params.virtual_thickness;
    w.orientation = surfaces[s].cls;
    res.surfaces.push_back(make_virtual_partner(surfaces[s], params.virtual_thickness));
    res.walls.push_back(w);
  }
  return res;
}

}  // namespace recon
