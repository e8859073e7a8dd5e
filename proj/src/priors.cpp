#include "recon/priors.hpp"

#include <cmath>
#include <limits>

namespace recon {

RayScene::RayScene(const std::vector<SurfaceCandidate>& surfaces) : surfaces_(&surfaces) {
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    const auto& s = surfaces[i];
    if (s.is_virtual || s.support.empty()) continue;
    active_.push_back(static_cast<int>(i));
  }
}

RayScene::Hit RayScene::first_hit(const Vec3& o, const Vec3& d) const {
  Hit best;
  best.t = std::numeric_limits<double>::infinity();
  for (int i : active_) {
    const auto& s = (*surfaces_)[i];
    const double denom = s.frame.normal.dot(d);
    if (std::abs(denom) < 1e-12) continue;
    const double t = (s.frame.offset - s.frame.normal.dot(o)) / denom;
    if (!(t > 0) || t >= best.t) continue;
    const Vec2 uv = s.frame.project(o + t * d);
    if (!s.support.occupied_at(uv)) continue;
    best.surface = i;
    best.t = t;
    best.front = denom < 0;
    best.uv = uv;
  }
  return best;
}

int sample_count(double k_base, int min_samples, double measure, double diameter) {
  const double k = std::ceil(k_base * std::max(measure, diameter));
  return std::max(min_samples, static_cast<int>(std::min(k, 1e8)));
}

Vec3 sample_convex_polygon(Rng& rng, const std::vector<Vec3>& poly) {
  double total = 0;
  std::vector<double> cum;
  for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
    total += 0.5 * (poly[i] - poly[0]).cross(poly[i + 1] - poly[0]).norm();
    cum.push_back(total);
  }
  const double pick = uniform01(rng) * total;
  std::size_t tri = 0;
  while (tri + 1 < cum.size() && cum[tri] <= pick) ++tri;
  double a = uniform01(rng), b = uniform01(rng);
  if (a + b > 1) {
    a = 1 - a;
    b = 1 - b;
  }
  return poly[0] + a * (poly[tri + 1] - poly[0]) + b * (poly[tri + 2] - poly[0]);
}

std::vector<double> cell_prior(const Cell& cell, const RayScene& scene, int labels,
                               const PriorParams& params) {
  std::vector<double> votes(labels + 1, 0.0);
  const int k = sample_count(params.k_base, params.min_samples, cell.volume, cell.diameter);
  Rng rng = make_stream(params.seed, 0x50434300ULL, static_cast<std::uint64_t>(cell.id));
  std::vector<Vec3> foot;
  for (const auto& p : cell.footprint) foot.emplace_back(p.x(), p.y(), 0.0);
  const auto& surfaces = scene.surfaces();
  for (int s = 0; s < k; ++s) {
    Vec3 o = sample_convex_polygon(rng, foot);
    o.z() = cell.z_lo + uniform01(rng) * (cell.z_hi - cell.z_lo);
    for (int r = 0; r < params.directions; ++r) {
      const auto hit = scene.first_hit(o, uniform_sphere(rng));
      bool counted = false;
      if (hit.surface >= 0 && hit.front) {
        const auto& sup = surfaces[hit.surface].support;
        auto px = sup.pixel_of(hit.uv);
        auto v = sup.at(px->first, px->second);
        double sum = 0;
        for (int l = 0; l < labels && l < sup.labels; ++l) sum += v[l];
        if (sum > 0) {
          for (int l = 0; l < labels && l < sup.labels; ++l) votes[l] += v[l] / sum;
          counted = true;
        }
      }
      if (!counted) votes[labels] += 1.0;
    }
  }
  const double n = static_cast<double>(k) * params.directions;
  for (auto& v : votes) v /= n;
  return votes;
}

double face_prior(const OrientedFace& face, const CellComplex& cx,
                  const std::vector<SurfaceCandidate>& surfaces, const PriorParams& params) {
  const auto& sources = face.horizontal ? cx.level_planes[face.plane] : cx.line_planes[face.plane];
  std::vector<int> real;
  for (int s : sources)
    if (!surfaces[s].is_virtual && !surfaces[s].support.empty()) real.push_back(s);
  if (real.empty()) return 0.0;
  const int k = sample_count(params.k_base, params.min_samples, face.area, face.diameter);
  Rng rng = make_stream(params.seed, 0x50464600ULL, static_cast<std::uint64_t>(face.id));
  int inside = 0;
  for (int i = 0; i < k; ++i) {
    const Vec3 p = sample_convex_polygon(rng, face.polygon);
    for (int s : real)
      if (surfaces[s].support.occupied_at(surfaces[s].frame.project(p))) {
        ++inside;
        break;
      }
  }
  return static_cast<double>(inside) / k;
}

Priors compute_priors(const CellComplex& cx, const std::vector<SurfaceCandidate>& surfaces,
                      int labels, const PriorParams& params, Exec exec) {
  Priors pr;
  pr.labels = labels;
  pr.cell.resize(cx.cells.size());
  pr.face.resize(cx.faces.size());
  RayScene scene(surfaces);
  const auto nc = static_cast<std::int64_t>(cx.cells.size());
  const auto nf = static_cast<std::int64_t>(cx.faces.size());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t c = 0; c < nc; ++c) pr.cell[c] = cell_prior(cx.cells[c], scene, labels, params);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t f = 0; f < nf; ++f) pr.face[f] = face_prior(cx.faces[f], cx, surfaces, params);
  } else {
    for (std::int64_t c = 0; c < nc; ++c) pr.cell[c] = cell_prior(cx.cells[c], scene, labels, params);
    for (std::int64_t f = 0; f < nf; ++f) pr.face[f] = face_prior(cx.faces[f], cx, surfaces, params);
  }
  return pr;
}

}  // namespace recon
