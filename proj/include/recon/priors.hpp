#pragma once

#include <cstdint>
#include <vector>

#include "recon/candidates.hpp"
#include "recon/complex.hpp"
#include "recon/rng.hpp"

namespace recon {

struct PriorParams {
  double k_base = 100.0;
  int min_samples = 32;
  int directions = 64;
  std::uint64_t seed = 0;
};

/// p_C per cell over R_o (rooms 0..labels-1, outside last) and p_F per face.
struct Priors {
  int labels = 0;
  std::vector<std::vector<double>> cell;
  std::vector<double> face;

  int outside() const { return labels; }
};

/// Surfaces prepared for ray queries; supports must already be dilated.
class RayScene {
 public:
  struct Hit {
    int surface = -1;
    double t = 0;
    bool front = false;
    Vec2 uv = Vec2::Zero();
  };

  explicit RayScene(const std::vector<SurfaceCandidate>& surfaces);
  /// First intersection with an occupied support pixel, or surface = -1.
  Hit first_hit(const Vec3& origin, const Vec3& dir) const;
  const std::vector<SurfaceCandidate>& surfaces() const { return *surfaces_; }

 private:
  const std::vector<SurfaceCandidate>* surfaces_;
  std::vector<int> active_;
};

int sample_count(double k_base, int min_samples, double measure, double diameter);

/// Uniform point in a convex polygon (fan triangulation weighted by area).
Vec3 sample_convex_polygon(Rng& rng, const std::vector<Vec3>& polygon);

std::vector<double> cell_prior(const Cell& cell, const RayScene& scene, int labels,
                               const PriorParams& params);

/// Fraction of samples on the face that land on the dilated occupancy of any
/// real surface merged into the face's plane.
double face_prior(const OrientedFace& face, const CellComplex& cx,
                  const std::vector<SurfaceCandidate>& surfaces, const PriorParams& params);

Priors compute_priors(const CellComplex& cx, const std::vector<SurfaceCandidate>& surfaces,
                      int labels, const PriorParams& params, Exec exec = Exec::parallel);

}  // namespace recon
