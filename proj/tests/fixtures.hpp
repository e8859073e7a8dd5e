#pragma once

#include "recon/complex.hpp"

namespace recon::fixtures {

inline PlaneInput vplane(Vec2 n, double offset, double priority = 1) {
  PlaneInput p;
  p.vertical = true;
  p.normal = Vec3(n.x(), n.y(), 0).normalized();
  p.offset = offset;
  p.anchor = Vec3(p.normal.x() * offset, p.normal.y() * offset, 1.0);
  p.priority = priority;
  return p;
}

inline PlaneInput hplane(double z, int sign, double priority = 1) {
  PlaneInput p;
  p.vertical = false;
  p.normal = Vec3(0, 0, sign);
  p.offset = z * sign;
  p.anchor = Vec3(0, 0, z);
  p.priority = priority;
  return p;
}

// Square room [0,4]^2 x [0,2.6] with 0.2 m walls on all sides and 0.3 m slabs.
inline ComplexInput square_room() {
  ComplexInput in;
  const double t = 0.2;
  // Interior surfaces face into the room, exterior ones face away.
  in.planes.push_back(vplane({1, 0}, 0));        // 0 inner west, normal +x
  in.planes.push_back(vplane({-1, 0}, t));       // 1 outer west at x=-t, normal -x
  in.planes.push_back(vplane({-1, 0}, -4));      // 2 inner east x=4, normal -x
  in.planes.push_back(vplane({1, 0}, 4 + t));    // 3 outer east
  in.planes.push_back(vplane({0, 1}, 0));        // 4 inner south
  in.planes.push_back(vplane({0, -1}, t));       // 5 outer south
  in.planes.push_back(vplane({0, -1}, -4));      // 6 inner north
  in.planes.push_back(vplane({0, 1}, 4 + t));    // 7 outer north
  in.planes.push_back(hplane(0, 1));             // 8 floor
  in.planes.push_back(hplane(-0.3, -1));         // 9 floor underside
  in.planes.push_back(hplane(2.6, -1));          // 10 ceiling
  in.planes.push_back(hplane(2.9, 1));           // 11 roof
  for (int w = 0; w < 4; ++w) {
    WallInput wi;
    wi.plane_a = 2 * w;
    wi.plane_b = 2 * w + 1;
    wi.z_lo = 0;
    wi.z_hi = 2.6;
    in.walls.push_back(wi);
  }
  for (int s = 0; s < 2; ++s) {
    WallInput wi;
    wi.vertical = false;
    wi.plane_a = 8 + 2 * s;
    wi.plane_b = 9 + 2 * s;
    wi.xy_lo = Vec2(-t, -t);
    wi.xy_hi = Vec2(4 + t, 4 + t);
    in.walls.push_back(wi);
  }
  in.lo = Vec3(-1.2, -1.2, -0.6);
  in.hi = Vec3(5.2, 5.2, 3.2);
  return in;
}

}  // namespace recon::fixtures
