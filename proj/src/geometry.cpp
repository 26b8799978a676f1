#include "pwe/geometry.hpp"

#include <algorithm>

namespace pwe::geom {

bool segment_hits_box_interior(const Vec3& p, const Vec3& q, const Aabb& box) {
  // Slab test over the parameter t in [0,1]; the hit counts only when the
  // clipped interval has positive measure, so tangential contact is ignored.
  double t0 = 0.0, t1 = 1.0;
  const double d[3] = {q.x - p.x, q.y - p.y, q.z - p.z};
  const double o[3] = {p.x, p.y, p.z};
  const double lo[3] = {box.lo.x, box.lo.y, box.lo.z};
  const double hi[3] = {box.hi.x, box.hi.y, box.hi.z};
  for (int axis = 0; axis < 3; ++axis) {
    if (d[axis] == 0.0) {
      if (o[axis] <= lo[axis] || o[axis] >= hi[axis]) return false;
      continue;
    }
    double ta = (lo[axis] - o[axis]) / d[axis];
    double tb = (hi[axis] - o[axis]) / d[axis];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 >= t1) return false;
  }
  return t1 > t0;
}

AzEl direction_to_azel(const Vec3& unit) {
  const double el = std::asin(std::clamp(unit.z, -1.0, 1.0));
  const double az = std::atan2(unit.y, unit.x);
  return {az * kDegPerRad, el * kDegPerRad};
}

Vec3 azel_to_direction(const AzEl& a) {
  const double az = a.az_deg / kDegPerRad;
  const double el = a.el_deg / kDegPerRad;
  const double c = std::cos(el);
  return {c * std::cos(az), c * std::sin(az), std::sin(el)};
}

double angular_distance_deg(const AzEl& a, const AzEl& b) {
  return angular_distance_deg(azel_to_direction(a), azel_to_direction(b));
}

double angular_distance_deg(const Vec3& u, const Vec3& v) {
  // atan2 form stays accurate near 0 and 180 degrees, unlike acos(dot).
  return std::atan2(norm(cross(u, v)), dot(u, v)) * kDegPerRad;
}

}  // namespace pwe::geom
