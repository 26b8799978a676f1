#pragma once

#include <cmath>

namespace pwe::geom {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  bool operator==(const Vec3& o) const = default;
};

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  return {a.x / n, a.y / n, a.z / n};
}

// Axis-aligned box, used for occluders.
struct Aabb {
  Vec3 lo, hi;

  bool contains_open(const Vec3& p) const {
    return p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y &&
           p.z > lo.z && p.z < hi.z;
  }
  bool contains_closed(const Vec3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
           p.z >= lo.z && p.z <= hi.z;
  }
  Vec3 center() const { return {(lo.x + hi.x) / 2, (lo.y + hi.y) / 2, (lo.z + hi.z) / 2}; }
};

// True iff the open segment (p,q) passes through the open interior of the
// box. Grazing a face or touching only at an endpoint does not count.
bool segment_hits_box_interior(const Vec3& p, const Vec3& q, const Aabb& box);

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kDegPerRad = 57.29577951308232;

// Spherical direction in the global frame: azimuth measured from +x toward
// +y in the horizontal plane, elevation from the horizontal plane toward +z.
struct AzEl {
  double az_deg = 0.0;
  double el_deg = 0.0;
};

AzEl direction_to_azel(const Vec3& unit);
Vec3 azel_to_direction(const AzEl& a);

// Great-circle angle in degrees between two directions.
double angular_distance_deg(const AzEl& a, const AzEl& b);
// Same angle, from unit direction vectors.
double angular_distance_deg(const Vec3& u, const Vec3& v);

// Round to the nearest multiple of `step_deg`.
inline double quantize_deg(double angle_deg, double step_deg) {
  return std::round(angle_deg / step_deg) * step_deg;
}

}  // namespace pwe::geom
