#include "pwe/angle_codec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pwe/common.hpp"

namespace pwe::codec {
namespace {

void validate_range(const AngleRange& range) {
  if (!(range.lo_deg < range.hi_deg)) throw ConfigError("angle range requires lo < hi");
  if (range.axis == AngleAxis::azimuth &&
      (range.lo_deg < -180.0 || range.hi_deg > 180.0)) {
    throw ConfigError("azimuth range outside [-180, 180]");
  }
  if (range.axis == AngleAxis::elevation &&
      (range.lo_deg < -90.0 || range.hi_deg > 90.0)) {
    throw ConfigError("elevation range outside [-90, 90]");
  }
}

constexpr double kAngleSlack = 1e-9;

}  // namespace

SteerabilityDensity SteerabilityDensity::uniform(AngleRange range) {
  validate_range(range);
  SteerabilityDensity d;
  d.kind_ = Kind::uniform;
  d.range_ = range;
  return d;
}

SteerabilityDensity SteerabilityDensity::triangular(AngleRange range, double mode_deg) {
  validate_range(range);
  if (mode_deg < range.lo_deg || mode_deg > range.hi_deg) {
    throw ConfigError("triangular mode outside the angle range");
  }
  SteerabilityDensity d;
  d.kind_ = Kind::triangular;
  d.range_ = range;
  d.mode_deg_ = mode_deg;
  return d;
}

SteerabilityDensity SteerabilityDensity::triangular(AngleRange range) {
  return triangular(range, (range.lo_deg + range.hi_deg) / 2.0);
}

SteerabilityDensity SteerabilityDensity::piecewise_linear(AngleRange range,
                                                          std::vector<DensityKnot> knots) {
  validate_range(range);
  if (knots.size() < 2) throw ConfigError("piecewise-linear density needs >= 2 knots");
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (knots[i].density < 0.0) throw ConfigError("negative density knot");
    if (i > 0 && !(knots[i].angle_deg > knots[i - 1].angle_deg)) {
      throw ConfigError("density knots must be strictly increasing in angle");
    }
  }
  if (std::abs(knots.front().angle_deg - range.lo_deg) > kAngleSlack ||
      std::abs(knots.back().angle_deg - range.hi_deg) > kAngleSlack) {
    throw ConfigError("density knots must span the full angle range");
  }
  knots.front().angle_deg = range.lo_deg;
  knots.back().angle_deg = range.hi_deg;

  double mass = 0.0;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    mass += (knots[i].density + knots[i - 1].density) / 2.0 *
            (knots[i].angle_deg - knots[i - 1].angle_deg);
  }
  if (mass <= 0.0) throw ConfigError("density has zero total mass");

  SteerabilityDensity d;
  d.kind_ = Kind::piecewise_linear;
  d.range_ = range;
  d.knots_ = std::move(knots);
  d.knot_cdf_.assign(d.knots_.size(), 0.0);
  for (auto& k : d.knots_) k.density /= mass;
  for (std::size_t i = 1; i < d.knots_.size(); ++i) {
    d.knot_cdf_[i] = d.knot_cdf_[i - 1] +
                     (d.knots_[i].density + d.knots_[i - 1].density) / 2.0 *
                         (d.knots_[i].angle_deg - d.knots_[i - 1].angle_deg);
  }
  d.knot_cdf_.back() = 1.0;
  return d;
}

double SteerabilityDensity::density_at(double angle_deg) const {
  const double lo = range_.lo_deg, hi = range_.hi_deg;
  if (angle_deg < lo - kAngleSlack || angle_deg > hi + kAngleSlack) {
    throw Error("angle " + std::to_string(angle_deg) + " outside range [" +
                std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  const double a = std::clamp(angle_deg, lo, hi);
  switch (kind_) {
    case Kind::uniform:
      return 1.0 / (hi - lo);
    case Kind::triangular: {
      const double c = mode_deg_;
      if (a <= c) {
        if (c == lo) return 0.0;
        return 2.0 * (a - lo) / ((hi - lo) * (c - lo));
      }
      if (c == hi) return 0.0;
      return 2.0 * (hi - a) / ((hi - lo) * (hi - c));
    }
    case Kind::piecewise_linear: {
      auto it = std::upper_bound(knots_.begin(), knots_.end(), a,
                                 [](double v, const DensityKnot& k) { return v < k.angle_deg; });
      if (it == knots_.begin()) return knots_.front().density;
      if (it == knots_.end()) return knots_.back().density;
      const auto& k1 = *it;
      const auto& k0 = *(it - 1);
      const double t = (a - k0.angle_deg) / (k1.angle_deg - k0.angle_deg);
      return k0.density + t * (k1.density - k0.density);
    }
  }
  return 0.0;
}

double SteerabilityDensity::cdf(double angle_deg) const {
  const double lo = range_.lo_deg, hi = range_.hi_deg;
  if (angle_deg < lo - kAngleSlack || angle_deg > hi + kAngleSlack) {
    throw Error("angle " + std::to_string(angle_deg) + " outside range [" +
                std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  const double a = std::clamp(angle_deg, lo, hi);
  if (a == lo) return 0.0;
  if (a == hi) return 1.0;
  switch (kind_) {
    case Kind::uniform:
      return (a - lo) / (hi - lo);
    case Kind::triangular: {
      const double c = mode_deg_;
      if (a <= c) return (a - lo) * (a - lo) / ((hi - lo) * (c - lo));
      return 1.0 - (hi - a) * (hi - a) / ((hi - lo) * (hi - c));
    }
    case Kind::piecewise_linear: {
      auto it = std::upper_bound(knots_.begin(), knots_.end(), a,
                                 [](double v, const DensityKnot& k) { return v < k.angle_deg; });
      const std::size_t seg = static_cast<std::size_t>(it - knots_.begin()) - 1;
      const auto& k0 = knots_[seg];
      const double w = a - k0.angle_deg;
      const double partial = (k0.density + density_at(a)) / 2.0 * w;
      return std::min(knot_cdf_[seg] + partial, 1.0);
    }
  }
  return 0.0;
}

double SteerabilityDensity::decode(double u) const {
  if (u < 0.0 || u > 1.0) throw Error("normalized value outside [0,1]");
  const double lo = range_.lo_deg, hi = range_.hi_deg;
  if (u == 0.0) return lo;
  if (u == 1.0) return hi;
  switch (kind_) {
    case Kind::uniform:
      return lo + u * (hi - lo);
    case Kind::triangular: {
      const double c = mode_deg_;
      const double split = (c - lo) / (hi - lo);
      if (u <= split) return lo + std::sqrt(u * (hi - lo) * (c - lo));
      return hi - std::sqrt((1.0 - u) * (hi - lo) * (hi - c));
    }
    case Kind::piecewise_linear: {
      double a = lo, b = hi;
      double fa = 0.0, fb = 1.0;
      for (int iter = 0; iter < 200 && fb - fa > 1e-9; ++iter) {
        const double mid = (a + b) / 2.0;
        const double fm = cdf(mid);
        if (fm < u) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
          fb = fm;
        }
        if (b - a < 1e-13 * (hi - lo)) break;  // flat span, any point is valid
      }
      return (a + b) / 2.0;
    }
  }
  return lo;
}

double SteerabilityDensity::encode(double angle_deg) const { return cdf(angle_deg); }

DirectionalTargets decode_matrix_row(std::span<const double> row,
                                     const std::vector<AntennaDensities>& densities) {
  if (row.size() != 2 * densities.size()) {
    throw DimensionError("row has " + std::to_string(row.size()) + " slots but " +
                         std::to_string(densities.size()) + " antennas need " +
                         std::to_string(2 * densities.size()));
  }
  DirectionalTargets targets;
  targets.azimuth_deg.reserve(densities.size());
  targets.elevation_deg.reserve(densities.size());
  for (std::size_t i = 0; i < densities.size(); ++i) {
    const double u_az = row[2 * i];
    const double u_el = row[2 * i + 1];
    if (u_az < 0.0 || u_az > 1.0 || u_el < 0.0 || u_el > 1.0) {
      throw Error("normalized slot value outside [0,1] at antenna " + std::to_string(i));
    }
    targets.azimuth_deg.push_back(densities[i].azimuth.decode(u_az));
    targets.elevation_deg.push_back(densities[i].elevation.decode(u_el));
  }
  return targets;
}

}  // namespace pwe::codec
