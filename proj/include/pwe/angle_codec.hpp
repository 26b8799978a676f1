#pragma once

#include <span>
#include <vector>

namespace pwe::codec {

enum class AngleAxis { azimuth, elevation };

struct AngleRange {
  double lo_deg = 0.0;
  double hi_deg = 0.0;
  AngleAxis axis = AngleAxis::azimuth;
  int antenna_index = 0;
};

struct DensityKnot {
  double angle_deg = 0.0;
  double density = 0.0;
};

// Density over an antenna's reachable angle range; the CDF and its inverse
// translate between normalized [0,1] values and physical angles. Normalized
// to unit mass at construction.
class SteerabilityDensity {
 public:
  enum class Kind { uniform, triangular, piecewise_linear };

  static SteerabilityDensity uniform(AngleRange range);
  // Peak at `mode_deg`; defaults to the midpoint of the range.
  static SteerabilityDensity triangular(AngleRange range, double mode_deg);
  static SteerabilityDensity triangular(AngleRange range);
  // Knots must start at range.lo, end at range.hi, and strictly increase.
  static SteerabilityDensity piecewise_linear(AngleRange range, std::vector<DensityKnot> knots);

  Kind kind() const { return kind_; }
  const AngleRange& range() const { return range_; }
  const std::vector<DensityKnot>& knots() const { return knots_; }

  double density_at(double angle_deg) const;

  // Monotone non-decreasing; 0 at range.lo and 1 at range.hi. Throws on
  // angles outside the range.
  double cdf(double angle_deg) const;

  // Inverse CDF: maps u in [0,1] to an angle in the range. Closed forms for
  // uniform and triangular; bisection to 1e-9 in u-space otherwise.
  double decode(double u) const;

  // Normalized value of a physical angle; the inverse of decode.
  double encode(double angle_deg) const;

 private:
  SteerabilityDensity() = default;

  Kind kind_ = Kind::uniform;
  AngleRange range_;
  double mode_deg_ = 0.0;                 // triangular only
  std::vector<DensityKnot> knots_;        // piecewise-linear only
  std::vector<double> knot_cdf_;          // cumulative mass at each knot
};

// Azimuth/elevation density pair for one receiver antenna.
struct AntennaDensities {
  SteerabilityDensity azimuth;
  SteerabilityDensity elevation;
};

struct DirectionalTargets {
  std::vector<double> azimuth_deg;
  std::vector<double> elevation_deg;
};

// Decodes one DoA-matrix row laid out as alternating (azimuth, elevation)
// slots: entry 2i is antenna i's azimuth, entry 2i+1 its elevation.
DirectionalTargets decode_matrix_row(std::span<const double> row,
                                     const std::vector<AntennaDensities>& densities);

}  // namespace pwe::codec
