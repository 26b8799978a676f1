#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pwe/corpus.hpp"
#include "pwe/optim.hpp"

namespace pwe::encoder {

// n x m matrix of normalized directional entries in [0,1]; row i carries the
// slot values for image i, two slots (azimuth, elevation) per antenna.
struct DoAMatrix {
  int n = 0;
  int m = 0;
  std::vector<double> entries;  // row-major

  double at(int i, int k) const { return entries[static_cast<std::size_t>(i) * m + k]; }
  double& at(int i, int k) { return entries[static_cast<std::size_t>(i) * m + k]; }
  std::span<const double> row(int i) const {
    return {entries.data() + static_cast<std::size_t>(i) * m, static_cast<std::size_t>(m)};
  }
};

struct EncodeReport {
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int outer_iterations = 0;
  std::vector<double> per_iteration_objective;  // after each outer sweep
  std::uint64_t seed = 0;
};

enum class GradientMode { analytic, finite_difference };

struct EncoderSettings {
  GradientMode gradient = GradientMode::analytic;
  double bound_epsilon = 1e-6;  // box is [eps, 1-eps], keeps row variances nonzero
  optim::BoxLbfgsOptions inner;
};

// Pearson correlation of the rows of D, the encoded counterpart of the
// image correlation matrix.
corpus::CorrelationMatrix empirical_correlation(const DoAMatrix& D);

// Frobenius norm of empirical_correlation(D) - R.
double objective(const DoAMatrix& D, const corpus::CorrelationMatrix& R);

// Draws m samples from N(0, R) via the symmetric square root of R (negative
// eigenvalues clamped to 0), arranges them as columns, and squashes every
// entry through the standard normal CDF into [0,1].
DoAMatrix initialize(const corpus::CorrelationMatrix& R, int m, std::uint64_t seed);

// Serial row sweeps: each sweep visits every row in order and refines it by
// a bound-constrained limited-memory quasi-Newton solve with the other rows
// frozen. A row update is kept only when it strictly lowers the objective,
// which makes the per-sweep objective trace non-increasing.
std::pair<DoAMatrix, EncodeReport> encode(const corpus::CorrelationMatrix& R, int m,
                                          int outer_iterations, std::uint64_t seed,
                                          const EncoderSettings& settings = {});

// Gradient of objective(D, R) with respect to row `row`; exposed so the
// analytic form can be validated against the finite-difference fallback.
std::vector<double> row_objective_gradient(const DoAMatrix& D,
                                           const corpus::CorrelationMatrix& R, int row,
                                           GradientMode mode);

}  // namespace pwe::encoder
