#include "pwe/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "pwe/common.hpp"

namespace pwe::encoder {
namespace {

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

void validate_correlation(const corpus::CorrelationMatrix& R) {
  const int n = R.size();
  if (n < 2) throw DimensionError("correlation matrix must be at least 2x2");
  for (int i = 0; i < n; ++i) {
    if (std::abs(R.at(i, i) - 1.0) > 1e-9) {
      throw Error("correlation matrix diagonal is not 1 at index " + std::to_string(i));
    }
    for (int j = i + 1; j < n; ++j) {
      if (std::abs(R.at(i, j) - R.at(j, i)) > 1e-9) {
        throw Error("correlation matrix is not symmetric at (" + std::to_string(i) + "," +
                    std::to_string(j) + ")");
      }
    }
  }
}

int find_constant_row(const DoAMatrix& D) {
  for (int i = 0; i < D.n; ++i) {
    const auto row = D.row(i);
    const double first = row[0];
    if (std::all_of(row.begin(), row.end(), [&](double v) { return v == first; })) return i;
  }
  return -1;
}

// Objective restricted to one row, with the other rows' centered values and
// standard deviations precomputed. All evaluations during a row solve go
// through this, keeping the inner loop O(n*m).
class RowProblem {
 public:
  RowProblem(const DoAMatrix& D, const corpus::CorrelationMatrix& R, int row)
      : m_(D.m), row_(row), R_(R) {
    const int n = D.n;
    centered_.assign(static_cast<std::size_t>(n) * m_, 0.0);
    sdev_.assign(static_cast<std::size_t>(n), 0.0);
    others_.reserve(static_cast<std::size_t>(n) - 1);
    for (int j = 0; j < n; ++j) {
      if (j == row) continue;
      others_.push_back(j);
      const auto r = D.row(j);
      double mean = 0.0;
      for (double v : r) mean += v;
      mean /= m_;
      double var = 0.0;
      for (int k = 0; k < m_; ++k) {
        const double c = r[static_cast<std::size_t>(k)] - mean;
        centered_[static_cast<std::size_t>(j) * m_ + k] = c;
        var += c * c;
      }
      sdev_[static_cast<std::size_t>(j)] = std::sqrt(var);
    }
    // Pair terms not touching `row` are constant during the solve.
    static_sum_ = 0.0;
    for (std::size_t a = 0; a < others_.size(); ++a) {
      for (std::size_t b = a + 1; b < others_.size(); ++b) {
        const int p = others_[a];
        const int q = others_[b];
        const double rhat = pair_correlation(p, q);
        const double d = rhat - R_.at(p, q);
        static_sum_ += 2.0 * d * d;
      }
    }
  }

  // Objective value; +inf when the candidate row is constant (Pearson is
  // undefined there, and the line search backs off on non-finite values).
  double value(std::span<const double> x) const {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= m_;
    double var = 0.0;
    for (int k = 0; k < m_; ++k) {
      const double c = x[static_cast<std::size_t>(k)] - mean;
      var += c * c;
    }
    if (var == 0.0) return std::numeric_limits<double>::infinity();
    const double s_row = std::sqrt(var);
    double sum = static_sum_;
    for (int j : others_) {
      const double rhat = row_correlation(x, mean, s_row, j);
      const double d = rhat - R_.at(row_, j);
      sum += 2.0 * d * d;
    }
    return std::sqrt(sum);
  }

  double value_and_gradient(std::span<const double> x, std::span<double> grad) const {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= m_;
    std::vector<double> cx(static_cast<std::size_t>(m_));
    double var = 0.0;
    for (int k = 0; k < m_; ++k) {
      cx[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(k)] - mean;
      var += cx[static_cast<std::size_t>(k)] * cx[static_cast<std::size_t>(k)];
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    if (var == 0.0) return std::numeric_limits<double>::infinity();
    const double s_row = std::sqrt(var);

    double sum = static_sum_;
    std::vector<double> residual(others_.size());
    std::vector<double> rhat(others_.size());
    for (std::size_t a = 0; a < others_.size(); ++a) {
      const int j = others_[a];
      double cov = 0.0;
      const double* cj = &centered_[static_cast<std::size_t>(j) * m_];
      for (int k = 0; k < m_; ++k) cov += cx[static_cast<std::size_t>(k)] * cj[k];
      rhat[a] = cov / (s_row * sdev_[static_cast<std::size_t>(j)]);
      residual[a] = rhat[a] - R_.at(row_, j);
      sum += 2.0 * residual[a] * residual[a];
    }
    const double f = std::sqrt(sum);
    if (f == 0.0) return 0.0;  // exact optimum, gradient vanishes

    // dF/dx_k = (2/F) * sum_j residual_j * d(rhat_j)/dx_k with
    // d(rhat_j)/dx_k = centered_j[k]/(s_i s_j) - rhat_j * centered_i[k]/s_i^2.
    for (std::size_t a = 0; a < others_.size(); ++a) {
      const int j = others_[a];
      const double* cj = &centered_[static_cast<std::size_t>(j) * m_];
      const double w = 2.0 * residual[a] / f;
      const double inv_ss = 1.0 / (s_row * sdev_[static_cast<std::size_t>(j)]);
      const double self_coeff = rhat[a] / var;
      for (int k = 0; k < m_; ++k) {
        grad[static_cast<std::size_t>(k)] +=
            w * (cj[k] * inv_ss - self_coeff * cx[static_cast<std::size_t>(k)]);
      }
    }
    return f;
  }

  double value_and_fd_gradient(std::span<const double> x, std::span<double> grad) const {
    constexpr double h = 1e-6;
    std::vector<double> probe(x.begin(), x.end());
    for (int k = 0; k < m_; ++k) {
      const double saved = probe[static_cast<std::size_t>(k)];
      probe[static_cast<std::size_t>(k)] = saved + h;
      const double fp = value(probe);
      probe[static_cast<std::size_t>(k)] = saved - h;
      const double fm = value(probe);
      probe[static_cast<std::size_t>(k)] = saved;
      grad[static_cast<std::size_t>(k)] = (fp - fm) / (2.0 * h);
    }
    return value(x);
  }

  optim::ObjectiveFn objective_fn(GradientMode mode) const {
    if (mode == GradientMode::analytic) {
      return [this](std::span<const double> x, std::span<double> g) {
        return value_and_gradient(x, g);
      };
    }
    return [this](std::span<const double> x, std::span<double> g) {
      return value_and_fd_gradient(x, g);
    };
  }

 private:
  double pair_correlation(int p, int q) const {
    double cov = 0.0;
    const double* cp = &centered_[static_cast<std::size_t>(p) * m_];
    const double* cq = &centered_[static_cast<std::size_t>(q) * m_];
    for (int k = 0; k < m_; ++k) cov += cp[k] * cq[k];
    return cov / (sdev_[static_cast<std::size_t>(p)] * sdev_[static_cast<std::size_t>(q)]);
  }

  double row_correlation(std::span<const double> x, double mean, double s_row, int j) const {
    double cov = 0.0;
    const double* cj = &centered_[static_cast<std::size_t>(j) * m_];
    for (int k = 0; k < m_; ++k) cov += (x[static_cast<std::size_t>(k)] - mean) * cj[k];
    return cov / (s_row * sdev_[static_cast<std::size_t>(j)]);
  }

  int m_;
  int row_;
  const corpus::CorrelationMatrix& R_;
  std::vector<int> others_;
  std::vector<double> centered_;
  std::vector<double> sdev_;
  double static_sum_ = 0.0;
};

}  // namespace

corpus::CorrelationMatrix empirical_correlation(const DoAMatrix& D) {
  if (D.n < 2 || D.m < 2) throw DimensionError("DoA matrix must be at least 2x2");
  const int bad = find_constant_row(D);
  if (bad >= 0) {
    throw DegenerateVarianceError("DoA matrix row " + std::to_string(bad) + " is constant");
  }
  corpus::CorrelationMatrix result(D.n);
  for (int i = 0; i < D.n; ++i) {
    result.at(i, i) = 1.0;
    for (int j = i + 1; j < D.n; ++j) {
      const double r = corpus::pearson(D.row(i), D.row(j));
      result.at(i, j) = r;
      result.at(j, i) = r;
    }
  }
  return result;
}

double objective(const DoAMatrix& D, const corpus::CorrelationMatrix& R) {
  if (R.size() != D.n) {
    throw DimensionError("objective: R is " + std::to_string(R.size()) + "x" +
                         std::to_string(R.size()) + " but D has " + std::to_string(D.n) +
                         " rows");
  }
  const corpus::CorrelationMatrix empirical = empirical_correlation(D);
  double sum = 0.0;
  for (int i = 0; i < D.n; ++i) {
    const double dd = empirical.at(i, i) - R.at(i, i);
    sum += dd * dd;
    for (int j = i + 1; j < D.n; ++j) {
      const double d = empirical.at(i, j) - R.at(i, j);
      sum += 2.0 * d * d;
    }
  }
  return std::sqrt(sum);
}

DoAMatrix initialize(const corpus::CorrelationMatrix& R, int m, std::uint64_t seed) {
  validate_correlation(R);
  if (m < 2) throw ConfigError("need at least 2 slot columns");
  const int n = R.size();

  Eigen::MatrixXd cov(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) cov(i, j) = R.at(i, j);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("eigendecomposition of R failed");
  Eigen::VectorXd scale = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd root = eig.eigenvectors() * scale.asDiagonal();

  NormalSampler normal(seed);
  DoAMatrix D;
  D.n = n;
  D.m = m;
  D.entries.assign(static_cast<std::size_t>(n) * m, 0.0);
  Eigen::VectorXd z(n);
  for (int col = 0; col < m; ++col) {
    for (int i = 0; i < n; ++i) z(i) = normal.next();
    const Eigen::VectorXd sample = root * z;
    for (int i = 0; i < n; ++i) D.at(i, col) = standard_normal_cdf(sample(i));
  }
  return D;
}

std::pair<DoAMatrix, EncodeReport> encode(const corpus::CorrelationMatrix& R, int m,
                                          int outer_iterations, std::uint64_t seed,
                                          const EncoderSettings& settings) {
  if (outer_iterations < 1) throw ConfigError("outer_iterations must be >= 1");
  const double eps = settings.bound_epsilon;

  DoAMatrix D = initialize(R, m, seed);
  for (double& v : D.entries) v = std::clamp(v, eps, 1.0 - eps);

  double current = objective(D, R);
  if (!std::isfinite(current)) throw Error("encode: non-finite objective after initialization");

  EncodeReport report;
  report.initial_objective = current;
  report.outer_iterations = outer_iterations;
  report.seed = seed;

  const std::vector<double> lower(static_cast<std::size_t>(m), eps);
  const std::vector<double> upper(static_cast<std::size_t>(m), 1.0 - eps);

  for (int sweep = 0; sweep < outer_iterations; ++sweep) {
    for (int row = 0; row < D.n; ++row) {
      const RowProblem problem(D, R, row);
      std::vector<double> x0(D.row(row).begin(), D.row(row).end());
      optim::BoxLbfgsResult res;
      try {
        res = optim::minimize_box(problem.objective_fn(settings.gradient), x0, lower, upper,
                                  settings.inner);
      } catch (const Error& e) {
        throw Error("encode: row " + std::to_string(row) + " update failed: " + e.what());
      }
      if (std::equal(res.x.begin(), res.x.end(), D.row(row).begin())) continue;

      DoAMatrix trial = D;
      std::copy(res.x.begin(), res.x.end(),
                trial.entries.begin() + static_cast<std::size_t>(row) * m);
      const double trial_objective = objective(trial, R);
      if (!std::isfinite(trial_objective)) {
        throw Error("encode: non-finite objective after updating row " + std::to_string(row));
      }
      // Strict-improvement acceptance keeps the trace monotone and makes an
      // already-optimal matrix a fixed point.
      if (trial_objective < current) {
        D = std::move(trial);
        current = trial_objective;
      }
    }
    report.per_iteration_objective.push_back(current);
  }
  report.final_objective = current;
  return {std::move(D), report};
}

std::vector<double> row_objective_gradient(const DoAMatrix& D,
                                           const corpus::CorrelationMatrix& R, int row,
                                           GradientMode mode) {
  if (row < 0 || row >= D.n) throw DimensionError("row index out of range");
  const RowProblem problem(D, R, row);
  std::vector<double> grad(static_cast<std::size_t>(D.m), 0.0);
  if (mode == GradientMode::analytic) {
    problem.value_and_gradient(D.row(row), grad);
  } else {
    problem.value_and_fd_gradient(D.row(row), grad);
  }
  return grad;
}

}  // namespace pwe::encoder
