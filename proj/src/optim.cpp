#include "pwe/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "pwe/common.hpp"

namespace pwe::optim {
namespace {

struct CurvaturePair {
  std::vector<double> s;  // x_{k+1} - x_k
  std::vector<double> y;  // g_{k+1} - g_k
  double rho = 0.0;       // 1 / (y.s)
};

void project(std::vector<double>& x, std::span<const double> lo, std::span<const double> hi) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = std::clamp(x[i], lo[i], hi[i]);
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double projected_gradient_norm(std::span<const double> x, std::span<const double> g,
                               std::span<const double> lo, std::span<const double> hi) {
  double sup = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double stepped = std::clamp(x[i] - g[i], lo[i], hi[i]);
    sup = std::max(sup, std::abs(x[i] - stepped));
  }
  return sup;
}

// Two-loop recursion (Nocedal & Wright, Alg. 7.4) with the usual gamma
// scaling from the most recent pair.
std::vector<double> two_loop_direction(std::span<const double> grad,
                                       const std::deque<CurvaturePair>& history) {
  std::vector<double> q(grad.begin(), grad.end());
  std::vector<double> alpha(history.size());
  for (std::size_t k = history.size(); k-- > 0;) {
    const auto& pair = history[k];
    alpha[k] = pair.rho * dot(pair.s, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * pair.y[i];
  }
  if (!history.empty()) {
    const auto& last = history.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& v : q) v *= gamma;
  }
  for (std::size_t k = 0; k < history.size(); ++k) {
    const auto& pair = history[k];
    const double beta = pair.rho * dot(pair.y, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += (alpha[k] - beta) * pair.s[i];
  }
  for (double& v : q) v = -v;
  return q;
}

}  // namespace

BoxLbfgsResult minimize_box(const ObjectiveFn& objective, std::vector<double> x0,
                            std::span<const double> lower, std::span<const double> upper,
                            const BoxLbfgsOptions& options) {
  const std::size_t n = x0.size();
  if (lower.size() != n || upper.size() != n) {
    throw DimensionError("minimize_box: bound length mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (lower[i] > upper[i]) throw Error("minimize_box: empty box");
  }

  BoxLbfgsResult result;
  result.x = std::move(x0);
  project(result.x, lower, upper);

  std::vector<double> grad(n), new_grad(n);
  double f = objective(result.x, grad);
  if (!std::isfinite(f)) throw Error("minimize_box: non-finite objective at start");

  std::deque<CurvaturePair> history;
  std::vector<double> candidate(n), step(n);

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (projected_gradient_norm(result.x, grad, lower, upper) <= options.pg_tolerance) {
      result.converged = true;
      break;
    }

    std::vector<double> direction = two_loop_direction(grad, history);
    if (dot(direction, grad) >= 0.0) {
      // Not a descent direction; fall back to steepest descent.
      history.clear();
      for (std::size_t i = 0; i < n; ++i) direction[i] = -grad[i];
    }

    // Projected backtracking with an Armijo test on the actually-taken step
    // P(x + alpha d) - x, which handles directions clipped by the box.
    double alpha = 1.0;
    bool accepted = false;
    double f_new = f;
    for (int ls = 0; ls < options.max_line_search_steps; ++ls) {
      for (std::size_t i = 0; i < n; ++i) {
        candidate[i] = std::clamp(result.x[i] + alpha * direction[i], lower[i], upper[i]);
      }
      for (std::size_t i = 0; i < n; ++i) step[i] = candidate[i] - result.x[i];
      const double gs = dot(grad, step);
      if (gs >= 0.0) break;  // the feasible step is no longer downhill
      f_new = objective(candidate, new_grad);
      if (!std::isfinite(f_new)) {
        alpha *= 0.5;
        continue;
      }
      if (f_new <= f + options.sufficient_decrease * gs) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;  // stuck; return the best point found so far

    CurvaturePair pair;
    pair.s.resize(n);
    pair.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      pair.s[i] = candidate[i] - result.x[i];
      pair.y[i] = new_grad[i] - grad[i];
    }
    const double sy = dot(pair.s, pair.y);
    const double ss = dot(pair.s, pair.s);
    if (sy > 1e-12 * std::sqrt(ss) * std::sqrt(dot(pair.y, pair.y)) && sy > 0.0) {
      pair.rho = 1.0 / sy;
      history.push_back(std::move(pair));
      if (history.size() > static_cast<std::size_t>(options.memory)) history.pop_front();
    }

    result.x = candidate;
    grad = new_grad;
    f = f_new;
    result.iterations = iter + 1;
  }

  result.objective = f;
  return result;
}

}  // namespace pwe::optim
