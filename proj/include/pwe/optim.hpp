#pragma once

#include <functional>
#include <span>
#include <vector>

namespace pwe::optim {

// Objective callback: fills `grad` and returns the function value.
using ObjectiveFn = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct BoxLbfgsOptions {
  int memory = 10;               // limited-memory history length
  int max_iterations = 50;
  double pg_tolerance = 1e-8;    // sup-norm of the projected gradient
  int max_line_search_steps = 40;
  double sufficient_decrease = 1e-4;
};

struct BoxLbfgsResult {
  std::vector<double> x;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;  // projected-gradient tolerance reached
};

// Limited-memory quasi-Newton minimization subject to box constraints
// lower[i] <= x[i] <= upper[i]. The search direction comes from the standard
// two-loop recursion over curvature pairs; iterates stay feasible through a
// projected backtracking line search, and convergence is measured on the
// projected gradient x - P(x - g).
BoxLbfgsResult minimize_box(const ObjectiveFn& objective, std::vector<double> x0,
                            std::span<const double> lower, std::span<const double> upper,
                            const BoxLbfgsOptions& options = {});

}  // namespace pwe::optim
