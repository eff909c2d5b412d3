#pragma once

#include <functional>
#include <span>
#include <vector>

namespace ground::optim {

/// Writes the gradient into `grad` and returns the objective value.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct Config {
  int max_iters = 500;
  double tolerance = 1e-6;       // stop when max |grad_i| < tolerance
  double initial_step = 1.0;     // first trial step, scaled by 1/||grad||
  double armijo = 1e-4;          // sufficient-decrease constant
  int max_backtracks = 60;
};

struct Result {
  std::vector<double> x;
  double value = 0.0;
  double grad_max_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // objective after each accepted step, history[0] at x0
};

/// Deterministic batch gradient descent. Each step moves along -grad with a
/// Barzilai-Borwein trial step, halved until the Armijo condition holds, so
/// the objective never increases across accepted steps.
Result minimize(const Objective& f, std::vector<double> x0, const Config& config);

}  // namespace ground::optim
