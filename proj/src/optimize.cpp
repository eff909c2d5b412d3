#include "ground/optimize.hpp"

#include <algorithm>
#include <cmath>

namespace ground::optim {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

Result minimize(const Objective& f, std::vector<double> x0, const Config& config) {
  const std::size_t n = x0.size();
  Result r;
  r.x = std::move(x0);
  std::vector<double> g(n), x_new(n), g_new(n);
  double fx = f(r.x, g);
  r.history.push_back(fx);

  const double g_norm0 = std::sqrt(dot(g, g));
  double trial = config.initial_step / std::max(1.0, g_norm0);

  for (r.iterations = 0; r.iterations < config.max_iters; ++r.iterations) {
    r.grad_max_norm = max_abs(g);
    if (r.grad_max_norm < config.tolerance) {
      r.converged = true;
      break;
    }
    const double gg = dot(g, g);
    double step = trial;
    bool accepted = false;
    double f_new = 0.0;
    for (int b = 0; b <= config.max_backtracks; ++b) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = r.x[i] - step * g[i];
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx - config.armijo * step * gg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no representable decrease left

    double sy = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = x_new[i] - r.x[i];
      const double y = g_new[i] - g[i];
      sy += s * y;
      ss += s * s;
    }
    trial = sy > 0.0 ? ss / sy : 2.0 * step;

    r.x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
    r.history.push_back(fx);
  }
  r.value = fx;
  r.grad_max_norm = max_abs(g);
  if (r.grad_max_norm < config.tolerance) r.converged = true;
  return r;
}

}  // namespace ground::optim
