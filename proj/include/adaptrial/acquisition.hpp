#pragma once

#include <cmath>
#include <cstddef>
#include <utility>

#include "adaptrial/errors.hpp"
#include "adaptrial/gp.hpp"

namespace adaptrial {

/// Weights of the composite utility: lambda1 on the mean slope (hours),
/// lambda2 on the posterior standard deviation.
struct UtilityWeights {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

inline void validate(const UtilityWeights& w) {
  if (!(w.lambda1 >= 0.0) || !std::isfinite(w.lambda1))
    throw ValidationError("weights.lambda1", "must be a non-negative finite real");
  if (!(w.lambda2 >= 0.0) || !std::isfinite(w.lambda2))
    throw ValidationError("weights.lambda2", "must be a non-negative finite real");
}

/// Uniform grid lo, lo+step, ..., hi with both endpoints included.
struct EvaluationGrid {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.0;

  std::size_t size() const { return intervals() + 1; }

  /// Grid point i. Both endpoints are exact; interior points are computed
  /// with a single rounding so repeated calls are bit-identical.
  double point(std::size_t i) const {
    const std::size_t n = intervals();
    if (i == 0) return lo;
    if (i >= n) return hi;
    return lo + ((hi - lo) * static_cast<double>(i)) / static_cast<double>(n);
  }

  std::size_t intervals() const {
    return static_cast<std::size_t>(std::llround((hi - lo) / step));
  }
};

inline void validate(const EvaluationGrid& grid) {
  if (!(grid.lo < grid.hi)) throw ValidationError("grid", "requires lo < hi");
  if (!(grid.step > 0.0) || !std::isfinite(grid.step))
    throw ValidationError("grid.step", "must be a positive finite real");
  const double ratio = (grid.hi - grid.lo) / grid.step;
  if (std::abs(ratio - std::llround(ratio)) > 1e-9)
    throw ValidationError("grid.step", "(hi - lo)/step must be integral within 1e-9");
}

/// U3(x) = mu(x) + lambda1 * dmu/dx(x) + lambda2 * sigma(x)
inline double utility_u3(const PosteriorModel& model, double x, const UtilityWeights& w) {
  return posterior_mean(model, x) + w.lambda1 * posterior_mean_deriv(model, x) +
         w.lambda2 * posterior_std(model, x);
}

/// U12(x) = mu(x) + lambda1 * dmu/dx(x); the exploitation-only combination.
inline double utility_u12(const PosteriorModel& model, double x, double lambda1) {
  return posterior_mean(model, x) + lambda1 * posterior_mean_deriv(model, x);
}

struct ArgmaxResult {
  double x = 0.0;
  double value = 0.0;
  friend bool operator==(const ArgmaxResult&, const ArgmaxResult&) = default;
};

/// Exhaustive scan of the grid. Ties break to the smallest x, which also
/// makes the result deterministic.
template <class F>
ArgmaxResult argmax_on_grid(F&& f, const EvaluationGrid& grid) {
  ArgmaxResult best;
  const std::size_t n = grid.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = grid.point(i);
    const double v = f(x);
    if (!std::isfinite(v))
      throw NonFiniteUtility("utility is not finite at x = " + std::to_string(x));
    if (i == 0 || v > best.value) best = {x, v};
  }
  return best;
}

/// Grid argmaxes of the posterior mean, its slope, and the posterior std.
struct StationaryTargets {
  double x_exploit = 0.0;
  double x_slope = 0.0;
  double x_explore = 0.0;
};

inline StationaryTargets stationary_targets(const PosteriorModel& model,
                                            const EvaluationGrid& grid) {
  StationaryTargets t;
  t.x_exploit = argmax_on_grid([&](double x) { return posterior_mean(model, x); }, grid).x;
  t.x_slope = argmax_on_grid([&](double x) { return posterior_mean_deriv(model, x); }, grid).x;
  t.x_explore = argmax_on_grid([&](double x) { return posterior_std(model, x); }, grid).x;
  return t;
}

}  // namespace adaptrial
