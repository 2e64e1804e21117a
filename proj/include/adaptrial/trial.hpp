#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adaptrial/acquisition.hpp"
#include "adaptrial/errors.hpp"
#include "adaptrial/gp.hpp"
#include "adaptrial/rng.hpp"

namespace adaptrial {

/// Logistic dose-response curve: theta(x) = 1/(1 + exp(-x + m)) + b, with
/// outcomes observed through Gaussian noise of std noise_std.
struct GroundTruth {
  double midpoint = 0.0;
  double intercept = 0.0;
  double noise_std = 0.0;
  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

inline void validate(const GroundTruth& truth) {
  if (!std::isfinite(truth.midpoint)) throw ValidationError("truth.m", "must be finite");
  if (!std::isfinite(truth.intercept)) throw ValidationError("truth.b", "must be finite");
  if (!(truth.noise_std >= 0.0) || !std::isfinite(truth.noise_std))
    throw ValidationError("truth.noise_std", "must be a non-negative finite real");
}

inline double true_performance(const GroundTruth& truth, double x) {
  return 1.0 / (1.0 + std::exp(-x + truth.midpoint)) + truth.intercept;
}

/// d theta/dx = s (1 - s) with s the logistic factor; independent of b.
inline double true_performance_slope(const GroundTruth& truth, double x) {
  const double s = 1.0 / (1.0 + std::exp(-x + truth.midpoint));
  return s * (1.0 - s);
}

/// theta(x) plus one Gaussian draw scaled by noise_std. Always consumes
/// exactly one draw so stream positions do not depend on noise_std.
inline double simulate_outcome(const GroundTruth& truth, double x, RandomStream& rng) {
  return true_performance(truth, x) + truth.noise_std * rng.gaussian();
}

/// Everything one trial needs: ground truth, surrogate hyperparameters,
/// utility weights, dose domain, budget, grid resolution, and seed.
struct ScenarioConfig {
  GroundTruth truth;
  KernelSpec kernel;
  UtilityWeights weights;
  double domain_lo = 0.0;
  double domain_hi = 0.0;
  int budget = 0;
  double grid_step = 0.01;
  std::uint64_t seed = 0;
  std::optional<std::string> warm_start_path;  // as written in the config file
  ObservationSet warm_start;                   // loaded contents, empty if absent

  EvaluationGrid grid() const { return {domain_lo, domain_hi, grid_step}; }

  friend bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
    return a.truth == b.truth && a.kernel.length_scale == b.kernel.length_scale &&
           a.kernel.signal_amplitude == b.kernel.signal_amplitude &&
           a.weights.lambda1 == b.weights.lambda1 && a.weights.lambda2 == b.weights.lambda2 &&
           a.domain_lo == b.domain_lo && a.domain_hi == b.domain_hi && a.budget == b.budget &&
           a.grid_step == b.grid_step && a.seed == b.seed &&
           a.warm_start_path == b.warm_start_path && a.warm_start == b.warm_start;
  }
};

inline void validate(const ScenarioConfig& config) {
  validate(config.truth);
  validate(config.kernel);
  validate(config.weights);
  if (!std::isfinite(config.domain_lo) || !std::isfinite(config.domain_hi) ||
      !(config.domain_lo < config.domain_hi))
    throw ValidationError("domain", "requires finite lo < hi");
  if (config.budget < 1) throw ValidationError("budget", "must be at least 1");
  validate(config.grid());
  for (const Observation& obs : config.warm_start) {
    if (!(obs.x >= config.domain_lo && obs.x <= config.domain_hi))
      throw ValidationError("warm_start", "dose outside the configured domain");
    if (!std::isfinite(obs.y)) throw ValidationError("warm_start", "non-finite outcome");
  }
}

enum class DesignKind { adaptive, fixed };

inline const char* to_string(DesignKind kind) {
  return kind == DesignKind::adaptive ? "adaptive" : "fixed";
}

/// One executed step. Acquisition fields are present when the dose was
/// chosen by maximizing the utility (absent for fixed designs and for an
/// adaptive first dose drawn uniformly).
struct TrialStep {
  int t = 0;
  double x = 0.0;
  double y = 0.0;
  std::optional<double> acq_argmax;
  std::optional<double> acq_value;
  friend bool operator==(const TrialStep&, const TrialStep&) = default;
};

struct TrialTrace {
  DesignKind design_kind = DesignKind::fixed;
  std::vector<TrialStep> steps;
  ScenarioConfig config_echo;
  std::string rng_algorithm_id;
};

/// Interactive trial in progress. `observations` starts as the warm-start
/// set; `pending_x` is the dose awaiting a human-entered outcome.
struct LiveState {
  ScenarioConfig config;
  ObservationSet observations;
  std::optional<double> pending_x;
  std::optional<ArgmaxResult> pending_acq;  // set when pending_x came from the acquisition

  int steps_taken() const {
    return static_cast<int>(observations.size() - config.warm_start.size());
  }
};

namespace detail {

inline PosteriorModel refit(const ScenarioConfig& config, const ObservationSet& data) {
  return fit_posterior(data, config.kernel, config.truth.noise_std);
}

inline ArgmaxResult next_dose(const ScenarioConfig& config, const ObservationSet& data) {
  const PosteriorModel model = refit(config, data);
  return argmax_on_grid(
      [&](double x) { return utility_u3(model, x, config.weights); }, config.grid());
}

}  // namespace detail

/// Starts a live trial. With no warm start the first dose is drawn
/// uniformly from the domain; otherwise the warm-start posterior already
/// drives the acquisition.
inline std::pair<LiveState, double> live_begin(const ScenarioConfig& config, RandomStream& rng) {
  validate(config);
  LiveState state{config, config.warm_start, std::nullopt, std::nullopt};
  if (state.observations.empty()) {
    state.pending_x = rng.uniform(config.domain_lo, config.domain_hi);
  } else {
    const ArgmaxResult best = detail::next_dose(config, state.observations);
    state.pending_x = best.x;
    state.pending_acq = best;
  }
  return {state, *state.pending_x};
}

/// Records the outcome for the pending dose, refits, and recommends the
/// next dose; returns nullopt once the budget is exhausted.
inline std::pair<LiveState, std::optional<double>> live_step(const LiveState& state,
                                                             double observed_y) {
  if (!state.pending_x) throw NoPendingDose("no dose recommendation is pending");
  if (!std::isfinite(observed_y)) throw NonFiniteOutcome("observed outcome must be finite");

  LiveState next = state;
  next.observations.push_back({*state.pending_x, observed_y});
  next.pending_x.reset();
  next.pending_acq.reset();
  if (next.steps_taken() >= next.config.budget) return {next, std::nullopt};

  const ArgmaxResult best = detail::next_dose(next.config, next.observations);
  next.pending_x = best.x;
  next.pending_acq = best;
  return {next, best.x};
}

/// Runs the adaptive design to completion by driving the live loop with
/// simulated outcomes, so the two modes cannot diverge.
inline TrialTrace run_adaptive(const ScenarioConfig& config, RandomStream& rng) {
  TrialTrace trace{DesignKind::adaptive, {}, config, std::string(kRngAlgorithmId)};
  auto [state, dose] = live_begin(config, rng);
  for (int t = 1; t <= config.budget; ++t) {
    const double y = simulate_outcome(config.truth, dose, rng);
    TrialStep step{t, dose, y, std::nullopt, std::nullopt};
    if (state.pending_acq) {
      step.acq_argmax = state.pending_acq->x;
      step.acq_value = state.pending_acq->value;
    }
    trace.steps.push_back(step);
    auto [next_state, next_dose] = live_step(state, y);
    state = std::move(next_state);
    if (!next_dose) break;
    dose = *next_dose;
  }
  return trace;
}

/// Runs the equally spaced baseline: doses lo + i (hi-lo)/(n-1) with both
/// endpoints included, or the domain midpoint when n = 1.
inline TrialTrace run_fixed(const ScenarioConfig& config, RandomStream& rng) {
  validate(config);
  TrialTrace trace{DesignKind::fixed, {}, config, std::string(kRngAlgorithmId)};
  const int n = config.budget;
  for (int i = 0; i < n; ++i) {
    double x;
    if (n == 1) {
      x = config.domain_lo + (config.domain_hi - config.domain_lo) / 2.0;
    } else if (i == n - 1) {
      x = config.domain_hi;
    } else {
      x = config.domain_lo +
          ((config.domain_hi - config.domain_lo) * static_cast<double>(i)) /
              static_cast<double>(n - 1);
    }
    const double y = simulate_outcome(config.truth, x, rng);
    trace.steps.push_back({i + 1, x, y, std::nullopt, std::nullopt});
  }
  return trace;
}

}  // namespace adaptrial
