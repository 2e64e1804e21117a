#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "adaptrial/acquisition.hpp"
#include "adaptrial/errors.hpp"
#include "adaptrial/format.hpp"
#include "adaptrial/gp.hpp"
#include "adaptrial/rng.hpp"
#include "adaptrial/trial.hpp"

namespace adaptrial {

inline constexpr double kDefaultBandMultiplier = 1.96;

/// Dose maximizing theta(x) + lambda1 * theta'(x) on the grid; the
/// vertical marker drawn in the plots. Smallest-x tie-break.
inline double true_optimum(const GroundTruth& truth, double lambda1,
                           const EvaluationGrid& grid) {
  return argmax_on_grid(
             [&](double x) {
               return true_performance(truth, x) + lambda1 * true_performance_slope(truth, x);
             },
             grid)
      .x;
}

/// Fit-quality summary over a dose region.
struct TrialMetrics {
  double rmse_opt_region = 0.0;
  double mean_sigma_opt_region = 0.0;
  double est_optimum = 0.0;
  double opt_error = 0.0;
  friend bool operator==(const TrialMetrics&, const TrialMetrics&) = default;
};

/// RMSE of the posterior mean against the true curve and the mean
/// posterior std, both over grid points inside [region.first,
/// region.second]; plus the estimated optimum (argmax of the
/// exploitation utility over the whole grid) and its error.
inline TrialMetrics compute_metrics(const PosteriorModel& model, const GroundTruth& truth,
                                    double lambda1, const EvaluationGrid& grid,
                                    std::pair<double, double> region) {
  double sq_sum = 0.0;
  double sigma_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid.point(i);
    if (x < region.first || x > region.second) continue;
    const double err = posterior_mean(model, x) - true_performance(truth, x);
    sq_sum += err * err;
    sigma_sum += posterior_std(model, x);
    ++count;
  }
  if (count == 0)
    throw EmptyRegion("no grid point falls inside [" + format_double(region.first) + ", " +
                      format_double(region.second) + "]");
  TrialMetrics m;
  m.rmse_opt_region = std::sqrt(sq_sum / static_cast<double>(count));
  m.mean_sigma_opt_region = sigma_sum / static_cast<double>(count);
  m.est_optimum =
      argmax_on_grid([&](double x) { return utility_u12(model, x, lambda1); }, grid).x;
  m.opt_error = std::abs(m.est_optimum - true_optimum(truth, lambda1, grid));
  return m;
}

struct ComparisonRow {
  int seed_index = 0;
  DesignKind design = DesignKind::adaptive;
  int checkpoint = 0;
  TrialMetrics metrics;
};

struct WinRate {
  int checkpoint = 0;
  std::string metric;
  double adaptive_rate = 0.0;  // ties count 0.5 to each side
};

struct ComparisonReport {
  int n_seeds = 0;
  std::vector<int> checkpoints;
  std::vector<ComparisonRow> rows;  // ordered by (seed_index, design, checkpoint)
  std::vector<WinRate> aggregates;  // ordered by (checkpoint, metric)
};

namespace detail {

inline double metric_field(const TrialMetrics& m, std::string_view name) {
  if (name == "rmse") return m.rmse_opt_region;
  if (name == "mean_sigma") return m.mean_sigma_opt_region;
  return m.opt_error;
}

}  // namespace detail

/// Win-rate aggregation with the tie convention: a design compared
/// against itself scores exactly 0.5. Rows must cover each (seed,
/// checkpoint) once per design.
inline std::vector<WinRate> aggregate_win_rates(const std::vector<ComparisonRow>& rows,
                                                const std::vector<int>& checkpoints,
                                                int n_seeds) {
  static constexpr std::string_view kMetrics[] = {"rmse", "mean_sigma", "opt_err"};
  std::vector<WinRate> out;
  for (int checkpoint : checkpoints) {
    for (std::string_view metric : kMetrics) {
      double score = 0.0;
      for (int seed = 0; seed < n_seeds; ++seed) {
        const TrialMetrics* adaptive = nullptr;
        const TrialMetrics* fixed = nullptr;
        for (const ComparisonRow& row : rows) {
          if (row.seed_index != seed || row.checkpoint != checkpoint) continue;
          (row.design == DesignKind::adaptive ? adaptive : fixed) = &row.metrics;
        }
        if (!adaptive || !fixed) continue;
        const double a = detail::metric_field(*adaptive, metric);
        const double f = detail::metric_field(*fixed, metric);
        score += (a < f) ? 1.0 : (a == f ? 0.5 : 0.0);
      }
      out.push_back({checkpoint, std::string(metric), score / n_seeds});
    }
  }
  return out;
}

/// Runs both designs for every replication and evaluates metrics at each
/// checkpoint by refitting on the first t observations. Replication k of
/// design d draws from a stream derived from (master seed, k, d), so the
/// report does not depend on worker scheduling; any worker exception
/// aborts the whole report.
inline ComparisonReport compare(const ScenarioConfig& config, int n_seeds,
                                const std::vector<int>& checkpoints, unsigned n_workers = 0,
                                std::optional<std::pair<double, double>> region = std::nullopt) {
  validate(config);
  if (n_seeds < 1) throw ValidationError("n_seeds", "must be at least 1");
  if (checkpoints.empty()) throw ValidationError("checkpoints", "must not be empty");
  for (int t : checkpoints)
    if (t < 1 || t > config.budget)
      throw ValidationError("checkpoints", "each checkpoint must lie in 1..budget");

  const std::pair<double, double> reg = region.value_or(
      std::pair{config.truth.midpoint - 2.0, config.truth.midpoint + 2.0});
  const EvaluationGrid grid = config.grid();

  ComparisonReport report;
  report.n_seeds = n_seeds;
  report.checkpoints = checkpoints;
  const std::size_t rows_per_seed = 2 * checkpoints.size();
  report.rows.resize(static_cast<std::size_t>(n_seeds) * rows_per_seed);

  auto run_seed = [&](int seed_index) {
    const auto evaluate = [&](const TrialTrace& trace, DesignKind design, std::size_t slot) {
      for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        const int t = checkpoints[c];
        ObservationSet prefix;
        prefix.reserve(static_cast<std::size_t>(t));
        for (int i = 0; i < t; ++i) prefix.push_back({trace.steps[i].x, trace.steps[i].y});
        const PosteriorModel model =
            fit_posterior(prefix, config.kernel, config.truth.noise_std);
        report.rows[slot + c] = {seed_index, design, t,
                                 compute_metrics(model, config.truth,
                                                 config.weights.lambda1, grid, reg)};
      }
    };
    const std::size_t base = static_cast<std::size_t>(seed_index) * rows_per_seed;
    RandomStream adaptive_rng(derive_seed(config.seed, {static_cast<std::uint64_t>(seed_index), 1}));
    evaluate(run_adaptive(config, adaptive_rng), DesignKind::adaptive, base);
    RandomStream fixed_rng(derive_seed(config.seed, {static_cast<std::uint64_t>(seed_index), 2}));
    evaluate(run_fixed(config, fixed_rng), DesignKind::fixed, base + checkpoints.size());
  };

  unsigned workers = n_workers != 0 ? n_workers : std::thread::hardware_concurrency();
  workers = std::clamp<unsigned>(workers, 1, static_cast<unsigned>(n_seeds));
  if (workers == 1) {
    for (int s = 0; s < n_seeds; ++s) run_seed(s);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> failures(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int s = static_cast<int>(w); s < n_seeds; s += static_cast<int>(workers))
            run_seed(s);
        } catch (...) {
          failures[w] = std::current_exception();
        }
      });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : failures)
      if (e) std::rethrow_exception(e);
  }

  report.aggregates = aggregate_win_rates(report.rows, checkpoints, n_seeds);
  return report;
}

// ---------------------------------------------------------------------------
// CSV emission

/// Schema: t,x,y,acq_argmax,acq_value with absent acquisition fields as
/// empty cells. Numbers use the shortest round-trip decimal form.
inline void write_trace_csv(const TrialTrace& trace, std::ostream& sink) {
  sink << "t,x,y,acq_argmax,acq_value\n";
  for (const TrialStep& step : trace.steps) {
    sink << step.t << ',' << format_double(step.x) << ',' << format_double(step.y) << ',';
    if (step.acq_argmax) sink << format_double(*step.acq_argmax);
    sink << ',';
    if (step.acq_value) sink << format_double(*step.acq_value);
    sink << '\n';
  }
}

inline std::vector<TrialStep> parse_trace_csv(std::string_view text) {
  std::vector<TrialStep> steps;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "t,x,y,acq_argmax,acq_value")
        throw ParseError(1, "header", "expected 't,x,y,acq_argmax,acq_value'");
      continue;
    }
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (cells.size() != 5) throw ParseError(line_no, "row", "expected 5 cells");
    TrialStep step;
    const auto t = parse_int(cells[0]);
    const auto x = parse_double(cells[1]);
    const auto y = parse_double(cells[2]);
    if (!t || !x || !y) throw ParseError(line_no, "row", "malformed numeric cell");
    step.t = static_cast<int>(*t);
    step.x = *x;
    step.y = *y;
    if (!cells[3].empty()) {
      const auto a = parse_double(cells[3]);
      if (!a) throw ParseError(line_no, "acq_argmax", "malformed numeric cell");
      step.acq_argmax = *a;
    }
    if (!cells[4].empty()) {
      const auto v = parse_double(cells[4]);
      if (!v) throw ParseError(line_no, "acq_value", "malformed numeric cell");
      step.acq_value = *v;
    }
    steps.push_back(step);
  }
  return steps;
}

/// Band formula selector for sensitivity reporting. `standard` is the
/// predictive std used everywhere for inference. `after_observation` is
/// the diagonal-only shrinkage sqrt(v sigma^2 / (v + sigma^2)) -- the std
/// that would remain after observing one more outcome at x. It is
/// emitted only for comparison, never fed back into the trial.
enum class SigmaFormula { standard, after_observation };

inline double posterior_std_after_observation(const PosteriorModel& model, double x) {
  const double sd = posterior_std(model, x);
  const double v = sd * sd;
  const double s2 = model.noise_std * model.noise_std;
  const double denom = v + s2;
  if (denom <= 0.0) return 0.0;
  return std::sqrt(v * s2 / denom);
}

struct PosteriorCurveRow {
  double x = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  double dmu_dx = 0.0;
  double u3 = 0.0;
};

inline std::vector<PosteriorCurveRow> sample_posterior_rows(
    const PosteriorModel& model, const EvaluationGrid& grid, const UtilityWeights& weights,
    SigmaFormula formula = SigmaFormula::standard) {
  std::vector<PosteriorCurveRow> rows;
  rows.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    PosteriorCurveRow row;
    row.x = grid.point(i);
    row.mu = posterior_mean(model, row.x);
    row.sigma = formula == SigmaFormula::standard
                    ? posterior_std(model, row.x)
                    : posterior_std_after_observation(model, row.x);
    row.dmu_dx = posterior_mean_deriv(model, row.x);
    row.u3 = row.mu + weights.lambda1 * row.dmu_dx + weights.lambda2 * row.sigma;
    rows.push_back(row);
  }
  return rows;
}

/// Largest and mean absolute gap between the two band formulas over the
/// grid; quantifies how different the plots would look.
inline std::pair<double, double> sigma_band_divergence(const PosteriorModel& model,
                                                       const EvaluationGrid& grid) {
  double max_abs = 0.0;
  double sum_abs = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid.point(i);
    const double d = std::abs(posterior_std(model, x) - posterior_std_after_observation(model, x));
    max_abs = std::max(max_abs, d);
    sum_abs += d;
  }
  return {max_abs, sum_abs / static_cast<double>(grid.size())};
}

/// Schema: x,mu,sigma,dmu_dx,u3; one row per grid point.
inline void write_posterior_csv(const PosteriorModel& model, const EvaluationGrid& grid,
                                const UtilityWeights& weights, std::ostream& sink,
                                SigmaFormula formula = SigmaFormula::standard) {
  sink << "x,mu,sigma,dmu_dx,u3\n";
  for (const PosteriorCurveRow& row : sample_posterior_rows(model, grid, weights, formula)) {
    sink << format_double(row.x) << ',' << format_double(row.mu) << ','
         << format_double(row.sigma) << ',' << format_double(row.dmu_dx) << ','
         << format_double(row.u3) << '\n';
  }
}

inline std::vector<PosteriorCurveRow> parse_posterior_csv(std::string_view text) {
  std::vector<PosteriorCurveRow> rows;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "x,mu,sigma,dmu_dx,u3")
        throw ParseError(1, "header", "expected 'x,mu,sigma,dmu_dx,u3'");
      continue;
    }
    PosteriorCurveRow row;
    double* fields[5] = {&row.x, &row.mu, &row.sigma, &row.dmu_dx, &row.u3};
    std::size_t start = 0;
    for (int i = 0; i < 5; ++i) {
      const std::size_t comma = line.find(',', start);
      const bool last = (i == 4);
      if (last != (comma == std::string_view::npos))
        throw ParseError(line_no, "row", "expected 5 cells");
      const auto v = parse_double(
          line.substr(start, comma == std::string_view::npos ? comma : comma - start));
      if (!v) throw ParseError(line_no, "row", "malformed numeric cell");
      *fields[i] = *v;
      start = comma + 1;
    }
    rows.push_back(row);
  }
  return rows;
}

/// Per-seed rows then a '#'-prefixed aggregate block of win rates.
inline void write_comparison_csv(const ComparisonReport& report, std::ostream& sink) {
  sink << "seed,design,checkpoint,rmse,mean_sigma,est_opt,opt_err\n";
  for (const ComparisonRow& row : report.rows) {
    sink << row.seed_index << ',' << to_string(row.design) << ',' << row.checkpoint << ','
         << format_double(row.metrics.rmse_opt_region) << ','
         << format_double(row.metrics.mean_sigma_opt_region) << ','
         << format_double(row.metrics.est_optimum) << ','
         << format_double(row.metrics.opt_error) << '\n';
  }
  sink << "# aggregate seeds=" << report.n_seeds << '\n';
  for (const WinRate& wr : report.aggregates) {
    sink << "# win_rate checkpoint=" << wr.checkpoint << " metric=" << wr.metric
         << " adaptive=" << format_double(wr.adaptive_rate) << '\n';
  }
}

// ---------------------------------------------------------------------------
// SVG emission

namespace svg {

inline constexpr double kWidth = 800.0;
inline constexpr double kHeight = 500.0;
inline constexpr double kMarginLeft = 60.0;
inline constexpr double kMarginRight = 20.0;
inline constexpr double kMarginTop = 20.0;
inline constexpr double kMarginBottom = 40.0;
inline constexpr double kPlotWidth = kWidth - kMarginLeft - kMarginRight;    // 720
inline constexpr double kPlotHeight = kHeight - kMarginTop - kMarginBottom;  // 440

/// Linear data-to-pixel maps; the inverse of x_to_px is what a reader of
/// the file needs to recover dose values.
inline double x_to_px(double x, double lo, double hi) {
  return kMarginLeft + (x - lo) / (hi - lo) * kPlotWidth;
}

inline double y_to_px(double y, double y_min, double y_max) {
  return kMarginTop + kPlotHeight - (y - y_min) / (y_max - y_min) * kPlotHeight;
}

}  // namespace svg

/// Panel with the true curve (dashed), posterior mean, credible band,
/// sampled points, the utility curve rescaled into the panel, and one
/// yellow vertical line at the true optimum. Fully deterministic output.
inline void render_svg_rows(const std::vector<PosteriorCurveRow>& rows,
                            const std::vector<TrialStep>& steps, const GroundTruth& truth,
                            const UtilityWeights& weights, const EvaluationGrid& grid,
                            double band_multiplier, std::ostream& sink) {
  const double lo = grid.lo;
  const double hi = grid.hi;

  double y_min = 0.0;
  double y_max = 0.0;
  bool first = true;
  auto widen = [&](double v) {
    if (first) {
      y_min = y_max = v;
      first = false;
    } else {
      y_min = std::min(y_min, v);
      y_max = std::max(y_max, v);
    }
  };
  for (const PosteriorCurveRow& row : rows) {
    widen(row.mu - band_multiplier * row.sigma);
    widen(row.mu + band_multiplier * row.sigma);
    widen(true_performance(truth, row.x));
  }
  for (const TrialStep& step : steps) widen(step.y);
  if (first) {
    y_min = 0.0;
    y_max = 1.0;
  }
  if (y_max - y_min < 1e-12) y_max = y_min + 1.0;
  const double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;

  auto px = [&](double x) { return format_px(svg::x_to_px(x, lo, hi)); };
  auto py = [&](double y) { return format_px(svg::y_to_px(y, y_min, y_max)); };
  auto polyline = [&](auto&& value_at, const char* style) {
    sink << "  <polyline fill=\"none\" " << style << " points=\"";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i) sink << ' ';
      sink << px(rows[i].x) << ',' << py(value_at(rows[i]));
    }
    sink << "\"/>\n";
  };

  sink << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" "
          "viewBox=\"0 0 800 500\">\n";
  sink << "  <rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";
  sink << "  <rect x=\"" << format_px(svg::kMarginLeft) << "\" y=\"" << format_px(svg::kMarginTop)
       << "\" width=\"" << format_px(svg::kPlotWidth) << "\" height=\""
       << format_px(svg::kPlotHeight) << "\" fill=\"none\" stroke=\"#333333\"/>\n";

  // Credible band: mu + m*sigma forward, mu - m*sigma back.
  if (!rows.empty()) {
    sink << "  <path fill=\"#9ecae1\" fill-opacity=\"0.45\" stroke=\"none\" d=\"M";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i) sink << " L";
      sink << px(rows[i].x) << ' ' << py(rows[i].mu + band_multiplier * rows[i].sigma);
    }
    for (std::size_t i = rows.size(); i-- > 0;) {
      sink << " L" << px(rows[i].x) << ' ' << py(rows[i].mu - band_multiplier * rows[i].sigma);
    }
    sink << " Z\"/>\n";
  }

  polyline([&](const PosteriorCurveRow& r) { return true_performance(truth, r.x); },
           "stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"");
  polyline([](const PosteriorCurveRow& r) { return r.mu; },
           "stroke=\"#1f77b4\" stroke-width=\"2\"");

  // Utility curve rescaled into the panel so its shape is visible next to
  // the response curves.
  if (!rows.empty()) {
    double u_min = rows[0].u3;
    double u_max = rows[0].u3;
    for (const PosteriorCurveRow& row : rows) {
      u_min = std::min(u_min, row.u3);
      u_max = std::max(u_max, row.u3);
    }
    const double span = u_max - u_min;
    auto rescaled = [&](const PosteriorCurveRow& r) {
      if (span < 1e-12) return (y_min + y_max) / 2.0;
      return y_min + (r.u3 - u_min) / span * (y_max - y_min);
    };
    polyline(rescaled, "stroke=\"#000000\" stroke-width=\"1\"");
  }

  // The single yellow vertical marker at the true optimum.
  const double x_opt = true_optimum(truth, weights.lambda1, grid);
  sink << "  <line x1=\"" << px(x_opt) << "\" y1=\"" << format_px(svg::kMarginTop) << "\" x2=\""
       << px(x_opt) << "\" y2=\"" << format_px(svg::kMarginTop + svg::kPlotHeight)
       << "\" stroke=\"#FFD700\" stroke-width=\"2.5\"/>\n";

  for (const TrialStep& step : steps) {
    sink << "  <circle cx=\"" << px(step.x) << "\" cy=\"" << py(step.y)
         << "\" r=\"3\" fill=\"#222222\"/>\n";
  }

  // Axis ticks: seven evenly spaced per axis.
  for (int k = 0; k <= 6; ++k) {
    const double x = lo + (hi - lo) * k / 6.0;
    const double tick_px = svg::x_to_px(x, lo, hi);
    sink << "  <line x1=\"" << format_px(tick_px) << "\" y1=\""
         << format_px(svg::kMarginTop + svg::kPlotHeight) << "\" x2=\"" << format_px(tick_px)
         << "\" y2=\"" << format_px(svg::kMarginTop + svg::kPlotHeight + 5) << "\" "
         << "stroke=\"#333333\"/>\n";
    sink << "  <text x=\"" << format_px(tick_px) << "\" y=\""
         << format_px(svg::kMarginTop + svg::kPlotHeight + 20)
         << "\" font-size=\"12\" text-anchor=\"middle\" fill=\"#333333\">" << format_px(x)
         << "</text>\n";
    const double y = y_min + (y_max - y_min) * k / 6.0;
    const double tick_py = svg::y_to_px(y, y_min, y_max);
    sink << "  <line x1=\"" << format_px(svg::kMarginLeft - 5) << "\" y1=\"" << format_px(tick_py)
         << "\" x2=\"" << format_px(svg::kMarginLeft) << "\" y2=\"" << format_px(tick_py) << "\" "
         << "stroke=\"#333333\"/>\n";
    sink << "  <text x=\"" << format_px(svg::kMarginLeft - 8) << "\" y=\""
         << format_px(tick_py + 4) << "\" font-size=\"12\" text-anchor=\"end\" "
         << "fill=\"#333333\">" << format_px(y) << "</text>\n";
  }
  sink << "</svg>\n";
}

inline void render_svg(const PosteriorModel& model, const TrialTrace& trace,
                       const GroundTruth& truth, const UtilityWeights& weights,
                       const EvaluationGrid& grid,
                       double band_multiplier, std::ostream& sink) {
  render_svg_rows(sample_posterior_rows(model, grid, weights), trace.steps, truth, weights, grid,
                  band_multiplier, sink);
}

}  // namespace adaptrial
