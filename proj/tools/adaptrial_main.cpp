// Command-line front end: run one trial, compare designs over many
// replications, re-render a plot from stored CSVs, or drive a live trial
// interactively.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adaptrial/config.hpp"
#include "adaptrial/harness.hpp"
#include "adaptrial/io.hpp"
#include "adaptrial/rng.hpp"
#include "adaptrial/trial.hpp"

namespace fs = std::filesystem;
using namespace adaptrial;

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
};

ScenarioConfig load_config(const CommonOpts& opts) {
  const fs::path path(opts.config_path);
  ScenarioConfig config = parse_config(read_file(path), path.parent_path());
  if (opts.seed_override) config.seed = *opts.seed_override;
  return config;
}

ObservationSet trace_observations(const std::vector<TrialStep>& steps) {
  ObservationSet obs;
  obs.reserve(steps.size());
  for (const TrialStep& step : steps) obs.push_back({step.x, step.y});
  return obs;
}

std::vector<int> parse_checkpoints(const std::string& raw, int budget) {
  std::vector<int> out;
  std::stringstream ss(raw);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto v = parse_int(trim(cell));
    if (!v) throw ValidationError("checkpoints", "'" + cell + "' is not an integer");
    out.push_back(static_cast<int>(*v));
  }
  if (out.empty()) throw ValidationError("checkpoints", "must not be empty");
  for (int t : out)
    if (t < 1 || t > budget)
      throw ValidationError("checkpoints", "each checkpoint must lie in 1..budget");
  return out;
}

int cmd_run(const CommonOpts& common, const std::string& design, const std::string& out_dir,
            bool svg, double band_multiplier) {
  const ScenarioConfig config = load_config(common);
  RandomStream rng(config.seed);
  const TrialTrace trace = design == "adaptive" ? run_adaptive(config, rng)
                                                : run_fixed(config, rng);

  std::cout << "design=" << design << " seed=" << config.seed << " budget=" << config.budget
            << "\n";
  for (const TrialStep& step : trace.steps) {
    std::cout << "t=" << step.t << " x=" << format_double(step.x)
              << " y=" << format_double(step.y);
    if (step.acq_argmax)
      std::cout << " acq_argmax=" << format_double(*step.acq_argmax)
                << " acq_value=" << format_double(*step.acq_value);
    std::cout << "\n";
  }

  const PosteriorModel model =
      fit_posterior(trace_observations(trace.steps), config.kernel, config.truth.noise_std);
  const EvaluationGrid grid = config.grid();
  const double est =
      argmax_on_grid([&](double x) { return utility_u12(model, x, config.weights.lambda1); },
                     grid)
          .x;
  std::cout << "est_optimum=" << format_double(est)
            << " true_optimum=" << format_double(true_optimum(config.truth,
                                                              config.weights.lambda1, grid))
            << "\n";

  fs::create_directories(out_dir);
  {
    std::ostringstream buf;
    write_trace_csv(trace, buf);
    write_file_atomic(fs::path(out_dir) / "trace.csv", buf.str());
    std::cout << "wrote " << (fs::path(out_dir) / "trace.csv").string() << "\n";
  }
  {
    std::ostringstream buf;
    write_posterior_csv(model, grid, config.weights, buf);
    write_file_atomic(fs::path(out_dir) / "posterior.csv", buf.str());
    std::cout << "wrote " << (fs::path(out_dir) / "posterior.csv").string() << "\n";
  }
  if (svg) {
    std::ostringstream buf;
    render_svg(model, trace, config.truth, config.weights, grid, band_multiplier, buf);
    write_file_atomic(fs::path(out_dir) / "plot.svg", buf.str());
    std::cout << "wrote " << (fs::path(out_dir) / "plot.svg").string() << "\n";
  }
  return 0;
}

int cmd_compare(const CommonOpts& common, int seeds, const std::string& checkpoints_raw,
                const std::string& out_path, unsigned workers) {
  const ScenarioConfig config = load_config(common);
  std::vector<int> checkpoints;
  if (checkpoints_raw.empty()) {
    checkpoints = {std::max(1, config.budget / 2), config.budget};
  } else {
    checkpoints = parse_checkpoints(checkpoints_raw, config.budget);
  }

  const ComparisonReport report = compare(config, seeds, checkpoints, workers);
  for (const WinRate& wr : report.aggregates) {
    std::cout << "win_rate checkpoint=" << wr.checkpoint << " metric=" << wr.metric
              << " adaptive=" << format_double(wr.adaptive_rate) << "\n";
  }

  std::ostringstream buf;
  write_comparison_csv(report, buf);
  fs::create_directories(fs::path(out_path).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(out_path).parent_path());
  write_file_atomic(out_path, buf.str());
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_plot(const CommonOpts& common, const std::string& out_dir,
             const std::string& out_override, double band_multiplier) {
  const ScenarioConfig config = load_config(common);
  const fs::path dir(out_dir);
  const std::vector<TrialStep> steps = parse_trace_csv(read_file(dir / "trace.csv"));
  const std::vector<PosteriorCurveRow> rows = parse_posterior_csv(read_file(dir / "posterior.csv"));

  std::ostringstream buf;
  render_svg_rows(rows, steps, config.truth, config.weights, config.grid(), band_multiplier,
                  buf);
  const fs::path out = out_override.empty() ? dir / "plot.svg" : fs::path(out_override);
  write_file_atomic(out, buf.str());
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

int cmd_live(const CommonOpts& common, const std::string& state_path) {
  LiveState state;
  std::optional<double> recommendation;

  if (!state_path.empty() && fs::exists(state_path)) {
    state = parse_live_state(read_file(state_path), fs::path(state_path).parent_path());
    recommendation = state.pending_x;
    std::cout << "resumed after " << state.steps_taken() << " of " << state.config.budget
              << " steps\n";
    if (!recommendation) {
      std::cout << "trial complete\n";
      return 0;
    }
  } else {
    const ScenarioConfig config = load_config(common);
    RandomStream rng(config.seed);
    auto [fresh, dose] = live_begin(config, rng);
    state = std::move(fresh);
    recommendation = dose;
  }

  auto save = [&]() {
    if (!state_path.empty()) write_file_atomic(state_path, serialize_live_state(state));
  };
  save();

  std::string line;
  while (recommendation) {
    const int t = state.steps_taken() + 1;
    std::cout << "t=" << t << " recommend x=" << format_double(*recommendation) << "\n"
              << std::flush;
    if (!std::getline(std::cin, line)) {
      if (!state_path.empty()) {
        std::cout << "input closed; trial suspended (resume with the same --out file)\n";
        return 0;
      }
      std::cerr << "error: input closed before the budget was reached\n";
      return 2;
    }
    const auto y = parse_double(trim(line));
    if (!y || !std::isfinite(*y)) {
      std::cerr << "invalid outcome '" << line << "'; enter a finite decimal\n";
      continue;
    }
    auto [next_state, next_dose] = live_step(state, *y);
    state = std::move(next_state);
    recommendation = next_dose;
    std::cout << "recorded y=" << format_double(*y) << "\n";
    save();
  }
  std::cout << "trial complete\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive dose-finding trials with a Gaussian-process surrogate"};
  app.require_subcommand(1);

  CommonOpts common;
  std::string design = "adaptive";
  std::string out_dir = "out";
  std::string out_path;
  std::string checkpoints;
  bool svg = false;
  double band_multiplier = kDefaultBandMultiplier;
  int seeds = 100;
  unsigned workers = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "scenario config file")->required();
    sub->add_option("--seed", common.seed_override, "override the config seed");
  };

  CLI::App* run = app.add_subcommand("run", "run one trial and write trace/posterior CSVs");
  add_common(run);
  run->add_option("--design", design, "trial design")
      ->check(CLI::IsMember({"adaptive", "fixed"}));
  run->add_option("--out-dir", out_dir, "output directory")->required();
  run->add_flag("--svg", svg, "also render plot.svg");
  run->add_option("--band-multiplier", band_multiplier, "credible band width in std units");

  CLI::App* cmp = app.add_subcommand("compare", "replicate both designs and write a report CSV");
  add_common(cmp);
  cmp->add_option("--seeds", seeds, "number of replications")->check(CLI::PositiveNumber);
  cmp->add_option("--checkpoints", checkpoints, "comma-separated step counts (default n/2,n)");
  cmp->add_option("--out", out_path, "report CSV path")->required();
  cmp->add_option("--workers", workers, "worker threads (0 = auto)");

  CLI::App* plot = app.add_subcommand("plot", "re-render plot.svg from stored CSVs");
  add_common(plot);
  plot->add_option("--out-dir", out_dir, "directory holding trace.csv and posterior.csv")
      ->required();
  plot->add_option("--out", out_path, "SVG path (default <out-dir>/plot.svg)");
  plot->add_option("--band-multiplier", band_multiplier, "credible band width in std units");

  CLI::App* live = app.add_subcommand("live", "interactive trial on stdin/stdout");
  add_common(live);
  live->add_option("--out", out_path, "snapshot file; resumed when it already exists");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (run->parsed()) return cmd_run(common, design, out_dir, svg, band_multiplier);
    if (cmp->parsed()) return cmd_compare(common, seeds, checkpoints, out_path, workers);
    if (plot->parsed()) return cmd_plot(common, out_dir, out_path, band_multiplier);
    if (live->parsed()) return cmd_live(common, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
