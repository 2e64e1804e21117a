#pragma once

#include <charconv>
#include <climits>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "adaptrial/errors.hpp"
#include "adaptrial/format.hpp"
#include "adaptrial/trial.hpp"

namespace adaptrial {

/// Two-column CSV of x,y pairs; an optional "x,y" header line is skipped.
inline ObservationSet parse_observations_csv(std::string_view text) {
  ObservationSet out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string_view::npos)
      throw ParseError(line_no, "observations", "expected two comma-separated columns");
    const auto x = parse_double(trim(line.substr(0, comma)));
    const auto y = parse_double(trim(line.substr(comma + 1)));
    if (!x || !y) {
      if (line_no == 1) continue;  // header row
      throw ParseError(line_no, "observations", "values must be decimal numbers");
    }
    out.push_back({*x, *y});
  }
  return out;
}

inline ObservationSet load_observations_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("warm_start", "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_observations_csv(buf.str());
}

namespace detail {

struct KeyValue {
  std::string value;
  int line = 0;
};

/// Flat `key = value` lines with `#` comments. Keeps line numbers for
/// error reporting and rejects duplicate keys.
inline std::map<std::string, KeyValue> parse_key_values(std::string_view text) {
  std::map<std::string, KeyValue> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(line_no, std::string(line), "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ParseError(line_no, key, "empty key");
    if (!out.emplace(key, KeyValue{value, line_no}).second)
      throw ParseError(line_no, key, "duplicate key");
  }
  return out;
}

class KeyValueReader {
 public:
  explicit KeyValueReader(std::string_view text) : kv_(parse_key_values(text)) {}

  double require_double(const std::string& key) {
    const KeyValue& entry = require(key);
    const auto v = parse_double(entry.value);
    if (!v) throw ParseError(entry.line, key, "value must be a decimal number");
    return *v;
  }

  double double_or(const std::string& key, double fallback) {
    const KeyValue* entry = take(key);
    if (!entry) return fallback;
    const auto v = parse_double(entry->value);
    if (!v) throw ParseError(entry->line, key, "value must be a decimal number");
    return *v;
  }

  int require_int(const std::string& key) {
    const KeyValue& entry = require(key);
    const auto v = parse_int(entry.value);
    if (!v || *v < INT_MIN || *v > INT_MAX)
      throw ParseError(entry.line, key, "value must be an integer");
    return static_cast<int>(*v);
  }

  std::uint64_t require_uint64(const std::string& key) {
    const KeyValue& entry = require(key);
    std::uint64_t v = 0;
    const char* first = entry.value.data();
    const char* last = first + entry.value.size();
    auto res = std::from_chars(first, last, v);
    if (entry.value.empty() || res.ec != std::errc() || res.ptr != last)
      throw ParseError(entry.line, key, "value must be an unsigned integer");
    return v;
  }

  std::optional<std::string> optional_string(const std::string& key, int* line_out = nullptr) {
    const KeyValue* entry = take(key);
    if (!entry) return std::nullopt;
    if (line_out) *line_out = entry->line;
    return entry->value;
  }

  /// Everything not consumed is an unknown key, except keys passing `keep`.
  template <class Keep>
  void reject_unknown(Keep&& keep) const {
    for (const auto& [key, entry] : kv_)
      if (!consumed_.contains(key) && !keep(key))
        throw ParseError(entry.line, key, "unknown key");
  }

  const std::map<std::string, KeyValue>& entries() const { return kv_; }

 private:
  const KeyValue& require(const std::string& key) {
    const KeyValue* entry = take(key);
    if (!entry) throw ValidationError(key, "required key missing");
    return *entry;
  }

  const KeyValue* take(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return nullptr;
    consumed_.insert(key);
    return &it->second;
  }

  std::map<std::string, KeyValue> kv_;
  std::set<std::string> consumed_;
};

inline ScenarioConfig read_scenario(KeyValueReader& reader, const std::filesystem::path& base_dir) {
  ScenarioConfig config;
  config.truth.midpoint = reader.require_double("truth.m");
  config.truth.intercept = reader.require_double("truth.b");
  config.truth.noise_std = reader.require_double("truth.noise_std");
  config.kernel.length_scale = reader.require_double("kernel.length_scale");
  config.kernel.signal_amplitude = reader.double_or("kernel.signal_amplitude", 1.0);
  config.weights.lambda1 = reader.require_double("weights.lambda1");
  config.weights.lambda2 = reader.require_double("weights.lambda2");
  config.domain_lo = reader.require_double("domain.lo");
  config.domain_hi = reader.require_double("domain.hi");
  config.budget = reader.require_int("budget");
  config.grid_step = reader.double_or("grid.step", 0.01);
  config.seed = reader.require_uint64("seed");
  int warm_line = 0;
  if (auto path = reader.optional_string("warm_start", &warm_line)) {
    config.warm_start_path = *path;
    std::filesystem::path p(*path);
    if (p.is_relative()) p = base_dir / p;
    try {
      config.warm_start = load_observations_csv(p);
    } catch (const ValidationError& e) {
      throw ParseError(warm_line, "warm_start", e.what());
    }
  }
  return config;
}

}  // namespace detail

/// Parses and fully validates a scenario config. A relative warm_start
/// path is resolved against base_dir.
inline ScenarioConfig parse_config(std::string_view text,
                                   const std::filesystem::path& base_dir = ".") {
  detail::KeyValueReader reader(text);
  ScenarioConfig config = detail::read_scenario(reader, base_dir);
  reader.reject_unknown([](const std::string&) { return false; });
  validate(config);
  return config;
}

/// Canonical text form; parse_config(serialize_config(c)) == c as long as
/// any warm-start file is still in place.
inline std::string serialize_config(const ScenarioConfig& config) {
  std::string out;
  auto put = [&](const char* key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  put("truth.m", format_double(config.truth.midpoint));
  put("truth.b", format_double(config.truth.intercept));
  put("truth.noise_std", format_double(config.truth.noise_std));
  put("kernel.length_scale", format_double(config.kernel.length_scale));
  put("kernel.signal_amplitude", format_double(config.kernel.signal_amplitude));
  put("weights.lambda1", format_double(config.weights.lambda1));
  put("weights.lambda2", format_double(config.weights.lambda2));
  put("domain.lo", format_double(config.domain_lo));
  put("domain.hi", format_double(config.domain_hi));
  put("budget", std::to_string(config.budget));
  put("grid.step", format_double(config.grid_step));
  put("seed", std::to_string(config.seed));
  if (config.warm_start_path) put("warm_start", *config.warm_start_path);
  return out;
}

/// Snapshot of a suspended live trial: the config keys plus an
/// observations block (`obs.count`, `obs.<i> = x,y`) and the pending dose.
inline std::string serialize_live_state(const LiveState& state) {
  std::string out = serialize_config(state.config);
  if (state.pending_x) out += "pending_x = " + format_double(*state.pending_x) + "\n";
  out += "obs.count = " + std::to_string(state.observations.size()) + "\n";
  for (std::size_t i = 0; i < state.observations.size(); ++i) {
    out += "obs." + std::to_string(i + 1) + " = " + format_double(state.observations[i].x) +
           "," + format_double(state.observations[i].y) + "\n";
  }
  return out;
}

/// Restores a suspended live trial. The pending acquisition record is
/// recomputed from the observations, which is exact because refitting is
/// a pure function of the data.
inline LiveState parse_live_state(std::string_view text,
                                  const std::filesystem::path& base_dir = ".") {
  detail::KeyValueReader reader(text);
  LiveState state;
  state.config = detail::read_scenario(reader, base_dir);
  validate(state.config);

  std::optional<double> pending;
  if (auto raw = reader.optional_string("pending_x")) {
    pending = parse_double(*raw);
    if (!pending) throw ValidationError("pending_x", "value must be a decimal number");
  }

  const int count = reader.require_int("obs.count");
  if (count < 0) throw ValidationError("obs.count", "must be non-negative");
  for (int i = 1; i <= count; ++i) {
    const std::string key = "obs." + std::to_string(i);
    auto raw = reader.optional_string(key);
    if (!raw) throw ValidationError(key, "required key missing");
    const std::size_t comma = raw->find(',');
    if (comma == std::string::npos) throw ValidationError(key, "expected 'x,y'");
    const auto x = parse_double(trim(std::string_view(*raw).substr(0, comma)));
    const auto y = parse_double(trim(std::string_view(*raw).substr(comma + 1)));
    if (!x || !y) throw ValidationError(key, "values must be decimal numbers");
    if (!(*x >= state.config.domain_lo && *x <= state.config.domain_hi))
      throw ValidationError(key, "dose outside the configured domain");
    if (!std::isfinite(*y)) throw ValidationError(key, "non-finite outcome");
    state.observations.push_back({*x, *y});
  }
  reader.reject_unknown([](const std::string&) { return false; });

  if (state.observations.size() < state.config.warm_start.size())
    throw ValidationError("obs.count", "fewer observations than the warm-start set");

  if (pending) {
    if (!(*pending >= state.config.domain_lo && *pending <= state.config.domain_hi))
      throw ValidationError("pending_x", "dose outside the configured domain");
    state.pending_x = pending;
    if (!state.observations.empty()) {
      const PosteriorModel model = detail::refit(state.config, state.observations);
      state.pending_acq =
          ArgmaxResult{*pending, utility_u3(model, *pending, state.config.weights)};
    }
  }
  return state;
}

}  // namespace adaptrial
