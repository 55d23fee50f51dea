#pragma once

// INI experiment configuration. Every key is optional and falls back to the
// library defaults; unknown sections or keys are rejected.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ipp/binary_io.hpp"
#include "ipp/env_gen.hpp"
#include "ipp/episode.hpp"
#include "ipp/grid_io.hpp"
#include "ipp/planners.hpp"
#include "ipp/primitives.hpp"
#include "ipp/train.hpp"

namespace ipp {

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct KlSweepConfig {
  std::vector<double> bucket_edges{0.0, 0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.035, 0.04};
  int per_bucket = 5;
  long max_attempts = 2000;
  double shift_max = 4.0;   // m, at full magnitude
  double mix_max = 0.3;
  double sigma_max = 0.05;
  double magnitude_power = 2.0;  // magnitude = u^power, u uniform in [0,1]
  std::vector<std::string> planners{"greedy", "dp"};
};

struct ExperimentConfig {
  GridDims dims{32, 32, 1.0};
  SensorModel sensor;
  GraphConfig graph;
  std::string graph_file;  // load instead of building when set
  double budget_edges = 60.0;  // budget = budget_edges * mean edge cost
  RewardWeights weights;
  double target_bonus_total = 100.0;
  double found_threshold = kDefaultFoundThreshold;
  int obs_window = 11;
  std::vector<int> obs_scales{1, 2, 4};
  int sense_points = 3;
  ScenarioConfig scenario;
  std::vector<std::string> planners{"greedy", "dp", "cmaes", "coverage", "pcoverage"};
  PlannerOptions planner;
  std::string checkpoint;
  TrainConfig learning;
  int scenarios = 20;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  bool write_logs = true;
  KlSweepConfig kl;

  // canonical "section.key=value" lines of every resolved setting
  std::string canonical;

  std::uint64_t hash() const { return io::fnv1a64(canonical); }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + text + "'");
}

/// Reads keys section by section, records which were consumed and builds the
/// canonical dump.
class IniReader {
public:
  explicit IniReader(const boost::property_tree::ptree& tree) : tree_(tree) {
    for (const auto& [section, child] : tree_) {
      if (child.empty() && !child.data().empty()) throw ConfigError("config key '" + section + "' is outside any section");
      for (const auto& [key, value] : child) {
        if (!value.empty()) throw ConfigError("config key '" + section + "." + key + "' is nested");
        present_.insert(section + "." + key);
      }
    }
  }

  template <class T>
  void number(const std::string& section, const std::string& key, T& v) {
    if (auto s = raw(section, key)) v = parse_number<T>(section + "." + key, *s);
    record(section, key, to_text(v));
  }
  void boolean(const std::string& section, const std::string& key, bool& v) {
    if (auto s = raw(section, key)) v = parse_bool(section + "." + key, *s);
    record(section, key, v ? "true" : "false");
  }
  void text(const std::string& section, const std::string& key, std::string& v) {
    if (auto s = raw(section, key)) v = trim(*s);
    record(section, key, v);
  }
  template <class T>
  void list(const std::string& section, const std::string& key, std::vector<T>& v) {
    if (auto s = raw(section, key)) {
      v.clear();
      for (const auto& item : split_list(*s)) {
        if constexpr (std::is_same_v<T, std::string>) {
          v.push_back(item);
        } else {
          v.push_back(parse_number<T>(section + "." + key, item));
        }
      }
    }
    std::string joined;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) joined += ',';
      if constexpr (std::is_same_v<T, std::string>) {
        joined += v[i];
      } else {
        joined += to_text(v[i]);
      }
    }
    record(section, key, joined);
  }

  void finish() const {
    for (const auto& k : present_) {
      if (!consumed_.count(k)) throw ConfigError("unknown config key '" + k + "'");
    }
  }
  const std::string& canonical() const { return canonical_; }

private:
  template <class T>
  static std::string to_text(T v) {
    if constexpr (std::is_floating_point_v<T>) {
      return format_double(v);
    } else {
      return std::to_string(v);
    }
  }
  std::optional<std::string> raw(const std::string& section, const std::string& key) {
    consumed_.insert(section + "." + key);
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto val = sec->get_child_optional(boost::property_tree::ptree::path_type(key, '\0'));
    if (!val) return std::nullopt;
    return val->data();
  }
  void record(const std::string& section, const std::string& key, const std::string& value) {
    canonical_ += section + "." + key + "=" + value + "\n";
  }

  const boost::property_tree::ptree& tree_;
  std::set<std::string> present_;
  std::set<std::string> consumed_;
  std::string canonical_;
};

inline bool planner_registered(const std::string& name) {
  const auto& b = baseline_planner_names();
  return name == "rl" || std::find(b.begin(), b.end(), name) != b.end();
}

inline void require_planners(const std::vector<std::string>& names, const char* key) {
  if (names.empty()) throw ConfigError(std::string(key) + " must name at least one planner");
  for (const auto& n : names) {
    if (!planner_registered(n)) throw ConfigError("unknown planner '" + n + "' in " + key);
  }
}

}  // namespace detail

/// Resolves the configuration and runs every cross-field check. Library
/// validation errors are rethrown as ConfigError.
inline void validate(const ExperimentConfig& c) {
  try {
    c.dims.validate();
    c.sensor.validate();
    if (c.budget_edges <= 0.0) throw ConfigError("episode.budget_edges must be positive");
    if (c.scenarios < 1) throw ConfigError("experiment.scenarios must be >= 1");
    detail::require_planners(c.planners, "planner.names");
    detail::require_planners(c.kl.planners, "kl_sweep.planners");
    if (c.scenario.components.lo < 1 || c.scenario.components.hi < c.scenario.components.lo) {
      throw ConfigError("scenario component range is invalid");
    }
    if (c.scenario.targets.lo < 1 || c.scenario.targets.hi < c.scenario.targets.lo) {
      throw ConfigError("scenario target range is invalid");
    }
    if (!(c.scenario.variance.lo > 0.0) || c.scenario.variance.hi < c.scenario.variance.lo) {
      throw ConfigError("scenario variance range is invalid");
    }
    const auto& e = c.kl.bucket_edges;
    if (e.size() < 2) throw ConfigError("kl_sweep.bucket_edges needs at least two edges");
    for (std::size_t i = 1; i < e.size(); ++i) {
      if (!(e[i] > e[i - 1])) throw ConfigError("kl_sweep.bucket_edges must be strictly ascending");
    }
    if (c.kl.per_bucket < 1 || c.kl.max_attempts < 1) throw ConfigError("kl_sweep counts must be >= 1");
    if (c.kl.magnitude_power <= 0.0) throw ConfigError("kl_sweep.magnitude_power must be positive");
    if (c.planner.dp_horizon < 1 || c.planner.cmaes_horizon < 1) throw ConfigError("planner horizons must be >= 1");
    c.learning.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
}

inline ExperimentConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  ExperimentConfig c;
  detail::IniReader r(tree);

  r.number("grid", "width", c.dims.width);
  r.number("grid", "height", c.dims.height);
  r.number("grid", "cell_size", c.dims.cell_size);

  r.number("sensor", "altitude", c.sensor.altitude);
  r.number("sensor", "fov_half_angle", c.sensor.fov_half_angle);
  r.number("sensor", "accuracy_at_zero", c.sensor.accuracy_at_zero);
  r.number("sensor", "accuracy_slope", c.sensor.accuracy_slope);
  r.number("sensor", "accuracy_floor", c.sensor.accuracy_floor);

  r.number("graph", "candidates_per_axis", c.graph.candidates_per_axis);
  r.number("graph", "node_count", c.graph.node_count);
  r.number("graph", "samples_per_axis", c.graph.samples_per_axis);
  r.number("graph", "v_max", c.graph.v_max);
  r.number("graph", "stride", c.graph.stride);
  r.list("graph", "durations", c.graph.durations);
  r.number("graph", "rho", c.graph.rho);
  r.text("graph", "file", c.graph_file);
  c.graph.cell_size = c.dims.cell_size;

  r.number("episode", "budget_edges", c.budget_edges);
  r.number("episode", "w_entropy", c.weights.entropy);
  r.number("episode", "w_coverage", c.weights.coverage);
  r.number("episode", "w_target", c.weights.target);
  r.number("episode", "w_cost", c.weights.cost);
  r.number("episode", "target_bonus", c.target_bonus_total);
  r.number("episode", "found_threshold", c.found_threshold);
  r.number("episode", "obs_window", c.obs_window);
  r.list("episode", "obs_scales", c.obs_scales);
  r.number("episode", "sense_points", c.sense_points);

  c.scenario.dims = c.dims;
  r.number("scenario", "components_min", c.scenario.components.lo);
  r.number("scenario", "components_max", c.scenario.components.hi);
  r.number("scenario", "variance_min", c.scenario.variance.lo);
  r.number("scenario", "variance_max", c.scenario.variance.hi);
  r.number("scenario", "targets_min", c.scenario.targets.lo);
  r.number("scenario", "targets_max", c.scenario.targets.hi);
  r.number("scenario", "prob_min", c.scenario.range.lo);
  r.number("scenario", "prob_max", c.scenario.range.hi);
  r.number("scenario", "shift_delta", c.scenario.shift_delta);
  r.number("scenario", "mix_weight", c.scenario.mix_weight);
  r.number("scenario", "noise_components_min", c.scenario.noise_components.lo);
  r.number("scenario", "noise_components_max", c.scenario.noise_components.hi);
  r.number("scenario", "cell_sigma", c.scenario.cell_sigma);

  r.list("planner", "names", c.planners);
  r.number("planner", "f1", c.planner.f1);
  r.number("planner", "f2", c.planner.f2);
  r.number("planner", "dp_horizon", c.planner.dp_horizon);
  r.number("planner", "cmaes_horizon", c.planner.cmaes_horizon);
  r.number("planner", "cmaes_max_evals", c.planner.cmaes_max_evals);
  r.number("planner", "cmaes_population", c.planner.cmaes_population);
  r.number("planner", "cmaes_sigma", c.planner.cmaes_sigma);
  r.text("planner", "checkpoint", c.checkpoint);

  auto& L = c.learning;
  r.number("learning", "gamma", L.gamma);
  r.number("learning", "lambda_ret", L.lambda_ret);
  r.number("learning", "lambda_gae", L.lambda_gae);
  r.number("learning", "alpha1", L.loss.alpha1);
  r.number("learning", "alpha2", L.loss.alpha2);
  r.number("learning", "beta1", L.loss.beta1);
  r.number("learning", "beta2", L.loss.beta2);
  r.number("learning", "critic_weight", L.loss.critic_weight);
  r.boolean("learning", "normalize_advantages", L.loss.normalize_advantages);
  r.number("learning", "learning_rate", L.learning_rate);
  r.number("learning", "rollout_length", L.rollout_length);
  r.number("learning", "workers", L.workers);
  r.number("learning", "total_steps", L.total_steps);
  r.number("learning", "hidden", L.hidden);
  r.number("learning", "grad_clip", L.grad_clip);
  std::string opt = L.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
  r.text("learning", "optimizer", opt);
  if (opt == "adam") {
    L.optimizer = OptimizerKind::Adam;
  } else if (opt == "sgd") {
    L.optimizer = OptimizerKind::Sgd;
  } else {
    throw ConfigError("learning.optimizer must be 'adam' or 'sgd'");
  }
  r.number("learning", "reward_scale", L.reward_scale);
  r.number("learning", "threads", L.threads);

  r.number("experiment", "scenarios", c.scenarios);
  r.number("experiment", "seed", c.seed);
  r.text("experiment", "output_dir", c.output_dir);
  r.boolean("experiment", "write_logs", c.write_logs);

  r.list("kl_sweep", "bucket_edges", c.kl.bucket_edges);
  r.number("kl_sweep", "per_bucket", c.kl.per_bucket);
  r.number("kl_sweep", "max_attempts", c.kl.max_attempts);
  r.number("kl_sweep", "shift_max", c.kl.shift_max);
  r.number("kl_sweep", "mix_max", c.kl.mix_max);
  r.number("kl_sweep", "sigma_max", c.kl.sigma_max);
  r.number("kl_sweep", "magnitude_power", c.kl.magnitude_power);
  r.list("kl_sweep", "planners", c.kl.planners);

  r.finish();
  c.canonical = r.canonical();
  c.learning.seed = c.seed;
  validate(c);
  return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

/// Overrides the seed after parsing and keeps the fingerprint in sync.
inline void set_seed(ExperimentConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.learning.seed = seed;
  const std::string key = "experiment.seed=";
  const auto pos = c.canonical.find(key);
  if (pos != std::string::npos) {
    const auto end = c.canonical.find('\n', pos);
    c.canonical.replace(pos, end - pos, key + std::to_string(seed));
  }
}

}  // namespace ipp
