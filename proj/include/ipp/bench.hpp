#pragma once

// Experiment runner: paired planner x scenario matrices, aggregate tables,
// the KL robustness sweep and their CSV outputs.

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ipp/config.hpp"
#include "ipp/episode_log.hpp"
#include "ipp/grid_io.hpp"
#include "ipp/primitive_io.hpp"
#include "ipp/runner.hpp"
#include "ipp/stats.hpp"
#include "ipp/train.hpp"

namespace ipp {

inline PrimitiveGraph make_graph(const ExperimentConfig& c) {
  if (!c.graph_file.empty()) return load_graph(c.graph_file);
  return build_default_graph(c.graph);
}

inline EpisodeConfig make_episode_config(const ExperimentConfig& c, std::shared_ptr<const PrimitiveGraph> graph) {
  EpisodeConfig e;
  e.dims = c.dims;
  e.sensor = c.sensor;
  e.graph = std::move(graph);
  e.budget = c.budget_edges * mean_edge_cost(*e.graph);
  e.weights = c.weights;
  e.target_bonus_total = c.target_bonus_total;
  e.found_threshold = c.found_threshold;
  e.obs_window = c.obs_window;
  e.obs_scales = c.obs_scales;
  e.sense_points = c.sense_points;
  return e;
}

/// Evaluation scenarios use their own seed stream; training draws from the
/// per-worker streams in train(), so the two never share a seed in practice.
inline std::uint64_t scenario_seed(const ExperimentConfig& c, std::size_t index) {
  return derive_seed(c.seed, 0x5C000000ull + index);
}

inline std::uint64_t episode_seed(std::uint64_t scenario_seed) { return derive_seed(scenario_seed, 100); }

inline std::vector<Scenario> make_scenarios(const ExperimentConfig& c) {
  std::vector<Scenario> out;
  for (int i = 0; i < c.scenarios; ++i) out.push_back(make_scenario(scenario_seed(c, static_cast<std::size_t>(i)), c.scenario));
  return out;
}

inline ScenarioFactory scenario_factory(const ExperimentConfig& c) {
  const ScenarioConfig sc = c.scenario;
  return [sc](std::uint64_t seed) { return make_scenario(seed, sc); };
}

struct ResultRow {
  std::string planner;
  MetricTable table;
};

struct EpisodeResult {
  std::size_t planner = 0;
  std::size_t scenario = 0;
  std::uint64_t scenario_seed = 0;
  std::uint64_t episode_seed = 0;
  double kl = 0.0;
  EpisodeRecord record;
};

struct MatrixResult {
  std::vector<std::string> planners;
  std::vector<ResultRow> rows;
  std::vector<EpisodeResult> episodes;  // ordered by (planner, scenario)
};

inline void require_known_planners(const std::vector<std::string>& names, const ActorCriticNet* net) {
  for (const auto& n : names) {
    if (!detail::planner_registered(n)) throw ConfigError("unknown planner '" + n + "'");
    if (n == "rl" && !net) throw ConfigError("planner 'rl' needs a checkpoint");
  }
}

/// Runs task(i) for i in [0, n) on up to `jobs` threads. Exceptions are
/// rethrown in index order after all threads finish.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& task) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  for (std::size_t t = 0; t < count; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Every planner runs every scenario from the same (world, prior, episode seed).
inline MatrixResult run_matrix(const EpisodeEngine& engine, const std::vector<Scenario>& scenarios,
                               const std::vector<std::string>& planners, const PlannerOptions& opts, int jobs = 1,
                               const ActorCriticNet* net = nullptr) {
  require_known_planners(planners, net);
  if (scenarios.empty()) throw std::invalid_argument("run_matrix: no scenarios");
  MatrixResult res;
  res.planners = planners;
  const std::size_t S = scenarios.size();
  res.episodes.resize(planners.size() * S);
  parallel_for(res.episodes.size(), jobs, [&](std::size_t k) {
    const std::size_t p = k / S, s = k % S;
    auto planner = make_planner(planners[p], opts, net);
    auto& out = res.episodes[k];
    out.planner = p;
    out.scenario = s;
    out.scenario_seed = scenarios[s].seed;
    out.episode_seed = episode_seed(scenarios[s].seed);
    out.kl = scenarios[s].kl;
    out.record = run_episode(engine, *planner, scenarios[s].world, scenarios[s].prior, out.episode_seed);
  });
  for (std::size_t p = 0; p < planners.size(); ++p) {
    std::vector<EpisodeMetrics> ms;
    for (std::size_t s = 0; s < S; ++s) ms.push_back(res.episodes[p * S + s].record.metrics);
    res.rows.push_back({planners[p], summarize(ms)});
  }
  return res;
}

inline void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "planner,coverage_mean,coverage_std,entropy_reduction_mean,entropy_reduction_std,search_eff_mean,"
         "search_eff_std,episodes\n";
  for (const auto& r : rows) {
    const auto& t = r.table;
    out << r.planner << ',' << format_double(t.coverage.mean) << ',' << format_double(t.coverage.std) << ','
        << format_double(t.entropy_reduction.mean) << ',' << format_double(t.entropy_reduction.std) << ','
        << format_double(t.search_eff.mean) << ',' << format_double(t.search_eff.std) << ',' << t.episodes << '\n';
  }
}

inline void write_episodes_csv(std::ostream& out, const MatrixResult& m) {
  out << "planner,scenario,scenario_seed,episode_seed,kl,steps,coverage_pct,entropy_reduction_pct,search_eff_pct\n";
  for (const auto& e : m.episodes) {
    const auto& x = e.record.metrics;
    out << m.planners[e.planner] << ',' << e.scenario << ',' << e.scenario_seed << ',' << e.episode_seed << ','
        << format_double(e.kl) << ',' << e.record.steps.size() << ',' << format_double(x.coverage_pct) << ','
        << format_double(x.entropy_reduction_pct) << ',' << format_double(x.search_eff_pct) << '\n';
  }
}

inline std::string log_file_name(const std::string& planner, std::size_t scenario) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu.jsonl", planner.c_str(), scenario);
  return buf;
}

inline EpisodeLog episode_log_for(const ExperimentConfig& c, const EpisodeEngine& engine, const MatrixResult& m,
                                  const EpisodeResult& e) {
  LogHeader h;
  h.config_hash = c.hash();
  h.seed = e.episode_seed;
  h.scenario_seed = e.scenario_seed;
  h.planner = m.planners[e.planner];
  h.width = engine.dims().width;
  h.height = engine.dims().height;
  h.budget = engine.config().budget;
  return make_log(h, e.record);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

/// results.csv, episodes.csv and logs/<planner>_<scenario>.jsonl under dir.
inline void write_matrix_outputs(const std::filesystem::path& dir, const ExperimentConfig& c,
                                 const EpisodeEngine& engine, const MatrixResult& m, bool logs = true) {
  std::filesystem::create_directories(dir);
  std::ostringstream results, episodes;
  write_results_csv(results, m.rows);
  write_episodes_csv(episodes, m);
  write_text_file(dir / "results.csv", results.str());
  write_text_file(dir / "episodes.csv", episodes.str());
  if (!logs) return;
  std::filesystem::create_directories(dir / "logs");
  for (const auto& e : m.episodes) {
    std::ostringstream out;
    write_log(out, episode_log_for(c, engine, m, e));
    write_text_file(dir / "logs" / log_file_name(m.planners[e.planner], e.scenario), out.str());
  }
}

struct KlBucket {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<Scenario> scenarios;
};

struct KlSweepRow {
  std::size_t bucket = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::string planner;
  bool empty = true;
  BoxStats stats;
};

struct KlSweepResult {
  std::vector<KlBucket> buckets;
  std::vector<KlSweepRow> rows;
  long attempts = 0;
  std::size_t populated() const {
    std::size_t n = 0;
    for (const auto& b : buckets) n += b.scenarios.empty() ? 0 : 1;
    return n;
  }
};

/// Index of the bucket [e_k, e_{k+1}) containing kl; the last bucket is closed.
inline std::ptrdiff_t kl_bucket_of(const std::vector<double>& edges, double kl) {
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const bool last = k + 2 == edges.size();
    if (kl >= edges[k] && (kl < edges[k + 1] || (last && kl == edges[k + 1]))) return static_cast<std::ptrdiff_t>(k);
  }
  return -1;
}

/// Draws scenarios with random perturbation magnitude and keeps each one in the
/// bucket its measured KL falls into, until every bucket is full or the
/// attempt budget runs out.
inline std::vector<KlBucket> populate_kl_buckets(const ExperimentConfig& c, long* attempts_used = nullptr) {
  const auto& edges = c.kl.bucket_edges;
  std::vector<KlBucket> buckets;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) buckets.push_back({edges[k], edges[k + 1], {}});
  const auto per = static_cast<std::size_t>(c.kl.per_bucket);
  auto full = [&] {
    return std::all_of(buckets.begin(), buckets.end(), [&](const KlBucket& b) { return b.scenarios.size() >= per; });
  };
  long a = 0;
  for (; a < c.kl.max_attempts && !full(); ++a) {
    const std::uint64_t seed = derive_seed(c.seed, 0x4B000000ull + static_cast<std::uint64_t>(a));
    Rng mrng(derive_seed(seed, 3));
    const double m = std::pow(uniform01(mrng), c.kl.magnitude_power);
    ScenarioConfig sc = c.scenario;
    sc.shift_delta = m * c.kl.shift_max;
    sc.mix_weight = m * c.kl.mix_max;
    sc.cell_sigma = m * c.kl.sigma_max;
    auto s = make_scenario(seed, sc);
    const auto k = kl_bucket_of(edges, s.kl);
    if (k >= 0 && buckets[static_cast<std::size_t>(k)].scenarios.size() < per) {
      buckets[static_cast<std::size_t>(k)].scenarios.push_back(std::move(s));
    }
  }
  if (attempts_used) *attempts_used = a;
  return buckets;
}

inline KlSweepResult kl_sweep(const ExperimentConfig& c, const EpisodeEngine& engine, int jobs = 1,
                              const ActorCriticNet* net = nullptr) {
  require_known_planners(c.kl.planners, net);
  KlSweepResult res;
  res.buckets = populate_kl_buckets(c, &res.attempts);
  struct Task {
    std::size_t bucket, planner, scenario;
  };
  std::vector<Task> tasks;
  for (std::size_t b = 0; b < res.buckets.size(); ++b) {
    for (std::size_t p = 0; p < c.kl.planners.size(); ++p) {
      for (std::size_t s = 0; s < res.buckets[b].scenarios.size(); ++s) tasks.push_back({b, p, s});
    }
  }
  std::vector<double> eff(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    const auto& t = tasks[i];
    const auto& sc = res.buckets[t.bucket].scenarios[t.scenario];
    auto planner = make_planner(c.kl.planners[t.planner], c.planner, net);
    eff[i] = run_episode(engine, *planner, sc.world, sc.prior, episode_seed(sc.seed)).metrics.search_eff_pct;
  });
  std::size_t i = 0;
  for (std::size_t b = 0; b < res.buckets.size(); ++b) {
    for (std::size_t p = 0; p < c.kl.planners.size(); ++p) {
      KlSweepRow row{b, res.buckets[b].lo, res.buckets[b].hi, c.kl.planners[p], true, {}};
      const std::size_t n = res.buckets[b].scenarios.size();
      if (n > 0) {
        row.empty = false;
        row.stats = box_stats(std::span<const double>(eff.data() + i, n));
      }
      i += n;
      res.rows.push_back(row);
    }
  }
  return res;
}

inline void write_kl_sweep_csv(std::ostream& out, const KlSweepResult& r) {
  out << "bucket,kl_lo,kl_hi,planner,n,min,q1,median,q3,max,mean,status\n";
  for (const auto& row : r.rows) {
    out << row.bucket << ',' << format_double(row.lo) << ',' << format_double(row.hi) << ',' << row.planner << ',';
    if (row.empty) {
      out << "0,,,,,,,empty\n";
      continue;
    }
    const auto& s = row.stats;
    out << s.n << ',' << format_double(s.min) << ',' << format_double(s.q1) << ',' << format_double(s.median) << ','
        << format_double(s.q3) << ',' << format_double(s.max) << ',' << format_double(s.mean) << ",ok\n";
  }
}

}  // namespace ipp
