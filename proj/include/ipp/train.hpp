#pragma once

// Synchronous multi-worker actor-critic training, greedy-policy evaluation and
// network checkpoints.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ipp/binary_io.hpp"
#include "ipp/env_gen.hpp"
#include "ipp/episode.hpp"
#include "ipp/grid_io.hpp"
#include "ipp/learn.hpp"
#include "ipp/runner.hpp"
#include "ipp/stats.hpp"

namespace ipp {

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  double gamma = 0.99;
  double lambda_ret = 0.8;
  double lambda_gae = 0.95;
  LossConfig loss;
  double learning_rate = 3e-4;
  int rollout_length = 20;
  int workers = 4;
  long total_steps = 200000;
  std::uint64_t seed = 1;
  int hidden = 256;
  double grad_clip = 40.0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double reward_scale = 1.0;  // rewards are multiplied by this before the returns
  int threads = 1;

  void validate() const {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(gamma) || !unit(lambda_ret) || !unit(lambda_gae)) throw std::invalid_argument("gamma and lambdas must lie in [0,1]");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (rollout_length < 1) throw std::invalid_argument("rollout length must be >= 1");
    if (workers < 1) throw std::invalid_argument("worker count must be >= 1");
    if (total_steps < 0) throw std::invalid_argument("total steps must be >= 0");
    if (hidden < 1) throw std::invalid_argument("hidden width must be >= 1");
    if (!(grad_clip > 0.0)) throw std::invalid_argument("gradient clip must be positive");
    if (!(reward_scale > 0.0)) throw std::invalid_argument("reward scale must be positive");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  }
};

struct CurvePoint {
  long round = 0;
  long steps = 0;
  double mean_reward = 0.0;
  LossTerms losses;
  double grad_norm = 0.0;
  long episodes = 0;
};

struct TrainResult {
  ActorCriticNet net;
  std::vector<CurvePoint> curve;
  long actions_sampled = 0;
  long invalid_actions = 0;
  long episodes = 0;
};

using ScenarioFactory = std::function<Scenario(std::uint64_t seed)>;

inline NetShape net_shape_for(const EpisodeEngine& engine, int hidden) {
  return {static_cast<int>(engine.feature_size()), hidden, hidden, static_cast<int>(engine.action_count())};
}

namespace detail {

class Optimizer {
public:
  Optimizer(OptimizerKind kind, double lr, Eigen::Index n) : kind_(kind), lr_(lr) {
    if (kind_ == OptimizerKind::Adam) {
      m_ = Eigen::VectorXd::Zero(n);
      v_ = Eigen::VectorXd::Zero(n);
    }
  }
  void apply(Eigen::VectorXd& params, const Eigen::VectorXd& g) {
    if (kind_ == OptimizerKind::Sgd) {
      params -= lr_ * g;
      return;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t_;
    m_ = b1 * m_ + (1.0 - b1) * g;
    v_ = b2 * v_ + (1.0 - b2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(b1, t_), c2 = 1.0 - std::pow(b2, t_);
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
  }

private:
  OptimizerKind kind_;
  double lr_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

struct Worker {
  Rng rng;
  std::uint64_t scenario_stream = 0;
  std::uint64_t base_seed = 0;
  Scenario scenario;
  EpisodeState state;
  std::vector<double> features;
  RolloutBuffer buffer;
  ActorCriticNet grad;
  LossTerms terms;
  double reward_sum = 0.0;
  long episodes = 0;
  long sampled = 0;
  long invalid = 0;
};

inline void start_episode(Worker& w, const EpisodeEngine& engine, const ScenarioFactory& factory) {
  for (;;) {
    const std::uint64_t sseed = derive_seed(w.base_seed, w.scenario_stream++);
    w.scenario = factory(sseed);
    w.state = engine.reset(w.scenario.world, w.scenario.prior, derive_seed(sseed, 7));
    if (!w.state.done) break;
  }
  w.features = engine.build_observation(w.state).flatten();
}

inline void rollout(Worker& w, const ActorCriticNet& net, const EpisodeEngine& engine, const ScenarioFactory& factory,
                    const TrainConfig& cfg) {
  w.buffer.clear();
  w.reward_sum = 0.0;
  for (int k = 0; k < cfg.rollout_length; ++k) {
    const auto mask = engine.valid_actions(w.state);
    const auto out = forward(net, w.features);
    const auto probs = masked_policy(out.logits, mask);
    const int a = sample_action(probs, mask, w.rng);
    ++w.sampled;
    if (!mask[a]) ++w.invalid;
    auto r = engine.step(w.state, a);
    w.buffer.features.push_back(std::move(w.features));
    w.buffer.actions.push_back(a);
    w.buffer.rewards.push_back(cfg.reward_scale * r.reward.total);
    w.buffer.values.push_back(out.value);
    w.buffer.masks.push_back(mask);
    w.buffer.dones.push_back(r.done ? 1 : 0);
    w.reward_sum += r.reward.total;
    if (r.done) {
      ++w.episodes;
      start_episode(w, engine, factory);
    } else {
      w.features = r.obs.flatten();
    }
  }
  w.buffer.bootstrap = w.buffer.dones.back() ? 0.0 : forward(net, w.features).value;
  const auto targets = compute_targets(w.buffer, cfg.gamma, cfg.lambda_ret, cfg.lambda_gae,
                                       cfg.loss.normalize_advantages);
  w.grad = ActorCriticNet(net.shape());
  w.terms = evaluate_losses(net, w.buffer, targets, cfg.loss, &w.grad);
}

}  // namespace detail

/// Each round every worker rolls out rollout_length steps from the same
/// parameter snapshot; gradients are averaged in worker order, clipped to
/// grad_clip in global norm, and applied once.
inline TrainResult train(const TrainConfig& cfg, const EpisodeEngine& engine, const ScenarioFactory& factory,
                         const ActorCriticNet* init = nullptr,
                         const std::function<void(const CurvePoint&)>& on_round = {}) {
  cfg.validate();
  TrainResult res;
  const NetShape shape = net_shape_for(engine, cfg.hidden);
  if (init) {
    if (!(init->shape() == shape)) throw std::invalid_argument("train: initial network shape does not match engine");
    res.net = *init;
  } else {
    Rng init_rng(derive_seed(cfg.seed, 0));
    res.net = ActorCriticNet::random(shape, init_rng);
  }
  const long per_round = static_cast<long>(cfg.workers) * cfg.rollout_length;
  const long rounds = cfg.total_steps / per_round;
  if (rounds == 0) return res;

  std::vector<detail::Worker> workers(static_cast<std::size_t>(cfg.workers));
  for (int k = 0; k < cfg.workers; ++k) {
    auto& w = workers[static_cast<std::size_t>(k)];
    w.base_seed = derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(k));
    w.rng.seed(derive_seed(w.base_seed, 0xA11CE));
    detail::start_episode(w, engine, factory);
  }
  detail::Optimizer opt(cfg.optimizer, cfg.learning_rate, res.net.parameter_count());

  for (long round = 0; round < rounds; ++round) {
    const ActorCriticNet& snapshot = res.net;
    auto run_worker = [&](std::size_t k) { detail::rollout(workers[k], snapshot, engine, factory, cfg); };
    try {
      if (cfg.threads <= 1 || cfg.workers == 1) {
        for (std::size_t k = 0; k < workers.size(); ++k) run_worker(k);
      } else {
        std::vector<std::exception_ptr> errors(workers.size());
        std::vector<std::thread> pool;
        std::size_t next = 0;
        while (next < workers.size()) {
          pool.clear();
          for (int t = 0; t < cfg.threads && next < workers.size(); ++t, ++next) {
            pool.emplace_back([&, k = next] {
              try {
                run_worker(k);
              } catch (...) {
                errors[k] = std::current_exception();
              }
            });
          }
          for (auto& th : pool) th.join();
        }
        for (auto& e : errors) {
          if (e) std::rethrow_exception(e);
        }
      }
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("training diverged in round " + std::to_string(round) + ": " + e.what());
    }

    Eigen::VectorXd g = Eigen::VectorXd::Zero(res.net.parameter_count());
    CurvePoint cp;
    cp.round = round;
    cp.steps = (round + 1) * per_round;
    for (const auto& w : workers) {
      g += w.grad.params();
      cp.mean_reward += w.reward_sum;
      cp.losses.critic += w.terms.critic;
      cp.losses.actor += w.terms.actor;
      cp.losses.entropy += w.terms.entropy;
      cp.losses.valid += w.terms.valid;
      cp.losses.policy_total += w.terms.policy_total;
    }
    const double K = static_cast<double>(cfg.workers);
    g /= K;
    cp.mean_reward /= static_cast<double>(per_round);
    cp.losses.critic /= K;
    cp.losses.actor /= K;
    cp.losses.entropy /= K;
    cp.losses.valid /= K;
    cp.losses.policy_total /= K;
    cp.grad_norm = g.norm();
    if (!std::isfinite(cp.grad_norm)) {
      throw std::runtime_error("training diverged in round " + std::to_string(round) + ": non-finite gradient");
    }
    if (cp.grad_norm > cfg.grad_clip) g *= cfg.grad_clip / cp.grad_norm;
    opt.apply(res.net.params(), g);
    for (const auto& w : workers) cp.episodes += w.episodes;
    res.curve.push_back(cp);
    if (on_round) on_round(cp);
  }
  for (const auto& w : workers) {
    res.actions_sampled += w.sampled;
    res.invalid_actions += w.invalid;
    res.episodes += w.episodes;
  }
  return res;
}

inline void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "round,steps,mean_reward,critic,actor,entropy,valid,policy_total,grad_norm,episodes\n";
  for (const auto& c : curve) {
    out << c.round << ',' << c.steps << ',' << format_double(c.mean_reward) << ',' << format_double(c.losses.critic)
        << ',' << format_double(c.losses.actor) << ',' << format_double(c.losses.entropy) << ','
        << format_double(c.losses.valid) << ',' << format_double(c.losses.policy_total) << ','
        << format_double(c.grad_norm) << ',' << c.episodes << '\n';
  }
}

/// Greedy masked-policy rollouts; one episode per (scenario, repeat) with seeds
/// derived from the scenario seed.
inline MetricTable evaluate(const ActorCriticNet& net, const EpisodeEngine& engine,
                            const std::vector<Scenario>& scenarios, int episodes_per_scenario,
                            std::vector<EpisodeMetrics>* per_episode = nullptr) {
  if (episodes_per_scenario < 1) throw std::invalid_argument("evaluate: episodes_per_scenario must be >= 1");
  RlPlanner planner(net);
  std::vector<EpisodeMetrics> ms;
  for (const auto& sc : scenarios) {
    for (int r = 0; r < episodes_per_scenario; ++r) {
      ms.push_back(run_episode(engine, planner, sc.world, sc.prior, derive_seed(sc.seed, 100 + r)).metrics);
    }
  }
  if (per_episode) *per_episode = ms;
  return summarize(ms);
}

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_checkpoint(std::ostream& out, const ActorCriticNet& net) {
  io::write_magic(out, "IPPN");
  io::write_u32_le(out, kCheckpointVersion);
  const auto& s = net.shape();
  for (int v : {s.input, s.hidden1, s.hidden2, s.actions}) io::write_u32_le(out, static_cast<std::uint32_t>(v));
  io::write_u64_le(out, static_cast<std::uint64_t>(net.parameter_count()));
  for (Eigen::Index i = 0; i < net.parameter_count(); ++i) io::write_f64_le(out, net.params()[i]);
}

inline ActorCriticNet read_checkpoint(std::istream& in) {
  io::expect_magic(in, "IPPN");
  const auto version = io::read_u32_le(in);
  if (version != kCheckpointVersion) throw io::FormatError("unsupported checkpoint version " + std::to_string(version));
  NetShape s;
  s.input = static_cast<int>(io::read_u32_le(in));
  s.hidden1 = static_cast<int>(io::read_u32_le(in));
  s.hidden2 = static_cast<int>(io::read_u32_le(in));
  s.actions = static_cast<int>(io::read_u32_le(in));
  if (s.input < 1 || s.hidden1 < 1 || s.hidden2 < 1 || s.actions < 1 || s.input > (1 << 24) || s.hidden1 > (1 << 16) ||
      s.hidden2 > (1 << 16) || s.actions > (1 << 16)) {
    throw io::FormatError("checkpoint has implausible layer sizes");
  }
  ActorCriticNet net(s);
  const auto n = io::read_u64_le(in);
  if (n != static_cast<std::uint64_t>(net.parameter_count())) throw io::FormatError("checkpoint parameter count mismatch");
  for (Eigen::Index i = 0; i < net.parameter_count(); ++i) {
    const double v = io::read_f64_le(in);
    if (!std::isfinite(v)) throw io::FormatError("checkpoint contains a non-finite parameter");
    net.params()[i] = v;
  }
  return net;
}

inline void save_checkpoint(const std::string& path, const ActorCriticNet& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_checkpoint(out, net);
  if (!out) throw std::runtime_error("failed writing " + path);
}

inline ActorCriticNet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

/// Any baseline by name, or "rl" backed by `net` (which must outlive the planner).
inline std::unique_ptr<Planner> make_planner(std::string_view name, const PlannerOptions& o,
                                             const ActorCriticNet* net = nullptr) {
  if (name == "rl") {
    if (!net) throw std::invalid_argument("planner 'rl' requires a trained network");
    return std::make_unique<RlPlanner>(*net);
  }
  return make_baseline_planner(name, o);
}

}  // namespace ipp
