#pragma once

// Feedforward actor-critic over the primitive graph: shared tanh torso with
// policy, value and valid heads; masked policy; lambda-returns; GAE; the four
// training losses and their exact reverse-mode gradients.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipp/episode.hpp"
#include "ipp/planners.hpp"
#include "ipp/rng.hpp"

namespace ipp {

struct NetShape {
  int input = 0;
  int hidden1 = 256;
  int hidden2 = 256;
  int actions = 0;
  friend bool operator==(const NetShape&, const NetShape&) = default;
};

enum class Layer : int { Torso1 = 0, Torso2, Policy, Value, Valid };
inline constexpr int kLayerCount = 5;

/// All parameters live in one contiguous vector; layers are column-major views into it.
class ActorCriticNet {
public:
  using Matrix = Eigen::MatrixXd;
  using Vector = Eigen::VectorXd;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;
  using VectorMap = Eigen::Map<Vector>;
  using ConstVectorMap = Eigen::Map<const Vector>;

  ActorCriticNet() = default;

  /// Zero-initialized network of the given shape (also used as a gradient buffer).
  explicit ActorCriticNet(NetShape shape) : shape_(shape) {
    if (shape.input < 1 || shape.hidden1 < 1 || shape.hidden2 < 1 || shape.actions < 1) {
      throw std::invalid_argument("ActorCriticNet: all layer sizes must be positive");
    }
    dims_ = {{{shape.hidden1, shape.input},
              {shape.hidden2, shape.hidden1},
              {shape.actions, shape.hidden2},
              {1, shape.hidden2},
              {shape.actions, shape.hidden2}}};
    Eigen::Index off = 0;
    for (int l = 0; l < kLayerCount; ++l) {
      w_off_[l] = off;
      off += static_cast<Eigen::Index>(dims_[l][0]) * dims_[l][1];
      b_off_[l] = off;
      off += dims_[l][0];
    }
    params_ = Vector::Zero(off);
  }

  /// Uniform(+-1/sqrt(fan_in)) torso; heads scaled down so the initial policy is near uniform.
  static ActorCriticNet random(NetShape shape, Rng& rng) {
    ActorCriticNet net(shape);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int l = 0; l < kLayerCount; ++l) {
      const auto layer = static_cast<Layer>(l);
      const double scale = (layer == Layer::Torso1 || layer == Layer::Torso2) ? 1.0 : 0.1;
      const double bound = scale / std::sqrt(static_cast<double>(net.cols(layer)));
      auto w = net.weight(layer);
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = bound * u(rng);
      }
    }
    return net;
  }

  const NetShape& shape() const noexcept { return shape_; }
  int rows(Layer l) const { return dims_[static_cast<int>(l)][0]; }
  int cols(Layer l) const { return dims_[static_cast<int>(l)][1]; }
  Eigen::Index parameter_count() const noexcept { return params_.size(); }

  Vector& params() noexcept { return params_; }
  const Vector& params() const noexcept { return params_; }

  MatrixMap weight(Layer l) {
    const int i = static_cast<int>(l);
    return {params_.data() + w_off_[i], dims_[i][0], dims_[i][1]};
  }
  ConstMatrixMap weight(Layer l) const {
    const int i = static_cast<int>(l);
    return {params_.data() + w_off_[i], dims_[i][0], dims_[i][1]};
  }
  VectorMap bias(Layer l) {
    const int i = static_cast<int>(l);
    return {params_.data() + b_off_[i], dims_[i][0]};
  }
  ConstVectorMap bias(Layer l) const {
    const int i = static_cast<int>(l);
    return {params_.data() + b_off_[i], dims_[i][0]};
  }

  ActorCriticNet(const ActorCriticNet&) = default;
  ActorCriticNet& operator=(const ActorCriticNet&) = default;
  ActorCriticNet(ActorCriticNet&&) noexcept = default;
  ActorCriticNet& operator=(ActorCriticNet&&) noexcept = default;

private:
  NetShape shape_{};
  std::array<std::array<int, 2>, kLayerCount> dims_{};
  std::array<Eigen::Index, kLayerCount> w_off_{};
  std::array<Eigen::Index, kLayerCount> b_off_{};
  Vector params_;
};

struct NetOutput {
  Eigen::VectorXd logits;
  double value = 0.0;
  Eigen::VectorXd valid_logits;
};

/// Activations for a batch of T feature columns.
struct BatchActivations {
  Eigen::MatrixXd x;       // input x T
  Eigen::MatrixXd h1, h2;  // post-tanh
  Eigen::MatrixXd logits;  // A x T
  Eigen::RowVectorXd values;
  Eigen::MatrixXd valid_logits;
};

inline BatchActivations forward_batch(const ActorCriticNet& net, Eigen::MatrixXd x) {
  if (x.rows() != net.shape().input) {
    throw std::invalid_argument("forward: feature length " + std::to_string(x.rows()) + " != " +
                                std::to_string(net.shape().input));
  }
  BatchActivations a;
  a.x = std::move(x);
  a.h1 = ((net.weight(Layer::Torso1) * a.x).colwise() + net.bias(Layer::Torso1)).array().tanh().matrix();
  a.h2 = ((net.weight(Layer::Torso2) * a.h1).colwise() + net.bias(Layer::Torso2)).array().tanh().matrix();
  a.logits = (net.weight(Layer::Policy) * a.h2).colwise() + net.bias(Layer::Policy);
  a.values = ((net.weight(Layer::Value) * a.h2).colwise() + net.bias(Layer::Value)).row(0);
  a.valid_logits = (net.weight(Layer::Valid) * a.h2).colwise() + net.bias(Layer::Valid);
  return a;
}

inline NetOutput forward(const ActorCriticNet& net, std::span<const double> features) {
  if (static_cast<int>(features.size()) != net.shape().input) {
    throw std::invalid_argument("forward: feature length " + std::to_string(features.size()) + " != " +
                                std::to_string(net.shape().input));
  }
  const Eigen::Map<const Eigen::VectorXd> x(features.data(), static_cast<Eigen::Index>(features.size()));
  const Eigen::VectorXd h1 = (net.weight(Layer::Torso1) * x + net.bias(Layer::Torso1)).array().tanh().matrix();
  const Eigen::VectorXd h2 = (net.weight(Layer::Torso2) * h1 + net.bias(Layer::Torso2)).array().tanh().matrix();
  NetOutput o;
  o.logits = net.weight(Layer::Policy) * h2 + net.bias(Layer::Policy);
  o.value = (net.weight(Layer::Value) * h2 + net.bias(Layer::Value))[0];
  o.valid_logits = net.weight(Layer::Valid) * h2 + net.bias(Layer::Valid);
  return o;
}

/// Softmax restricted to valid entries; invalid entries are exactly zero.
inline Eigen::VectorXd masked_policy(const Eigen::VectorXd& logits, std::span<const std::uint8_t> mask) {
  if (static_cast<Eigen::Index>(mask.size()) != logits.size()) throw std::invalid_argument("masked_policy: size mismatch");
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (mask[i]) mx = std::max(mx, logits[i]);
  }
  if (mx == -std::numeric_limits<double>::infinity()) throw std::invalid_argument("masked_policy: no valid action");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(logits.size());
  double z = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (mask[i]) z += (p[i] = std::exp(logits[i] - mx));
  }
  p /= z;
  return p;
}

/// Inverse-CDF draw over the valid entries only.
inline int sample_action(const Eigen::VectorXd& probs, std::span<const std::uint8_t> mask, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  int last_valid = -1;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (!mask[i]) continue;
    last_valid = static_cast<int>(i);
    acc += probs[i];
    if (u < acc) return last_valid;
  }
  if (last_valid < 0) throw std::invalid_argument("sample_action: no valid action");
  return last_valid;
}

inline int greedy_action(const Eigen::VectorXd& probs, std::span<const std::uint8_t> mask) {
  return argmax_valid(mask, [&](int e) { return probs[e]; });
}

inline void require_equal_lengths(std::size_t a, std::size_t b, std::size_t c, const char* who) {
  if (a != b || b != c) throw std::invalid_argument(std::string(who) + ": sequence lengths differ");
}

/// G_t = r_t + gamma * [(1 - lambda) V(s_{t+1}) + lambda G_{t+1}]; a done step
/// cuts the recursion, otherwise the tail uses `bootstrap` for both terms.
inline std::vector<double> lambda_returns(std::span<const double> rewards, std::span<const double> values,
                                          std::span<const std::uint8_t> dones, double bootstrap, double gamma,
                                          double lambda) {
  require_equal_lengths(rewards.size(), values.size(), dones.size(), "lambda_returns");
  const std::size_t T = rewards.size();
  std::vector<double> G(T);
  for (std::size_t k = T; k-- > 0;) {
    if (dones[k]) {
      G[k] = rewards[k];
      continue;
    }
    const double next_v = k + 1 < T ? values[k + 1] : bootstrap;
    const double next_g = k + 1 < T ? G[k + 1] : bootstrap;
    G[k] = rewards[k] + gamma * ((1.0 - lambda) * next_v + lambda * next_g);
  }
  return G;
}

/// A_t = delta_t + gamma * lambda * A_{t+1}, delta_t = r_t + gamma V_{t+1} - V_t.
inline std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                               std::span<const std::uint8_t> dones, double bootstrap, double gamma, double lambda) {
  require_equal_lengths(rewards.size(), values.size(), dones.size(), "gae");
  const std::size_t T = rewards.size();
  std::vector<double> A(T);
  double next_adv = 0.0;
  for (std::size_t k = T; k-- > 0;) {
    const double next_v = dones[k] ? 0.0 : (k + 1 < T ? values[k + 1] : bootstrap);
    const double delta = rewards[k] + gamma * next_v - values[k];
    A[k] = delta + (dones[k] ? 0.0 : gamma * lambda * next_adv);
    next_adv = A[k];
  }
  return A;
}

struct RolloutBuffer {
  std::vector<std::vector<double>> features;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<ActionMask> masks;
  std::vector<std::uint8_t> dones;
  double bootstrap = 0.0;

  std::size_t size() const noexcept { return actions.size(); }
  void clear() { *this = RolloutBuffer{}; }
  void validate() const {
    const std::size_t T = actions.size();
    if (T == 0) throw std::invalid_argument("rollout buffer is empty");
    if (features.size() != T || rewards.size() != T || values.size() != T || masks.size() != T || dones.size() != T) {
      throw std::invalid_argument("rollout buffer sequences have unequal lengths");
    }
  }
};

struct LossConfig {
  double alpha1 = 0.01;  // entropy weight
  double alpha2 = 1.0;   // actor weight
  double beta1 = 0.7;    // valid-head weight on invalid entries
  double beta2 = 0.3;    // valid-head weight on valid entries
  double critic_weight = 0.5;
  bool normalize_advantages = true;
};

struct LossTargets {
  std::vector<double> returns;
  std::vector<double> advantages;
};

inline LossTargets compute_targets(const RolloutBuffer& buf, double gamma, double lambda_ret, double lambda_gae,
                                   bool normalize_advantages) {
  LossTargets t;
  t.returns = lambda_returns(buf.rewards, buf.values, buf.dones, buf.bootstrap, gamma, lambda_ret);
  t.advantages = gae(buf.rewards, buf.values, buf.dones, buf.bootstrap, gamma, lambda_gae);
  if (normalize_advantages && t.advantages.size() > 1) {
    double mean = 0.0;
    for (double a : t.advantages) mean += a;
    mean /= static_cast<double>(t.advantages.size());
    double var = 0.0;
    for (double a : t.advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(t.advantages.size());
    const double sd = std::sqrt(var) + 1e-8;
    for (double& a : t.advantages) a = (a - mean) / sd;
  }
  return t;
}

struct LossTerms {
  double critic = 0.0;        // sum (G - V)^2
  double actor = 0.0;         // sum log pi(a) * A
  double entropy = 0.0;       // sum H(pi)
  double valid = 0.0;         // asymmetric BCE of the valid head
  double policy_total = 0.0;  // -alpha1*entropy - alpha2*actor + valid
};

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline Eigen::MatrixXd buffer_features(const RolloutBuffer& buf, int input) {
  Eigen::MatrixXd x(input, static_cast<Eigen::Index>(buf.size()));
  for (std::size_t t = 0; t < buf.size(); ++t) {
    if (static_cast<int>(buf.features[t].size()) != input) throw std::invalid_argument("buffer feature length mismatch");
    x.col(static_cast<Eigen::Index>(t)) = Eigen::Map<const Eigen::VectorXd>(buf.features[t].data(), input);
  }
  return x;
}

namespace detail {

inline void require_finite(double v, std::size_t t, const char* term) {
  if (!std::isfinite(v)) {
    throw std::runtime_error(std::string("non-finite ") + term + " loss at step " + std::to_string(t));
  }
}

}  // namespace detail

/// Loss terms and, when `grad` is non-null, the gradient of
/// critic_weight * L_critic + L_policy accumulated into `grad`. The value head
/// only sees the critic term, the policy and valid heads only the policy
/// terms, the torso both. Returns and advantages are constants.
inline LossTerms evaluate_losses(const ActorCriticNet& net, const RolloutBuffer& buf, const LossTargets& targets,
                                 const LossConfig& cfg, ActorCriticNet* grad = nullptr) {
  buf.validate();
  const std::size_t T = buf.size();
  const int A = net.shape().actions;
  const auto act = forward_batch(net, buffer_features(buf, net.shape().input));
  LossTerms L;
  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(A, static_cast<Eigen::Index>(T));
  Eigen::MatrixXd d_valid = Eigen::MatrixXd::Zero(A, static_cast<Eigen::Index>(T));
  Eigen::RowVectorXd d_value = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(T));

  for (std::size_t t = 0; t < T; ++t) {
    const auto col = static_cast<Eigen::Index>(t);
    const auto& mask = buf.masks[t];
    if (static_cast<int>(mask.size()) != A) throw std::invalid_argument("buffer mask length mismatch");
    const int a = buf.actions[t];
    if (a < 0 || a >= A || !mask[a]) throw std::invalid_argument("buffer action is not valid at step " + std::to_string(t));

    const double err = targets.returns[t] - act.values[col];
    L.critic += err * err;
    d_value[col] = -2.0 * cfg.critic_weight * err;

    const Eigen::VectorXd p = masked_policy(act.logits.col(col), mask);
    const double log_pa = std::log(p[a]);
    const double adv = targets.advantages[t];
    L.actor += log_pa * adv;
    double h = 0.0;
    for (int j = 0; j < A; ++j) {
      if (mask[j] && p[j] > 0.0) h -= p[j] * std::log(p[j]);
    }
    L.entropy += h;
    for (int j = 0; j < A; ++j) {
      if (!mask[j]) continue;
      const double logp = p[j] > 0.0 ? std::log(p[j]) : 0.0;
      const double d_actor = (j == a ? 1.0 : 0.0) - p[j];  // d log pi(a) / d z_j
      const double d_ent = -p[j] * (logp + h);              // d H / d z_j
      d_logits(j, col) = -cfg.alpha2 * adv * d_actor - cfg.alpha1 * d_ent;
    }
    for (int j = 0; j < A; ++j) {
      const double u = act.valid_logits(j, col);
      const double y = mask[j] ? 1.0 : 0.0;
      // -[beta2 y log(phi) + beta1 (1-y) log(1-phi)], log(phi) = -softplus(-u)
      L.valid += cfg.beta2 * y * softplus(-u) + cfg.beta1 * (1.0 - y) * softplus(u);
      const double phi = 1.0 / (1.0 + std::exp(-u));
      d_valid(j, col) = cfg.beta1 * (1.0 - y) * phi - cfg.beta2 * y * (1.0 - phi);
    }
    detail::require_finite(L.critic, t, "critic");
    detail::require_finite(L.actor, t, "actor");
    detail::require_finite(L.entropy, t, "entropy");
    detail::require_finite(L.valid, t, "valid");
  }
  L.policy_total = -cfg.alpha1 * L.entropy - cfg.alpha2 * L.actor + L.valid;

  if (grad) {
    if (!(grad->shape() == net.shape())) throw std::invalid_argument("gradient buffer shape mismatch");
    grad->weight(Layer::Policy).noalias() += d_logits * act.h2.transpose();
    grad->bias(Layer::Policy) += d_logits.rowwise().sum();
    grad->weight(Layer::Value).noalias() += d_value * act.h2.transpose();
    grad->bias(Layer::Value)[0] += d_value.sum();
    grad->weight(Layer::Valid).noalias() += d_valid * act.h2.transpose();
    grad->bias(Layer::Valid) += d_valid.rowwise().sum();

    Eigen::MatrixXd d_h2 = net.weight(Layer::Policy).transpose() * d_logits +
                           net.weight(Layer::Value).transpose() * d_value +
                           net.weight(Layer::Valid).transpose() * d_valid;
    const Eigen::MatrixXd d_pre2 = d_h2.array() * (1.0 - act.h2.array().square());
    grad->weight(Layer::Torso2).noalias() += d_pre2 * act.h1.transpose();
    grad->bias(Layer::Torso2) += d_pre2.rowwise().sum();
    const Eigen::MatrixXd d_h1 = net.weight(Layer::Torso2).transpose() * d_pre2;
    const Eigen::MatrixXd d_pre1 = d_h1.array() * (1.0 - act.h1.array().square());
    grad->weight(Layer::Torso1).noalias() += d_pre1 * act.x.transpose();
    grad->bias(Layer::Torso1) += d_pre1.rowwise().sum();
  }
  return L;
}

inline LossTerms losses(const ActorCriticNet& net, const RolloutBuffer& buf, const LossTargets& targets,
                        const LossConfig& cfg) {
  return evaluate_losses(net, buf, targets, cfg, nullptr);
}

/// Analytic gradient of critic_weight * L_critic + L_policy.
inline ActorCriticNet backward(const ActorCriticNet& net, const RolloutBuffer& buf, const LossTargets& targets,
                               const LossConfig& cfg, LossTerms* terms = nullptr) {
  ActorCriticNet g(net.shape());
  const auto L = evaluate_losses(net, buf, targets, cfg, &g);
  if (terms) *terms = L;
  return g;
}

/// Greedy (argmax) policy planner backed by a trained network.
class RlPlanner final : public Planner {
public:
  explicit RlPlanner(const ActorCriticNet& net) : net_(net) {}
  std::string name() const override { return "rl"; }
  int next_action(const EpisodeEngine&, const EpisodeState&, const Observation& obs, const ActionMask& mask,
                  Rng&) override {
    const auto f = obs.flatten();
    const auto out = forward(net_, f);
    return greedy_action(masked_policy(out.logits, mask), mask);
  }

private:
  const ActorCriticNet& net_;
};

}  // namespace ipp
