#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ipp/learn.hpp"

using namespace ipp;

namespace {

RolloutBuffer random_buffer(const NetShape& s, int T, Rng& rng) {
  RolloutBuffer b;
  for (int t = 0; t < T; ++t) {
    std::vector<double> f(s.input);
    for (auto& v : f) v = 2 * uniform01(rng) - 1;
    ActionMask m(s.actions, 0);
    for (auto& v : m) v = uniform01(rng) < 0.6 ? 1 : 0;
    m[rng() % s.actions] = 1;
    std::vector<int> valid;
    for (int j = 0; j < s.actions; ++j) {
      if (m[j]) valid.push_back(j);
    }
    b.features.push_back(f);
    b.actions.push_back(valid[rng() % valid.size()]);
    b.rewards.push_back(2 * uniform01(rng) - 0.5);
    b.values.push_back(uniform01(rng));
    b.masks.push_back(m);
    b.dones.push_back(uniform01(rng) < 0.15 ? 1 : 0);
  }
  b.bootstrap = uniform01(rng);
  return b;
}

double total_loss(const ActorCriticNet& net, const RolloutBuffer& b, const LossTargets& t, const LossConfig& c) {
  const auto L = losses(net, b, t, c);
  return c.critic_weight * L.critic + L.policy_total;
}

}  // namespace

TEST(Net, ShapeAndZeroWeights) {
  const NetShape s{7, 5, 4, 3};
  ActorCriticNet net(s);
  EXPECT_EQ(net.parameter_count(), (5 * 7 + 5) + (4 * 5 + 4) + (3 * 4 + 3) + (1 * 4 + 1) + (3 * 4 + 3));
  const std::vector<double> x(7, 0.3);
  const auto o = forward(net, x);
  EXPECT_EQ(o.logits, Eigen::VectorXd::Zero(3));
  EXPECT_EQ(o.value, 0.0);
  EXPECT_THROW(forward(net, std::vector<double>(6)), std::invalid_argument);
  EXPECT_THROW(ActorCriticNet(NetShape{0, 1, 1, 1}), std::invalid_argument);
}

TEST(Net, DeterministicAndBatchConsistent) {
  Rng rng(1);
  const NetShape s{6, 8, 8, 4};
  const auto net = ActorCriticNet::random(s, rng);
  std::vector<double> x(6);
  for (auto& v : x) v = uniform01(rng);
  const auto a = forward(net, x), b = forward(net, x);
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_EQ(a.value, b.value);
  Eigen::MatrixXd X = Eigen::Map<Eigen::VectorXd>(x.data(), 6);
  const auto batch = forward_batch(net, X);
  EXPECT_NEAR((batch.logits.col(0) - a.logits).norm(), 0.0, 1e-14);
  EXPECT_NEAR(batch.values[0], a.value, 1e-14);
}

TEST(Net, LipschitzBound) {
  Rng rng(2);
  const NetShape s{10, 16, 16, 5};
  const auto net = ActorCriticNet::random(s, rng);
  auto opnorm = [](const auto& m) {
    return Eigen::JacobiSVD<Eigen::MatrixXd>(Eigen::MatrixXd(m)).singularValues()(0);
  };
  // tanh is 1-Lipschitz, so L <= |W_head| |W2| |W1|
  const double L = opnorm(net.weight(Layer::Policy)) * opnorm(net.weight(Layer::Torso2)) *
                   opnorm(net.weight(Layer::Torso1));
  for (int k = 0; k < 50; ++k) {
    std::vector<double> x(10), y(10);
    Eigen::VectorXd dir(10);
    for (int i = 0; i < 10; ++i) dir[i] = standard_normal(rng);
    dir.normalize();
    for (int i = 0; i < 10; ++i) {
      x[i] = uniform01(rng);
      y[i] = x[i] + 1e-7 * dir[i];
    }
    const double change = (forward(net, x).logits - forward(net, y).logits).norm();
    EXPECT_LE(change, L * 1e-7 * (1 + 1e-6));
  }
}

TEST(MaskedPolicy, Examples) {
  Eigen::VectorXd z(3);
  z << 2, 1, 0;
  const ActionMask all{1, 1, 1}, one{0, 1, 0}, two{1, 0, 1};
  const auto p = masked_policy(z, all);
  const double e0 = std::exp(2.0), e1 = std::exp(1.0), e2 = 1.0, s = e0 + e1 + e2;
  EXPECT_NEAR(p[0], e0 / s, 1e-15);
  EXPECT_NEAR(p[1], e1 / s, 1e-15);
  EXPECT_NEAR(p[2], e2 / s, 1e-15);
  EXPECT_NEAR(p[0], 0.6652, 1e-4);
  EXPECT_NEAR(p[1], 0.2447, 1e-4);
  EXPECT_NEAR(p[2], 0.0900, 1e-4);
  const auto q = masked_policy(z, one);
  EXPECT_EQ(q[1], 1.0);
  EXPECT_EQ(q[0], 0.0);
  EXPECT_EQ(q[2], 0.0);
  const auto u = masked_policy(Eigen::VectorXd::Constant(3, 0.7), two);
  EXPECT_DOUBLE_EQ(u[0], 0.5);
  EXPECT_EQ(u[1], 0.0);
  EXPECT_THROW(masked_policy(z, ActionMask{0, 0, 0}), std::invalid_argument);
}

TEST(MaskedPolicy, SumsToOneAndSamplesValid) {
  Rng rng(3);
  for (int k = 0; k < 2000; ++k) {
    Eigen::VectorXd z(20);
    for (int i = 0; i < 20; ++i) z[i] = 10 * standard_normal(rng);
    ActionMask m(20);
    for (auto& v : m) v = uniform01(rng) < 0.3;
    m[rng() % 20] = 1;
    const auto p = masked_policy(z, m);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    for (int i = 0; i < 20; ++i) {
      if (!m[i]) EXPECT_EQ(p[i], 0.0);
    }
    EXPECT_TRUE(m[sample_action(p, m, rng)]);
  }
}

TEST(LambdaReturns, ClosedForms) {
  Rng rng(4);
  const int T = 12;
  std::vector<double> r(T), v(T);
  std::vector<std::uint8_t> d(T, 0);
  for (int i = 0; i < T; ++i) {
    r[i] = standard_normal(rng);
    v[i] = standard_normal(rng);
  }
  const double boot = 0.37, g = 0.93;
  const auto td = lambda_returns(r, v, d, boot, g, 0.0);
  for (int t = 0; t < T; ++t) EXPECT_NEAR(td[t], r[t] + g * (t + 1 < T ? v[t + 1] : boot), 1e-12);
  const auto mc = lambda_returns(r, v, d, boot, g, 1.0);
  for (int t = 0; t < T; ++t) {
    double G = 0, disc = 1;
    for (int k = t; k < T; ++k, disc *= g) G += disc * r[k];
    G += disc * boot;
    EXPECT_NEAR(mc[t], G, 1e-12);
  }
}

TEST(LambdaReturns, HandCase) {
  const std::vector<double> r{1, 1}, v{0.5, 0.5};
  const std::vector<std::uint8_t> d{0, 0};
  const auto G = lambda_returns(r, v, d, 0.7, 0.99, 0.8);
  EXPECT_NEAR(G[1], 1.693, 1e-12);
  EXPECT_NEAR(G[0], 1 + 0.99 * (0.2 * 0.5 + 0.8 * 1.693), 1e-12);
  EXPECT_NEAR(G[0], 2.43986, 1e-5);
  // n-step mixture: (1-l) G^(1) + l G^(2), G^(2) already includes the bootstrap
  const double g1 = 1 + 0.99 * 0.5, g2 = 1 + 0.99 * 1 + 0.99 * 0.99 * 0.7;
  EXPECT_NEAR(G[0], 0.2 * g1 + 0.8 * g2, 1e-12);
}

TEST(LambdaReturns, DoneCutsBootstrap) {
  const std::vector<double> r{1, 2, 3}, v{0, 0, 0};
  const std::vector<std::uint8_t> d{0, 1, 0};
  const auto G = lambda_returns(r, v, d, 100.0, 1.0, 1.0);
  EXPECT_EQ(G[1], 2.0);
  EXPECT_EQ(G[0], 3.0);
  EXPECT_EQ(G[2], 103.0);
  EXPECT_THROW(lambda_returns(r, std::vector<double>{0}, d, 0, 1, 1), std::invalid_argument);
}

TEST(Gae, ClosedFormsAndOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int T = 10;
    std::vector<double> r(T), v(T);
    std::vector<std::uint8_t> d(T);
    for (int i = 0; i < T; ++i) {
      r[i] = standard_normal(rng);
      v[i] = standard_normal(rng);
      d[i] = uniform01(rng) < 0.2;
    }
    const double boot = standard_normal(rng), g = uniform01(rng), l = uniform01(rng);
    const auto A = gae(r, v, d, boot, g, l);
    auto delta = [&](int t) {
      const double next = d[t] ? 0.0 : (t + 1 < T ? v[t + 1] : boot);
      return r[t] + g * next - v[t];
    };
    for (int t = 0; t < T; ++t) {
      double s = 0, w = 1;
      for (int k = t; k < T; ++k) {
        s += w * delta(k);
        if (d[k]) break;
        w *= g * l;
      }
      EXPECT_NEAR(A[t], s, 1e-10);
    }
    const auto A0 = gae(r, v, d, boot, g, 0.0);
    for (int t = 0; t < T; ++t) EXPECT_NEAR(A0[t], delta(t), 1e-14);
  }
  const std::vector<double> r{1, 2, 3}, v{0.5, 4, -1};
  const std::vector<std::uint8_t> d{0, 0, 0};
  EXPECT_NEAR(gae(r, v, d, 0.0, 1.0, 1.0)[0], 6 - 0.5, 1e-12);
}

TEST(Losses, Examples) {
  const NetShape s{3, 4, 4, 2};
  ActorCriticNet net(s);  // zero weights: logits 0, value 0
  RolloutBuffer b;
  b.features = {{1, 2, 3}};
  b.actions = {0};
  b.rewards = {1};
  b.values = {0};
  b.masks = {{1, 1}};
  b.dones = {1};
  LossTargets t{{0.0}, {2.0}};
  LossConfig c;
  auto L = losses(net, b, t, c);
  EXPECT_EQ(L.critic, 0.0);
  EXPECT_NEAR(L.actor, 2 * std::log(0.5), 1e-15);
  EXPECT_NEAR(L.actor, -1.3863, 1e-4);
  EXPECT_NEAR(L.entropy, std::log(2.0), 1e-15);
  EXPECT_NEAR(L.policy_total, -c.alpha1 * L.entropy - c.alpha2 * L.actor + L.valid, 1e-15);
  // valid logits are 0: each entry contributes beta2 ln 2 when valid
  EXPECT_NEAR(L.valid, 2 * c.beta2 * std::log(2.0), 1e-15);
  b.masks = {{0, 1}};
  b.actions = {1};
  L = losses(net, b, t, c);
  EXPECT_EQ(L.entropy, 0.0);
  EXPECT_NEAR(L.valid, (c.beta1 + c.beta2) * std::log(2.0), 1e-15);
  b.actions = {0};
  EXPECT_THROW(losses(net, b, t, c), std::invalid_argument);
}

TEST(Losses, NonFiniteRejectedWithStep) {
  const NetShape s{2, 3, 3, 2};
  ActorCriticNet net(s);
  RolloutBuffer b;
  b.features = {{0, 0}, {0, 0}};
  b.actions = {0, 0};
  b.rewards = {0, 0};
  b.values = {0, 0};
  b.masks = {{1, 1}, {1, 1}};
  b.dones = {0, 0};
  LossTargets t{{0.0, std::numeric_limits<double>::infinity()}, {0.0, 0.0}};
  try {
    losses(net, b, t, LossConfig{});
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos);
  }
}

TEST(Backward, FiniteDifferenceCheck) {
  Rng rng(6);
  const NetShape s{6, 7, 5, 4};
  auto net = ActorCriticNet::random(s, rng);
  net.params() *= 3.0;  // move heads away from the near-uniform init
  const auto b = random_buffer(s, 12, rng);
  const auto t = compute_targets(b, 0.95, 0.8, 0.9, true);
  LossConfig c;
  c.alpha1 = 0.3;
  const auto g = backward(net, b, t, c);
  double worst = 0;
  const double h = 1e-5;
  for (int k = 0; k < 200; ++k) {
    const Eigen::Index i = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(net.parameter_count()));
    auto plus = net, minus = net;
    plus.params()[i] += h;
    minus.params()[i] -= h;
    const double num = (total_loss(plus, b, t, c) - total_loss(minus, b, t, c)) / (2 * h);
    const double ana = g.params()[i];
    const double rel = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6});
    worst = std::max(worst, rel);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Backward, HeadRouting) {
  Rng rng(7);
  const NetShape s{5, 6, 6, 3};
  const auto net = ActorCriticNet::random(s, rng);
  const auto b = random_buffer(s, 8, rng);
  const auto t = compute_targets(b, 0.9, 0.8, 0.9, false);
  LossConfig critic_only;
  critic_only.alpha1 = critic_only.alpha2 = critic_only.beta1 = critic_only.beta2 = 0.0;
  const auto gc = backward(net, b, t, critic_only);
  EXPECT_EQ(ActorCriticNet::Matrix(gc.weight(Layer::Policy)).norm(), 0.0);
  EXPECT_EQ(ActorCriticNet::Matrix(gc.weight(Layer::Valid)).norm(), 0.0);
  EXPECT_GT(ActorCriticNet::Matrix(gc.weight(Layer::Value)).norm(), 0.0);
  LossConfig policy_only;
  policy_only.critic_weight = 0.0;
  const auto gp = backward(net, b, t, policy_only);
  EXPECT_EQ(ActorCriticNet::Matrix(gp.weight(Layer::Value)).norm(), 0.0);
  EXPECT_EQ(gp.bias(Layer::Value)[0], 0.0);
  EXPECT_GT(ActorCriticNet::Matrix(gp.weight(Layer::Torso1)).norm(), 0.0);
}

TEST(Backward, ZeroLossZeroGradient) {
  Rng rng(8);
  const NetShape s{4, 5, 5, 3};
  const auto net = ActorCriticNet::random(s, rng);
  auto b = random_buffer(s, 5, rng);
  for (std::size_t k = 0; k < b.size(); ++k) {
    b.masks[k] = {0, 0, 0};
    b.masks[k][b.actions[k]] = 1;
  }
  LossTargets t;
  for (const auto& f : b.features) t.returns.push_back(forward(net, f).value);
  t.advantages.assign(b.size(), 0.0);
  LossConfig c;
  c.beta1 = c.beta2 = 0.0;
  LossTerms L;
  const auto g = backward(net, b, t, c, &L);
  EXPECT_NEAR(L.critic, 0.0, 1e-28);
  EXPECT_EQ(L.entropy, 0.0);
  EXPECT_NEAR(g.params().norm(), 0.0, 1e-12);
}

TEST(Backward, WeightLinearity) {
  Rng rng(9);
  const NetShape s{4, 5, 5, 3};
  const auto net = ActorCriticNet::random(s, rng);
  const auto b = random_buffer(s, 6, rng);
  const auto t = compute_targets(b, 0.9, 0.8, 0.9, false);
  LossConfig c0, c1, c2;
  c0.alpha2 = 0.0;
  c1.alpha2 = 1.0;
  c2.alpha2 = 2.0;
  const Eigen::VectorXd d1 = backward(net, b, t, c1).params() - backward(net, b, t, c0).params();
  const Eigen::VectorXd d2 = backward(net, b, t, c2).params() - backward(net, b, t, c0).params();
  EXPECT_LT((d2 - 2.0 * d1).norm(), 1e-12 * (1 + d1.norm()));
}

TEST(Backward, DescentIncreasesEntropy) {
  Rng rng(10);
  const NetShape s{4, 6, 6, 5};
  auto net = ActorCriticNet::random(s, rng);
  net.params() *= 4.0;
  auto b = random_buffer(s, 10, rng);
  LossTargets t;
  t.returns.assign(b.size(), 0.0);
  t.advantages.assign(b.size(), 0.0);
  LossConfig c;
  c.alpha1 = 1.0;
  c.beta1 = c.beta2 = 0.0;
  c.critic_weight = 0.0;
  const double before = losses(net, b, t, c).entropy;
  const auto g = backward(net, b, t, c);
  net.params() -= 1e-3 * g.params();
  EXPECT_GT(losses(net, b, t, c).entropy, before);
}
