#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <vector>

#include "ipp/env_gen.hpp"

using namespace ipp;

TEST(Gmm, SingleComponentForced) {
  Rng rng(1);
  const auto s = sample_gmm_spec(rng, {20, 20, 1.0}, {1, 1}, {4, 9});
  ASSERT_EQ(s.components.size(), 1u);
  EXPECT_DOUBLE_EQ(s.components[0].weight, 1.0);
  EXPECT_NO_THROW(s.validate());
}

TEST(Gmm, Deterministic) {
  Rng a(42), b(42);
  const auto s1 = sample_gmm_spec(a, {64, 64, 1.0}, {2, 5}, {16, 100});
  const auto s2 = sample_gmm_spec(b, {64, 64, 1.0}, {2, 5}, {16, 100});
  ASSERT_EQ(s1.components.size(), s2.components.size());
  for (std::size_t i = 0; i < s1.components.size(); ++i) {
    EXPECT_EQ(s1.components[i].weight, s2.components[i].weight);
    EXPECT_EQ(s1.components[i].mean, s2.components[i].mean);
    EXPECT_EQ(s1.components[i].var, s2.components[i].var);
  }
  double w = 0;
  for (const auto& c : s1.components) w += c.weight;
  EXPECT_NEAR(w, 1.0, 1e-12);
}

TEST(Gmm, MeansUniformOverMap) {
  Rng rng(7);
  const GridDims d{40, 20, 1.0};
  double sx = 0, sy = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_gmm_spec(rng, d, {1, 1}, {1, 2});
    sx += s.components[0].mean.x;
    sy += s.components[0].mean.y;
  }
  // uniform on [0, L]: mean L/2, std L/sqrt(12)
  EXPECT_NEAR(sx / n, 20.0, 3.0 * 40.0 / std::sqrt(12.0 * n));
  EXPECT_NEAR(sy / n, 10.0, 3.0 * 20.0 / std::sqrt(12.0 * n));
}

TEST(Gmm, ValidateRejects) {
  GmmSpec s{{{0.5, {0, 0}, {1, 1}}}};
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.components[0].weight = 1.0;
  s.components[0].var.x = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Rasterize, PeakAndRange) {
  const GridDims d{21, 21, 1.0};
  const GmmSpec s{{{1.0, {10.5, 10.5}, {9, 9}}}};
  const auto f = rasterize(s, d, {0.05, 0.8});
  std::size_t arg = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] > f[arg]) arg = i;
    EXPECT_GE(f[i], 0.05);
    EXPECT_LE(f[i], 0.8);
  }
  EXPECT_EQ(d.cell_at(arg), (Cell{10, 10}));
  EXPECT_DOUBLE_EQ(f[arg], 0.8);
}

TEST(Rasterize, NearlyDegenerateRangeIsNearUniform) {
  const GridDims d{10, 10, 1.0};
  const GmmSpec s{{{1.0, {2, 3}, {4, 4}}}};
  const auto f = rasterize(s, d, {0.5, 0.5 + 1e-9});
  for (double v : f) EXPECT_NEAR(v, 0.5, 1e-9);
}

TEST(Rasterize, SymmetricPair) {
  const GridDims d{20, 10, 1.0};
  const GmmSpec s{{{0.5, {5, 5}, {6, 3}}, {0.5, {15, 5}, {6, 3}}}};
  const auto dens = gmm_density(s, d);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 20; ++x) {
      EXPECT_NEAR(dens[d.index({x, y})], dens[d.index({19 - x, y})], 1e-12);
    }
  }
}

TEST(Targets, DegenerateVarianceCollapses) {
  const GridDims d{10, 10, 1.0};
  const GmmSpec s{{{1.0, {4.5, 6.5}, {1e-12, 1e-12}}}};
  Rng rng(3);
  const auto w = sample_targets(s, 5, d, rng);
  EXPECT_EQ(w.target_count(), 1u);
  EXPECT_TRUE(w.occupied({4, 6}));
}

TEST(Targets, DeterministicDistinct) {
  const GridDims d{64, 64, 1.0};
  const GmmSpec s{{{1.0, {32, 32}, {100, 100}}}};
  Rng a(11), b(11);
  const auto w1 = sample_targets(s, 5, d, a);
  const auto w2 = sample_targets(s, 5, d, b);
  EXPECT_EQ(w1, w2);
  EXPECT_EQ(w1.target_count(), 5u);
}

TEST(Targets, HistogramMatchesDensity) {
  // Each draw is one target on a fresh world, so the redraw rule never applies.
  const GridDims d{12, 12, 1.0};
  const GmmSpec s{{{1.0, {6.0, 6.0}, {4.0, 4.0}}}};
  Rng rng(2024);
  const int n = 10000;
  std::vector<double> counts(d.cell_count(), 0.0);
  for (int i = 0; i < n; ++i) {
    const auto w = sample_targets(s, 1, d, rng);
    counts[d.index(w.targets()[0])] += 1.0;
  }
  // Expected cell mass with boundary clipping: product of per-axis normal interval masses.
  auto Phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  auto axis_mass = [&](int i, int size) {
    const double lo = i == 0 ? -INFINITY : (i - 6.0) / 2.0;
    const double hi = i == size - 1 ? INFINITY : (i + 1 - 6.0) / 2.0;
    return Phi(hi) - Phi(lo);
  };
  double chi = 0.0;
  int bins = 0;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 12; ++x) {
      const double e = n * axis_mass(x, 12) * axis_mass(y, 12);
      const double o = counts[d.index({x, y})];
      if (e < 5.0) {
        pooled_obs += o;
        pooled_exp += e;
        continue;
      }
      chi += (o - e) * (o - e) / e;
      ++bins;
    }
  }
  if (pooled_exp > 0) {
    chi += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++bins;
  }
  const boost::math::chi_squared dist(bins - 1);
  EXPECT_GT(1.0 - boost::math::cdf(dist, chi), 0.001);
}

TEST(Perturb, IdentityAndEndpoints) {
  const GridDims d{16, 16, 1.0};
  Rng rng(5);
  const auto s = sample_gmm_spec(rng, d, {2, 3}, {4, 16});
  const auto f = rasterize(s, d, {0.05, 0.8});
  const std::vector<Perturbation> none{ShiftCenters{0.0}, MixNoise{0.0, s}, CellNoise{0.0}};
  EXPECT_EQ(perturb(s, f, none, d, {0.05, 0.8}, rng), f);
  const GmmSpec noise{{{1.0, {3, 3}, {5, 5}}}};
  const std::vector<Perturbation> full{MixNoise{1.0, noise}};
  EXPECT_EQ(perturb(s, f, full, d, {0.05, 0.8}, rng), rasterize(noise, d, {0.05, 0.8}));
}

TEST(Perturb, CellNoiseStd) {
  const GridDims d{100, 100, 1.0};
  const std::vector<double> f(d.cell_count(), 0.4);
  const GmmSpec s{{{1.0, {50, 50}, {10, 10}}}};
  Rng rng(12);
  const std::vector<Perturbation> p{CellNoise{0.05}};
  const auto g = perturb(s, f, p, d, {0.05, 0.8}, rng);
  double m = 0, m2 = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    m += g[i] - f[i];
    m2 += (g[i] - f[i]) * (g[i] - f[i]);
  }
  const double n = static_cast<double>(g.size());
  const double sd = std::sqrt((m2 - m * m / n) / (n - 1));
  EXPECT_NEAR(sd, 0.05, 0.005);
}

TEST(Scenario, NoPerturbationHasZeroKl) {
  ScenarioConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = make_scenario(seed, cfg);
    EXPECT_TRUE(s.perturbations.empty());
    EXPECT_NEAR(s.kl, 0.0, 1e-12);
    EXPECT_GE(s.world.target_count(), 1u);
  }
}

TEST(Scenario, PerturbedHasPositiveKl) {
  ScenarioConfig cfg;
  cfg.shift_delta = 2.0;
  cfg.cell_sigma = 0.02;
  for (std::uint64_t seed = 0; seed < 20; ++seed) EXPECT_GT(make_scenario(seed, cfg).kl, 1e-9);
}

TEST(Scenario, BitIdenticalRerun) {
  ScenarioConfig cfg;
  cfg.shift_delta = 3.0;
  cfg.mix_weight = 0.2;
  cfg.cell_sigma = 0.03;
  const auto a = make_scenario(77, cfg), b = make_scenario(77, cfg);
  EXPECT_EQ(a.world, b.world);
  EXPECT_EQ(a.prior, b.prior);
  EXPECT_EQ(a.truth_field, b.truth_field);
  EXPECT_EQ(a.kl, b.kl);
}

TEST(Scenario, LargerShiftMoreDivergence) {
  ScenarioConfig cfg;
  cfg.dims = {32, 32, 1.0};
  double prev = -1.0;
  for (double delta : {0.0, 2.0, 5.0, 10.0}) {
    cfg.shift_delta = delta;
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) sum += make_scenario(seed, cfg).kl;
    EXPECT_GE(sum / 100.0, prev);
    prev = sum / 100.0;
  }
}
