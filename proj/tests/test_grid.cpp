#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "ipp/grid.hpp"
#include "ipp/grid_io.hpp"
#include "oracles.hpp"

using namespace ipp;
using namespace ipp::oracle;

namespace {

double h_scalar(double p) { return -p * std::log(p) - (1.0 - p) * std::log(1.0 - p); }

}  // namespace

TEST(GridDims, RejectsDegenerate) {
  EXPECT_THROW((GridDims{0, 3, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((GridDims{3, 3, 0.0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((GridDims{1, 1, 0.5}.validate()));
}

TEST(OccupancyGrid, FromProbabilities) {
  const GridDims d{2, 2, 1.0};
  auto g = OccupancyGrid::from_probabilities(d, std::vector<double>{0.5, 0.9, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(g.log_odds({0, 0}), 0.0);
  EXPECT_NEAR(g.log_odds({1, 0}), std::log(9.0), 1e-12);
  EXPECT_NEAR(g.log_odds({0, 1}), std::log(0.999 / 0.001), 1e-12);
  EXPECT_NEAR(g.log_odds({0, 1}), 6.9068, 1e-4);
  EXPECT_NEAR(g.log_odds({1, 1}), -std::log(0.999 / 0.001), 1e-12);
  EXPECT_THROW(OccupancyGrid::from_probabilities(d, std::vector<double>{0.5, 0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(OccupancyGrid::from_probabilities(d, std::vector<double>{0.5, 0.5, 0.5, 1.5}), std::invalid_argument);
}

TEST(OccupancyGrid, RoundTripWithinClamp) {
  const GridDims d{50, 1, 1.0};
  std::vector<double> p(50);
  for (int i = 0; i < 50; ++i) p[i] = 0.001 + 0.998 * i / 49.0;
  const auto g = OccupancyGrid::from_probabilities(d, p);
  for (int i = 0; i < 50; ++i) EXPECT_NEAR(g.posterior({i, 0}), p[i], 1e-12);
}

TEST(OccupancyGrid, UpdateMatchesBayes) {
  OccupancyGrid g(GridDims{1, 1, 1.0});
  g.update({{0, 0}, 1, 0.9});
  EXPECT_NEAR(g.log_odds({0, 0}), std::log(9.0), 1e-12);
  EXPECT_NEAR(g.posterior({0, 0}), bayes_posterior(0.5, 1, 0.9), 1e-12);
  g.update({{0, 0}, 1, 0.9});
  EXPECT_NEAR(g.log_odds({0, 0}), 2.0 * std::log(9.0), 1e-12);
  EXPECT_NEAR(g.posterior({0, 0}), 0.9878, 1e-4);
  EXPECT_NEAR(g.posterior({0, 0}), bayes_posterior(bayes_posterior(0.5, 1, 0.9), 1, 0.9), 1e-12);
}

TEST(OccupancyGrid, OppositeMeasurementsCancel) {
  OccupancyGrid g(GridDims{1, 1, 1.0});
  g.update({{0, 0}, 0, 0.9});
  g.update({{0, 0}, 1, 0.9});
  EXPECT_NEAR(g.log_odds({0, 0}), 0.0, 1e-15);
}

TEST(OccupancyGrid, UpdateRejectsBadInput) {
  OccupancyGrid g(GridDims{2, 2, 1.0});
  EXPECT_THROW(g.update({{2, 0}, 1, 0.9}), std::out_of_range);
  EXPECT_THROW(g.update({{0, 0}, 1, 0.5}), std::invalid_argument);
  EXPECT_THROW(g.update({{0, 0}, 2, 0.9}), std::invalid_argument);
}

TEST(OccupancyGrid, PerfectSensorHitsClamp) {
  OccupancyGrid g(GridDims{1, 1, 1.0});
  g.update({{0, 0}, 1, 1.0});
  EXPECT_TRUE(std::isfinite(g.log_odds({0, 0})));
  EXPECT_NEAR(g.posterior({0, 0}), 0.999, 1e-12);
}

TEST(OccupancyGrid, MeasurementDirection) {
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    OccupancyGrid g(GridDims{1, 1, 1.0});
    g.set_log_odds({0, 0}, (uniform01(rng) - 0.5) * 8.0);
    const double before = g.posterior({0, 0});
    const double pc = 0.51 + 0.48 * uniform01(rng);
    OccupancyGrid up = g, down = g;
    up.update({{0, 0}, 1, pc});
    down.update({{0, 0}, 0, pc});
    EXPECT_GT(up.posterior({0, 0}), before);
    EXPECT_LT(down.posterior({0, 0}), before);
  }
}

TEST(Posterior, Values) {
  EXPECT_DOUBLE_EQ(logistic(0.0), 0.5);
  EXPECT_NEAR(logistic(std::log(9.0)), 0.9, 1e-15);
  EXPECT_NEAR(logistic(-std::log(9.0)), 0.1, 1e-15);
}

TEST(Entropy, Examples) {
  const GridDims d{10, 10, 1.0};
  OccupancyGrid g(d);
  EXPECT_NEAR(total_entropy(g), 100.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(total_entropy(g), 69.3147, 1e-4);
  auto low = OccupancyGrid::from_probabilities(d, std::vector<double>(100, 0.001));
  EXPECT_NEAR(total_entropy(low), 100.0 * h_scalar(0.001), 1e-12);
  EXPECT_NEAR(total_entropy(low), 0.7907255, 1e-6);
  EXPECT_NEAR(binary_entropy(0.9), 0.325083, 1e-6);
}

TEST(Entropy, Bounds) {
  Rng rng(11);
  const GridDims d{8, 8, 1.0};
  for (int k = 0; k < 50; ++k) {
    std::vector<double> p(64);
    for (auto& v : p) v = uniform01(rng);
    const auto g = OccupancyGrid::from_probabilities(d, p);
    const double h = total_entropy(g);
    EXPECT_GE(h, 0.0);
    EXPECT_LT(h, 64.0 * std::log(2.0));
  }
}

TEST(Entropy, QuantizedTelescopes) {
  OccupancyGrid g(GridDims{4, 4, 1.0});
  Rng rng(5);
  const std::int64_t q0 = quantized_total_entropy(g);
  std::int64_t prev = q0, sum = 0;
  for (int k = 0; k < 100; ++k) {
    g.update({{static_cast<int>(rng() % 4), static_cast<int>(rng() % 4)}, static_cast<int>(rng() % 2), 0.8});
    const auto q = quantized_total_entropy(g);
    sum += prev - q;
    prev = q;
  }
  EXPECT_EQ(sum, q0 - prev);
  EXPECT_NEAR(quanta_to_nats(prev), total_entropy(g), 1e-9);
}

TEST(TargetsFound, Examples) {
  const GridDims d{3, 3, 1.0};
  WorldMap w(d);
  w.set_occupied({0, 0});
  w.set_occupied({1, 1});
  w.set_occupied({2, 2});
  OccupancyGrid g(d);
  EXPECT_EQ(count_targets_found(g, w), 0u);
  g.update({{1, 1}, 1, 0.9});
  g.update({{1, 1}, 1, 0.9});
  EXPECT_EQ(count_targets_found(g, w), 1u);
  // false positives never count
  g.set_log_odds({2, 1}, 5.0);
  EXPECT_EQ(count_targets_found(g, w), 1u);
  EXPECT_THROW(count_targets_found(g, WorldMap(GridDims{2, 2, 1.0})), std::invalid_argument);
}

TEST(TargetsFound, StrictThreshold) {
  const GridDims d{1, 1, 1.0};
  WorldMap w(d);
  w.set_occupied({0, 0});
  OccupancyGrid g(d);
  g.set_log_odds({0, 0}, logit(0.95));
  const double p = g.posterior({0, 0});
  EXPECT_EQ(count_targets_found(g, w, p), 0u);
  g.set_log_odds({0, 0}, logit(0.95) + 1e-9);
  EXPECT_EQ(count_targets_found(g, w, 0.95), 1u);
}

TEST(Kl, Examples) {
  const std::vector<double> p{1.0, 0.0}, q{0.5, 0.5};
  EXPECT_NEAR(kl_divergence(p, q), std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(kl_divergence(q, q), 0.0);
  const std::vector<double> u1(100, 0.3), u2(100, 0.7);
  EXPECT_NEAR(kl_divergence(u1, u2), 0.0, 1e-15);
  EXPECT_THROW(kl_divergence(std::vector<double>{0, 0}, q), std::invalid_argument);
}

TEST(Kl, GibbsInequality) {
  Rng rng(9);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> p(30), q(30);
    for (auto& v : p) v = uniform01(rng);
    for (auto& v : q) v = uniform01(rng) + 1e-3;
    EXPECT_GE(kl_divergence(p, q), 0.0);
    EXPECT_NEAR(kl_divergence(p, p), 0.0, 1e-14);
  }
}

TEST(GridIo, CsvAndBinaryRoundTrip) {
  const GridDims d{3, 2, 1.0};
  auto g = OccupancyGrid::from_probabilities(d, std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  std::ostringstream csv;
  write_grid_csv(csv, g);
  std::istringstream lines(csv.str());
  std::string row;
  int rows = 0;
  while (std::getline(lines, row)) {
    ++rows;
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), 2);
  }
  EXPECT_EQ(rows, 2);

  std::stringstream bin;
  write_grid_binary(bin, g);
  EXPECT_EQ(bin.str().size(), 8u + 6u * 8u);
  const auto block = read_field_binary(bin);
  EXPECT_EQ(block.width, 3);
  EXPECT_EQ(block.height, 2);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(block.values[i], g.posterior_at(i));
}

TEST(GridIo, TruncatedBinaryRejected) {
  std::stringstream bin;
  write_field_binary(bin, 2, 2, std::vector<double>{1, 2, 3, 4});
  std::string s = bin.str();
  s.resize(s.size() - 3);
  std::istringstream in(s);
  EXPECT_THROW(read_field_binary(in), io::FormatError);
}

TEST(OccupancyGrid, PermutationInvariantAwayFromClamp) {
  Rng rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = random_unclamped_measurements(rng);
    auto a = OccupancyGrid::from_probabilities(m.dims, m.prior);
    auto b = a;
    auto order = m.measurements;
    std::shuffle(order.begin(), order.end(), rng);
    for (const auto& x : m.measurements) a.update(x);
    for (const auto& x : order) b.update(x);
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 3; ++x) EXPECT_NEAR(a.log_odds({x, y}), b.log_odds({x, y}), 1e-12);
    }
  }
}

TEST(OccupancyGrid, ClampMakesOrderMatter) {
  OccupancyGrid a(GridDims{1, 1, 1.0}), b(GridDims{1, 1, 1.0});
  const BinaryMeasurement up{{0, 0}, 1, 0.99}, down{{0, 0}, 0, 0.99};
  for (const auto& x : {up, up, down}) a.update(x);
  for (const auto& x : {down, up, up}) b.update(x);
  EXPECT_GT(std::abs(a.log_odds({0, 0}) - b.log_odds({0, 0})), 1.0);
}
