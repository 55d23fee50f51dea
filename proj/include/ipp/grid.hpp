#pragma once

// Probabilistic target map: per-cell log-odds belief with Bayesian binary
// measurement updates, entropy accounting and field divergence.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ipp {

struct Cell {
  int x = 0;
  int y = 0;
  friend constexpr bool operator==(const Cell&, const Cell&) = default;
};

/// Row-major order: y first, then x.
constexpr bool row_major_less(const Cell& a, const Cell& b) noexcept {
  return a.y != b.y ? a.y < b.y : a.x < b.x;
}

struct GridDims {
  int width = 1;
  int height = 1;
  double cell_size = 1.0;

  void validate() const {
    if (width < 1 || height < 1) throw std::invalid_argument("grid dims must be at least 1x1");
    if (!(cell_size > 0.0)) throw std::invalid_argument("cell_size must be positive");
  }
  std::size_t cell_count() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  bool contains(Cell c) const noexcept { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  std::size_t index(Cell c) const noexcept {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(c.x);
  }
  Cell cell_at(std::size_t i) const noexcept {
    return {static_cast<int>(i % static_cast<std::size_t>(width)),
            static_cast<int>(i / static_cast<std::size_t>(width))};
  }
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// Posterior clamp. Keeps log-odds finite; the update rule alone is unbounded.
inline constexpr double kProbabilityFloor = 0.001;

inline double logit(double p) { return std::log(p / (1.0 - p)); }
inline double logistic(double l) { return 1.0 / (1.0 + std::exp(-l)); }

inline const double kLogOddsBound = logit(1.0 - kProbabilityFloor);

inline double clamp_probability(double p) {
  return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
}
inline double clamp_log_odds(double l) { return std::clamp(l, -kLogOddsBound, kLogOddsBound); }

/// Binary entropy in nats. H(0) = H(1) = 0.
inline double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log(p) - (1.0 - p) * std::log1p(-p);
}

struct BinaryMeasurement {
  Cell cell;
  int z = 0;  // 1 = target seen
  double p_correct = 1.0;

  void validate() const {
    if (z != 0 && z != 1) throw std::invalid_argument("measurement z must be 0 or 1");
    if (!(p_correct > 0.5 && p_correct <= 1.0)) {
      throw std::invalid_argument("measurement p_correct must lie in (0.5, 1]");
    }
  }
};

/// ln p(z|occupied)/p(z|free) for a symmetric sensor. Infinite when p_correct == 1;
/// the grid clamps the result.
inline double measurement_log_ratio(int z, double p_correct) {
  const double r = std::log(p_correct) - std::log1p(-p_correct);
  return z == 1 ? r : -r;
}

class OccupancyGrid {
public:
  explicit OccupancyGrid(GridDims dims) : dims_(dims) {
    dims_.validate();
    log_odds_.assign(dims_.cell_count(), 0.0);
  }

  static OccupancyGrid from_probabilities(GridDims dims, std::span<const double> probs) {
    OccupancyGrid g(dims);
    if (probs.size() != dims.cell_count()) {
      throw std::invalid_argument("probability field has " + std::to_string(probs.size()) +
                                  " cells, dims require " + std::to_string(dims.cell_count()));
    }
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const double p = probs[i];
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability outside [0,1]");
      g.log_odds_[i] = logit(clamp_probability(p));
    }
    return g;
  }

  const GridDims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return log_odds_.size(); }

  double log_odds(Cell c) const { return log_odds_[checked_index(c)]; }
  double log_odds_at(std::size_t i) const { return log_odds_[i]; }
  std::span<const double> log_odds() const noexcept { return log_odds_; }

  void set_log_odds(Cell c, double l) { log_odds_[checked_index(c)] = clamp_log_odds(l); }
  void set_log_odds_at(std::size_t i, double l) { log_odds_[i] = clamp_log_odds(l); }

  double posterior(Cell c) const { return logistic(log_odds(c)); }
  double posterior_at(std::size_t i) const { return logistic(log_odds_[i]); }

  std::vector<double> posteriors() const {
    std::vector<double> out(log_odds_.size());
    std::transform(log_odds_.begin(), log_odds_.end(), out.begin(), logistic);
    return out;
  }

  /// Additive log-odds update, clamped to the logit bounds.
  void update(const BinaryMeasurement& m) {
    m.validate();
    const std::size_t i = checked_index(m.cell);
    log_odds_[i] = clamp_log_odds(log_odds_[i] + measurement_log_ratio(m.z, m.p_correct));
  }

private:
  std::size_t checked_index(Cell c) const {
    if (!dims_.contains(c)) {
      throw std::out_of_range("cell (" + std::to_string(c.x) + "," + std::to_string(c.y) +
                              ") outside grid");
    }
    return dims_.index(c);
  }

  GridDims dims_;
  std::vector<double> log_odds_;
};

/// Per-cell boolean layer (coverage, obstacles).
class CellMask {
public:
  CellMask() = default;
  explicit CellMask(GridDims dims, bool value = false)
      : dims_(dims), bits_(dims.cell_count(), value ? 1 : 0) {}

  const GridDims& dims() const noexcept { return dims_; }
  bool get(Cell c) const { return bits_.at(dims_.index(c)) != 0; }
  bool get_at(std::size_t i) const { return bits_[i] != 0; }
  void set(Cell c, bool v = true) { bits_.at(dims_.index(c)) = v ? 1 : 0; }
  void set_at(std::size_t i, bool v = true) { bits_[i] = v ? 1 : 0; }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool empty() const noexcept { return bits_.empty(); }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  friend bool operator==(const CellMask&, const CellMask&) = default;

private:
  GridDims dims_{};
  std::vector<std::uint8_t> bits_;
};

/// Ground-truth target layout.
class WorldMap {
public:
  explicit WorldMap(GridDims dims) : occupied_(dims) {}

  const GridDims& dims() const noexcept { return occupied_.dims(); }
  bool occupied(Cell c) const { return occupied_.get(c); }
  bool occupied_at(std::size_t i) const { return occupied_.get_at(i); }
  void set_occupied(Cell c, bool v = true) { occupied_.set(c, v); }

  /// Occupied cells in row-major order; target k of an episode is element k.
  std::vector<Cell> targets() const {
    std::vector<Cell> out;
    const auto& d = dims();
    for (std::size_t i = 0; i < d.cell_count(); ++i) {
      if (occupied_.get_at(i)) out.push_back(d.cell_at(i));
    }
    return out;
  }
  std::size_t target_count() const { return occupied_.count(); }
  friend bool operator==(const WorldMap&, const WorldMap&) = default;

private:
  CellMask occupied_;
};

inline double total_entropy(const OccupancyGrid& grid) {
  double h = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) h += binary_entropy(grid.posterior_at(i));
  return h;
}

/// Fixed-point entropy unit (2^-40 nats). Episode rewards are differences of
/// quantized totals, so they are exactly representable and telescope exactly.
inline constexpr double kEntropyQuantum = 1.0 / 1099511627776.0;

inline std::int64_t entropy_quanta(double h) { return std::llround(h / kEntropyQuantum); }

inline std::int64_t quantized_total_entropy(const OccupancyGrid& grid) {
  std::int64_t q = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) q += entropy_quanta(binary_entropy(grid.posterior_at(i)));
  return q;
}

inline double quanta_to_nats(std::int64_t q) { return static_cast<double>(q) * kEntropyQuantum; }

inline constexpr double kDefaultFoundThreshold = 0.95;

/// True targets whose posterior is strictly above threshold. False positives are not counted.
inline std::size_t count_targets_found(const OccupancyGrid& grid, const WorldMap& world,
                                       double threshold = kDefaultFoundThreshold) {
  if (!(grid.dims() == world.dims())) throw std::invalid_argument("grid/world dims mismatch");
  if (!(threshold > 0.5 && threshold < 1.0)) throw std::invalid_argument("threshold must lie in (0.5, 1)");
  std::size_t n = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (world.occupied_at(i) && grid.posterior_at(i) > threshold) ++n;
  }
  return n;
}

/// KL(p || q) between two non-negative fields, each normalized to unit mass.
/// q is floored at 1e-12 after normalization.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  const double sp = std::accumulate(p.begin(), p.end(), 0.0);
  const double sq = std::accumulate(q.begin(), q.end(), 0.0);
  if (!(sp > 0.0) || !(sq > 0.0)) throw std::invalid_argument("kl_divergence: field sums to zero");
  constexpr double eps = 1e-12;
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw std::invalid_argument("kl_divergence: negative entry");
    const double ph = p[i] / sp;
    if (ph <= 0.0) continue;
    const double qh = std::max(q[i] / sq, eps);
    kl += ph * std::log(ph / qh);
  }
  return std::max(0.0, kl);
}

}  // namespace ipp
