#pragma once

// Ground-truth worlds from Gaussian mixtures and perturbed agent priors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "ipp/grid.hpp"
#include "ipp/primitives.hpp"
#include "ipp/rng.hpp"

namespace ipp {

struct GmmComponent {
  double weight = 1.0;
  Vec2 mean;  // metres
  Vec2 var;   // per-axis variance, m^2
};

inline constexpr std::size_t kMaxGmmComponents = 64;

struct GmmSpec {
  std::vector<GmmComponent> components;

  void validate() const {
    if (components.empty() || components.size() > kMaxGmmComponents) {
      throw std::invalid_argument("GMM must have between 1 and 64 components");
    }
    double w = 0.0;
    for (const auto& c : components) {
      if (!(c.var.x > 0.0 && c.var.y > 0.0)) throw std::invalid_argument("GMM variances must be positive");
      if (!(c.weight >= 0.0)) throw std::invalid_argument("GMM weights must be non-negative");
      w += c.weight;
    }
    if (std::abs(w - 1.0) > 1e-9) throw std::invalid_argument("GMM weights must sum to 1");
  }
};

struct IntRange {
  int lo = 1;
  int hi = 1;
};
struct RealRange {
  double lo = 0.0;
  double hi = 0.0;
};

inline GmmSpec sample_gmm_spec(Rng& rng, const GridDims& dims, IntRange k_range, RealRange var_range) {
  if (k_range.lo < 1 || k_range.hi < k_range.lo) throw std::invalid_argument("invalid component count range");
  if (!(var_range.lo > 0.0) || var_range.hi < var_range.lo) throw std::invalid_argument("invalid variance range");
  const int k = std::uniform_int_distribution<int>(k_range.lo, k_range.hi)(rng);
  const double w_m = dims.width * dims.cell_size;
  const double h_m = dims.height * dims.cell_size;
  GmmSpec spec;
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    GmmComponent c;
    c.mean = {uniform01(rng) * w_m, uniform01(rng) * h_m};
    c.var = {var_range.lo + (var_range.hi - var_range.lo) * uniform01(rng),
             var_range.lo + (var_range.hi - var_range.lo) * uniform01(rng)};
    // Dirichlet(1) via normalized unit exponentials.
    c.weight = std::exponential_distribution<double>(1.0)(rng);
    total += c.weight;
    spec.components.push_back(c);
  }
  for (auto& c : spec.components) c.weight /= total;
  return spec;
}

/// Mixture density at every cell centre, row-major.
inline std::vector<double> gmm_density(const GmmSpec& spec, const GridDims& dims) {
  std::vector<double> out(dims.cell_count(), 0.0);
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      const double px = (x + 0.5) * dims.cell_size;
      const double py = (y + 0.5) * dims.cell_size;
      double d = 0.0;
      for (const auto& c : spec.components) {
        const double ex = (px - c.mean.x) * (px - c.mean.x) / c.var.x;
        const double ey = (py - c.mean.y) * (py - c.mean.y) / c.var.y;
        d += c.weight * std::exp(-0.5 * (ex + ey)) / (2.0 * std::numbers::pi * std::sqrt(c.var.x * c.var.y));
      }
      out[dims.index({x, y})] = d;
    }
  }
  return out;
}

struct ProbabilityRange {
  double lo = 0.05;
  double hi = 0.8;
  void validate() const {
    if (!(lo > 0.0 && lo < hi && hi < 1.0)) throw std::invalid_argument("need 0 < p_lo < p_hi < 1");
  }
};

/// Affine rescale of the density so that min -> lo and max -> hi.
inline std::vector<double> rescale_field(std::vector<double> density, ProbabilityRange range) {
  range.validate();
  const auto [mn_it, mx_it] = std::minmax_element(density.begin(), density.end());
  const double mn = *mn_it, mx = *mx_it;
  if (!(mx > mn)) {
    std::fill(density.begin(), density.end(), 0.5 * (range.lo + range.hi));
    return density;
  }
  for (auto& v : density) v = std::clamp(range.lo + (v - mn) / (mx - mn) * (range.hi - range.lo), range.lo, range.hi);
  return density;
}

inline std::vector<double> rasterize(const GmmSpec& spec, const GridDims& dims, ProbabilityRange range) {
  return rescale_field(gmm_density(spec, dims), range);
}

inline Cell position_to_cell(Vec2 p, const GridDims& dims) {
  const int x = static_cast<int>(std::floor(p.x / dims.cell_size));
  const int y = static_cast<int>(std::floor(p.y / dims.cell_size));
  return {std::clamp(x, 0, dims.width - 1), std::clamp(y, 0, dims.height - 1)};
}

inline constexpr int kTargetRedrawAttempts = 100;

/// Component-then-Gaussian draws, clipped to the map. Duplicate cells are
/// redrawn up to 100 times before being accepted, so the world holds 1..n targets.
inline WorldMap sample_targets(const GmmSpec& spec, int n, const GridDims& dims, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_targets: n must be >= 1");
  spec.validate();
  std::vector<double> weights;
  for (const auto& c : spec.components) weights.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  WorldMap world(dims);
  auto draw = [&] {
    const auto& c = spec.components[pick(rng)];
    const double px = c.mean.x + std::sqrt(c.var.x) * standard_normal(rng);
    const double py = c.mean.y + std::sqrt(c.var.y) * standard_normal(rng);
    return position_to_cell({px, py}, dims);
  };
  for (int i = 0; i < n; ++i) {
    Cell cell = draw();
    for (int attempt = 0; attempt < kTargetRedrawAttempts && world.occupied(cell); ++attempt) cell = draw();
    world.set_occupied(cell);
  }
  return world;
}

struct ShiftCenters {
  double delta = 0.0;  // metres
};
struct MixNoise {
  double weight = 0.0;
  GmmSpec noise;
};
struct CellNoise {
  double sigma = 0.0;
};
using Perturbation = std::variant<ShiftCenters, MixNoise, CellNoise>;

/// Applies perturbations left to right. ShiftCenters re-rasterizes the shifted
/// mixture (replacing the running field); MixNoise blends in a rasterized noise
/// mixture; CellNoise adds clamped per-cell Gaussian noise.
inline std::vector<double> perturb(const GmmSpec& spec, std::vector<double> field,
                                   std::span<const Perturbation> perturbations, const GridDims& dims,
                                   ProbabilityRange range, Rng& rng) {
  if (field.size() != dims.cell_count()) throw std::invalid_argument("perturb: field size mismatch");
  GmmSpec current = spec;
  for (const auto& p : perturbations) {
    if (const auto* s = std::get_if<ShiftCenters>(&p)) {
      for (auto& c : current.components) {
        const double theta = 2.0 * std::numbers::pi * uniform01(rng);
        c.mean = c.mean + Vec2{s->delta * std::cos(theta), s->delta * std::sin(theta)};
      }
      field = rasterize(current, dims, range);
    } else if (const auto* m = std::get_if<MixNoise>(&p)) {
      if (!(m->weight >= 0.0 && m->weight <= 1.0)) throw std::invalid_argument("MixNoise weight outside [0,1]");
      const auto noise = rasterize(m->noise, dims, range);
      for (std::size_t i = 0; i < field.size(); ++i) {
        field[i] = m->weight == 1.0 ? noise[i] : (1.0 - m->weight) * field[i] + m->weight * noise[i];
      }
    } else if (const auto* c = std::get_if<CellNoise>(&p)) {
      if (!(c->sigma >= 0.0)) throw std::invalid_argument("CellNoise sigma must be >= 0");
      if (c->sigma == 0.0) continue;
      for (auto& v : field) v = std::clamp(v + c->sigma * standard_normal(rng), range.lo, range.hi);
    }
  }
  return field;
}

struct ScenarioConfig {
  GridDims dims{64, 64, 1.0};
  IntRange components{2, 5};
  RealRange variance{16.0, 100.0};
  IntRange targets{5, 10};
  ProbabilityRange range{0.05, 0.8};
  double shift_delta = 0.0;  // m; 0 disables
  double mix_weight = 0.0;   // 0 disables
  IntRange noise_components{1, 3};
  double cell_sigma = 0.0;   // 0 disables
};

struct Scenario {
  std::uint64_t seed = 0;
  GmmSpec truth;
  std::vector<Perturbation> perturbations;
  WorldMap world{GridDims{}};
  std::vector<double> truth_field;
  std::vector<double> prior;
  double kl = 0.0;
};

/// Perturbations implied by the config; zero-magnitude ones are omitted.
inline std::vector<Perturbation> sample_perturbations(const ScenarioConfig& cfg, Rng& rng) {
  std::vector<Perturbation> out;
  if (cfg.shift_delta > 0.0) out.emplace_back(ShiftCenters{cfg.shift_delta});
  if (cfg.mix_weight > 0.0) {
    out.emplace_back(MixNoise{cfg.mix_weight, sample_gmm_spec(rng, cfg.dims, cfg.noise_components, cfg.variance)});
  }
  if (cfg.cell_sigma > 0.0) out.emplace_back(CellNoise{cfg.cell_sigma});
  return out;
}

/// sample -> rasterize -> perturb -> KL(truth || prior). Fully determined by seed.
inline Scenario make_scenario(std::uint64_t seed, const ScenarioConfig& cfg) {
  cfg.dims.validate();
  Rng rng(seed);
  Scenario s;
  s.seed = seed;
  s.truth = sample_gmm_spec(rng, cfg.dims, cfg.components, cfg.variance);
  const int n = std::uniform_int_distribution<int>(cfg.targets.lo, cfg.targets.hi)(rng);
  s.world = sample_targets(s.truth, n, cfg.dims, rng);
  s.truth_field = rasterize(s.truth, cfg.dims, cfg.range);
  s.perturbations = sample_perturbations(cfg, rng);
  s.prior = perturb(s.truth, s.truth_field, s.perturbations, cfg.dims, cfg.range, rng);
  s.kl = kl_divergence(s.truth_field, s.prior);
  return s;
}

}  // namespace ipp
