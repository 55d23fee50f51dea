#pragma once

// Summary statistics for episode metrics: mean, sample std, type-7 quantiles, box stats.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "ipp/episode.hpp"

namespace ipp {

inline double mean_of(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean of empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Sample standard deviation (n-1); 0 for a single value.
inline double sample_std(std::span<const double> v) {
  if (v.size() < 2) return v.empty() ? throw std::invalid_argument("std of empty sample") : 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/// Linear interpolation between order statistics (Hyndman-Fan type 7).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level outside [0,1]");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct BoxStats {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
  std::size_t n = 0;
};

inline BoxStats box_stats(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("box stats of empty sample");
  std::vector<double> s(v.begin(), v.end());
  BoxStats b;
  b.n = s.size();
  b.min = *std::min_element(s.begin(), s.end());
  b.max = *std::max_element(s.begin(), s.end());
  b.q1 = quantile(s, 0.25);
  b.median = quantile(s, 0.5);
  b.q3 = quantile(s, 0.75);
  b.mean = mean_of(s);
  return b;
}

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;
};

/// Table columns: coverage, entropy reduction, search efficiency (all percent).
struct MetricTable {
  MetricSummary coverage;
  MetricSummary entropy_reduction;
  MetricSummary search_eff;
  std::size_t episodes = 0;
};

inline MetricTable summarize(std::span<const EpisodeMetrics> eps) {
  if (eps.empty()) throw std::invalid_argument("summarize: no episodes");
  std::vector<double> c, e, s;
  for (const auto& m : eps) {
    c.push_back(m.coverage_pct);
    e.push_back(m.entropy_reduction_pct);
    s.push_back(m.search_eff_pct);
  }
  MetricTable t;
  t.coverage = {mean_of(c), sample_std(c)};
  t.entropy_reduction = {mean_of(e), sample_std(e)};
  t.search_eff = {mean_of(s), sample_std(s)};
  t.episodes = eps.size();
  return t;
}

}  // namespace ipp
