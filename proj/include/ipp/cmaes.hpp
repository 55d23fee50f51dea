#pragma once

// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation, rank-one and
// rank-mu covariance updates. Default strategy parameters follow Hansen's
// canonical parameterization.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "ipp/rng.hpp"

namespace ipp {

struct CmaesOptions {
  int dimension = 1;
  int population = 0;  // 0 selects 4 + floor(3 ln d)
  double sigma0 = 1.0;
  long max_evals = 1000;
  std::uint64_t seed = 0;
  std::vector<double> x0;  // empty = origin
  double min_sigma = 1e-12;
  // Stop once the best value per generation, over the last 10 + 30n/lambda
  // generations, and the current generation both span less than this.
  double tol_fun = 1e-12;
  double max_condition = 1e14;  // of C
};

struct CmaesResult {
  std::vector<double> best_x;
  double best_f = std::numeric_limits<double>::infinity();
  long evaluations = 0;
  int generations = 0;
};

using Objective = std::function<double(const std::vector<double>&)>;
/// Called once per generation with the updated mean and step size.
using CmaesObserver = std::function<void(const Eigen::VectorXd& mean, double sigma)>;

inline int default_population(int dimension) {
  return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(dimension))));
}

inline CmaesResult cma_es_minimize(const Objective& f, const CmaesOptions& opts, const CmaesObserver& observer = {}) {
  const int n = opts.dimension;
  if (n < 1) throw std::invalid_argument("cma_es: dimension must be >= 1");
  if (!(opts.sigma0 > 0.0)) throw std::invalid_argument("cma_es: sigma0 must be positive");
  const int lambda = opts.population > 0 ? opts.population : default_population(n);
  if (lambda < 4) throw std::invalid_argument("cma_es: population must be >= 4");
  if (!opts.x0.empty() && static_cast<int>(opts.x0.size()) != n) throw std::invalid_argument("cma_es: x0 size mismatch");

  const int mu = lambda / 2;
  Eigen::VectorXd w(mu);
  for (int i = 0; i < mu; ++i) w[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  w /= w.sum();
  const double mu_eff = 1.0 / w.squaredNorm();
  const double dn = n;
  const double c_sigma = (mu_eff + 2.0) / (dn + mu_eff + 5.0);
  const double d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (dn + 1.0)) - 1.0) + c_sigma;
  const double c_c = (4.0 + mu_eff / dn) / (dn + 4.0 + 2.0 * mu_eff / dn);
  const double c_1 = 2.0 / ((dn + 1.3) * (dn + 1.3) + mu_eff);
  const double c_mu = std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((dn + 2.0) * (dn + 2.0) + mu_eff));
  const double chi_n = std::sqrt(dn) * (1.0 - 1.0 / (4.0 * dn) + 1.0 / (21.0 * dn * dn));

  Eigen::VectorXd mean = opts.x0.empty() ? Eigen::VectorXd::Zero(n)
                                         : Eigen::Map<const Eigen::VectorXd>(opts.x0.data(), n).eval();
  double sigma = opts.sigma0;
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd D = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd p_sigma = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd p_c = Eigen::VectorXd::Zero(n);

  Rng rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  CmaesResult result;
  Eigen::MatrixXd Y(n, lambda);
  Eigen::MatrixXd X(n, lambda);
  std::vector<double> fit(lambda);
  std::vector<int> order(lambda);
  std::vector<double> xs(n);
  long last_eigen_eval = 0;
  const std::size_t history_len = 10 + static_cast<std::size_t>(std::ceil(30.0 * dn / lambda));
  std::vector<double> best_history;

  while (result.evaluations + lambda <= opts.max_evals && sigma >= opts.min_sigma) {
    for (int k = 0; k < lambda; ++k) {
      Eigen::VectorXd z(n);
      for (int i = 0; i < n; ++i) z[i] = normal(rng);
      Y.col(k) = B * D.asDiagonal() * z;
      X.col(k) = mean + sigma * Y.col(k);
      for (int i = 0; i < n; ++i) xs[i] = X(i, k);
      const double v = f(xs);
      ++result.evaluations;
      if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "cma_es: objective returned " << v << " at evaluation " << result.evaluations << ", x = [";
        for (int i = 0; i < n; ++i) msg << (i ? ", " : "") << xs[i];
        msg << "]";
        throw std::runtime_error(msg.str());
      }
      fit[k] = v;
      if (v < result.best_f) {
        result.best_f = v;
        result.best_x = xs;
      }
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fit[a] < fit[b]; });

    Eigen::VectorXd y_w = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < mu; ++i) y_w += w[i] * Y.col(order[i]);
    mean += sigma * y_w;

    // C^{-1/2} y_w = B D^{-1} B^T y_w
    const Eigen::VectorXd c_inv_sqrt_yw = B * (B.transpose() * y_w).cwiseQuotient(D);
    p_sigma = (1.0 - c_sigma) * p_sigma + std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * c_inv_sqrt_yw;
    ++result.generations;
    const double ps_norm = p_sigma.norm();
    const double h_denom = std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * result.generations));
    const double h_sigma = (ps_norm / h_denom < (1.4 + 2.0 / (dn + 1.0)) * chi_n) ? 1.0 : 0.0;
    p_c = (1.0 - c_c) * p_c + h_sigma * std::sqrt(c_c * (2.0 - c_c) * mu_eff) * y_w;

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) rank_mu += w[i] * Y.col(order[i]) * Y.col(order[i]).transpose();
    C = (1.0 - c_1 - c_mu) * C + c_1 * (p_c * p_c.transpose() + (1.0 - h_sigma) * c_c * (2.0 - c_c) * C) +
        c_mu * rank_mu;
    C = 0.5 * (C + C.transpose()).eval();

    sigma *= std::exp((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0));

    // Lazy decomposition: O(n^2) amortized per generation.
    if (result.evaluations - last_eigen_eval > lambda / (c_1 + c_mu) / dn / 10.0) {
      last_eigen_eval = result.evaluations;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
      B = eig.eigenvectors();
      D = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt();
    }
    if (observer) observer(mean, sigma);

    best_history.push_back(fit[order.front()]);
    if (best_history.size() >= history_len) {
      const auto [lo, hi] = std::minmax_element(best_history.end() - history_len, best_history.end());
      if (*hi - *lo < opts.tol_fun && fit[order.back()] - fit[order.front()] < opts.tol_fun) break;
    }
    const double d_max = D.maxCoeff(), d_min = D.minCoeff();
    if (d_max * d_max > opts.max_condition * d_min * d_min) break;
    if (!mean.allFinite() || !std::isfinite(sigma)) break;
  }
  return result;
}

}  // namespace ipp
