// Copyright 2026 The truncsm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TRUNCSM_BASELINES_HPP
#define TRUNCSM_BASELINES_HPP

// Reference estimators: maximum likelihood with a Monte Carlo normalizer
// (RJ-MLE), maximum likelihood that ignores the truncation, and plain score
// matching (the constant weight, available through WeightSpec::unit()).

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "common.hpp"
#include "data.hpp"
#include "estimator.hpp"
#include "geometry.hpp"
#include "models.hpp"
#include "optimize.hpp"

namespace truncsm {

/// Fixed uniform particles on the domain's bounding box. Only the particles
/// inside the domain are stored; the total count enters the estimate.
struct NormalizerEstimate {
  Matrix inside;  // in-domain particles, one per row
  std::size_t total = 0;
  double box_volume = 0.0;
};

inline NormalizerEstimate make_normalizer(const Domain& domain,
                                          std::size_t n_particles,
                                          std::uint64_t seed) {
  require(n_particles >= 1, "normalizer: need at least one particle");
  const Box box = bounding_box(domain);
  const auto sample = uniform_in_box(box);
  Rng rng(seed);
  std::vector<Vector> kept;
  for (std::size_t i = 0; i < n_particles; ++i) {
    Vector u = sample(rng);
    if (contains(domain, u)) kept.push_back(std::move(u));
  }
  NormalizerEstimate est;
  est.total = n_particles;
  est.box_volume = box_volume(box);
  est.inside.resize(static_cast<Eigen::Index>(kept.size()), domain.dim());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    est.inside.row(static_cast<Eigen::Index>(i)) = kept[i].transpose();
  }
  return est;
}

namespace detail {

inline double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace detail

/// log Z_hat = log( volume * (1/N) sum_i 1[u_i in V] pbar(u_i) ) for any
/// callable returning log pbar at the rows of a matrix.
template <class LogDensityBatch>
double estimate_log_z(LogDensityBatch&& log_pbar, const NormalizerEstimate& est) {
  require(est.total >= 1, "estimate_log_z: no particles");
  require(est.inside.rows() > 0,
          "estimate_log_z: all particles fall outside the domain");
  const Vector lp = log_pbar(est.inside);
  return std::log(est.box_volume) - std::log(static_cast<double>(est.total)) +
         detail::log_sum_exp(lp);
}

inline double estimate_log_z(const ModelFamily& family, const VectorRef& theta,
                             const NormalizerEstimate& est) {
  return estimate_log_z(
      [&](const Matrix& p) { return log_density_batch(family, theta, p); }, est);
}

/// Z_hat on the natural scale with its Monte Carlo standard error.
template <class LogDensityBatch>
McEstimate estimate_z(LogDensityBatch&& log_pbar, const NormalizerEstimate& est) {
  require(est.inside.rows() > 0,
          "estimate_z: all particles fall outside the domain");
  const Vector lp = log_pbar(est.inside);
  const double n = static_cast<double>(est.total);
  const Vector v = lp.array().exp();
  const double sum = v.sum();
  const double mean = sum / n;
  // Variance over all N particles, outside ones contributing zero.
  const double sq = v.squaredNorm() / n;
  McEstimate out;
  out.value = est.box_volume * mean;
  out.std_error = est.box_volume * std::sqrt(std::max(0.0, sq - mean * mean) / n);
  return out;
}

/// RJ-MLE: maximizes (1/n) sum_i log pbar(x_i) - log Z_hat(theta) with the
/// particles held fixed, so the surrogate is smooth in theta.
inline FitReport fit_rjmle(const ModelFamily& family, const Dataset& data,
                           const NormalizerEstimate& est,
                           const FitOptions& opts = {}) {
  require(data.size() > 0, "fit_rjmle: empty dataset");
  require(data.dim() == family.dim(), "fit_rjmle: dimension mismatch");
  require(est.inside.rows() > 0,
          "fit_rjmle: all particles fall outside the domain");
  long evals = 0;
  const double n = static_cast<double>(data.size());
  const Vector data_weight = Vector::Constant(data.size(), 1.0 / n);
  auto fg = [&](const Vector& theta, Vector& grad) {
    Matrix resp;
    const Vector lp_data = log_density_batch(family, theta, data.points, &resp);
    grad = -weighted_grad_theta(family, theta, data.points, resp, data_weight);
    Matrix resp_p;
    const Vector lp = log_density_batch(family, theta, est.inside, &resp_p);
    ++evals;
    const double lse = detail::log_sum_exp(lp);
    const Vector soft = (lp.array() - lse).exp();
    grad += weighted_grad_theta(family, theta, est.inside, resp_p, soft);
    const double log_z = std::log(est.box_volume) -
                         std::log(static_cast<double>(est.total)) + lse;
    return -lp_data.mean() + log_z;
  };
  FitReport report =
      run_restarts(fg, initial_points(family, data, opts),
                   scaled_optimizer(family, opts.optimizer));
  report.normalizer_evals = evals;
  return report;
}

inline FitReport fit_rjmle(const ModelFamily& family, const Dataset& data,
                           const Domain& domain, std::size_t n_particles,
                           std::uint64_t particle_seed,
                           const FitOptions& opts = {}) {
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    require(contains(domain, data.points.row(i).transpose()),
            "fit_rjmle: point " + std::to_string(i) + " outside domain");
  }
  return fit_rjmle(family, data, make_normalizer(domain, n_particles, particle_seed),
                   opts);
}

/// Maximum likelihood ignoring the truncation: the sample mean for a
/// Gaussian, EM with fixed variance and equal weights for a mixture. The
/// reported objective is the negative mean log-likelihood and the trace
/// records it per EM iteration.
inline FitReport fit_mle_untruncated(const ModelFamily& family, const Dataset& data,
                                     const FitOptions& opts = {},
                                     double loglik_tol = 1e-8,
                                     int max_em_iters = 10000) {
  require(data.size() > 0, "fit_mle_untruncated: empty dataset");
  require(data.dim() == family.dim(), "fit_mle_untruncated: dimension mismatch");
  FitReport report;
  if (!family.is_mixture()) {
    report.theta_hat = data.mean();
    report.objective =
        -log_density_batch(family, report.theta_hat, data.points).mean();
    report.objective_trace.push_back({0, report.objective, 0.0});
    report.status = FitStatus::Converged;
    report.restarts.push_back(report.objective);
    report.restart_thetas.push_back(report.theta_hat);
    report.restart_status.push_back(FitStatus::Converged);
    return report;
  }
  const int d = family.dim();
  const int kc = family.components();
  bool have_best = false;
  for (const Vector& start : initial_points(family, data, opts)) {
    Vector theta = start;
    std::vector<TraceEntry> trace;
    Matrix resp;
    double ll = log_density_batch(family, theta, data.points, &resp).mean();
    trace.push_back({0, -ll, 0.0});
    FitStatus status = FitStatus::MaxIterations;
    int it = 1;
    for (; it <= max_em_iters; ++it) {
      for (int j = 0; j < kc; ++j) {
        const double mass = resp.col(j).sum();
        if (mass > 0.0) {
          theta.segment(j * d, d) = data.points.transpose() * resp.col(j) / mass;
        }
      }
      const double ll_new =
          log_density_batch(family, theta, data.points, &resp).mean();
      trace.push_back({it, -ll_new, 0.0});
      const double change = ll_new - ll;
      ll = ll_new;
      if (std::abs(change) <= loglik_tol) {
        status = FitStatus::Converged;
        break;
      }
    }
    report.restarts.push_back(-ll);
    report.restart_thetas.push_back(theta);
    report.restart_status.push_back(status);
    if (!have_best || -ll < report.objective) {
      have_best = true;
      report.theta_hat = theta;
      report.objective = -ll;
      report.objective_trace = std::move(trace);
      report.status = status;
      report.iterations = std::min(it, max_em_iters);
    }
  }
  return report;
}

}  // namespace truncsm

#endif  // TRUNCSM_BASELINES_HPP
