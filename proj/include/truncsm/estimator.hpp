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

#ifndef TRUNCSM_ESTIMATOR_HPP
#define TRUNCSM_ESTIMATOR_HPP

// Truncated score matching.
//
// The empirical objective is
//
//   M_n(theta) = (1/n) sum_i sum_k [ A_k(x_i) g_k(x_i) + B_k(x_i) d_k g_k(x_i) ]
//   A_k = (d_k l)^2 + 2 d_k^2 l,   B_k = 2 d_k l,
//
// with l = log p_theta. It needs the weights only through a WeightTable
// computed once per dataset; the normalizing constant never appears.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "common.hpp"
#include "data.hpp"
#include "geometry.hpp"
#include "models.hpp"
#include "optimize.hpp"

namespace truncsm {

namespace detail {

inline void check_table(const ModelFamily& family, const Dataset& data,
                        const WeightTable& w) {
  require(data.dim() == family.dim(), "objective: dataset dimension mismatch");
  require(w.g.rows() == data.size() && w.g.cols() == data.dim() &&
              w.dg.rows() == data.size() && w.dg.cols() == data.dim(),
          "objective: weight table does not match dataset shape");
}

// Sequential accumulation in sample order keeps repeated calls bit-identical.
inline double objective_impl(const ModelFamily& family, const VectorRef& theta,
                             const Dataset& data, const WeightTable& w,
                             Vector* grad) {
  check_table(family, data, w);
  require(data.size() > 0, "objective: empty dataset");
  require(theta.size() == family.num_params(),
          "objective: parameter length mismatch");
  const int d = data.dim();
  double total = 0.0;
  if (grad) grad->setZero(theta.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const Vector x = data.points.row(i).transpose();
    const ScoreEval s = score_eval(family, theta, x);
    for (int k = 0; k < d; ++k) {
      const double g = w.g(i, k);
      const double dg = w.dg(i, k);
      total += (s.dl(k) * s.dl(k) + 2.0 * s.d2l(k)) * g + 2.0 * s.dl(k) * dg;
      if (grad) {
        *grad += (2.0 * s.dl(k) * g + 2.0 * dg) * s.grad_dl.col(k) +
                 (2.0 * g) * s.grad_d2l.col(k);
      }
    }
  }
  const double n = static_cast<double>(data.size());
  if (grad) *grad /= n;
  return total / n;
}

}  // namespace detail

/// M_n(theta).
inline double objective(const ModelFamily& family, const VectorRef& theta,
                        const Dataset& data, const WeightTable& weights) {
  return detail::objective_impl(family, theta, data, weights, nullptr);
}

/// Analytic gradient of M_n in theta.
inline Vector objective_grad(const ModelFamily& family, const VectorRef& theta,
                             const Dataset& data, const WeightTable& weights) {
  Vector grad;
  detail::objective_impl(family, theta, data, weights, &grad);
  return grad;
}

struct FitOptions {
  OptimizeOptions optimizer;
  /// Independent initializations for mixtures; the lowest final objective
  /// wins. Single-component families always start once from the data mean.
  int restarts = 1;
  std::uint64_t seed = 0;
  /// Initial points are the data mean plus N(0, init_sd^2 I) per component.
  double init_sd = 0.06;
  std::optional<Vector> init;
};

struct FitReport {
  Vector theta_hat;
  double objective = 0.0;
  std::vector<TraceEntry> objective_trace;
  FitStatus status = FitStatus::MaxIterations;
  /// Final objective of every restart, in restart order.
  std::vector<double> restarts;
  std::vector<Vector> restart_thetas;
  std::vector<FitStatus> restart_status;
  int iterations = 0;
  /// distance_batch calls made by this fit.
  int weight_evals = 0;
  /// Normalizing-constant evaluations (RJ-MLE only).
  long normalizer_evals = 0;
};

/// Starting points: explicit init, or the data mean (tiled over mixture
/// components) perturbed by N(0, init_sd^2) for mixtures.
inline std::vector<Vector> initial_points(const ModelFamily& family,
                                          const Dataset& data,
                                          const FitOptions& opts) {
  require(data.size() > 0, "fit: empty dataset");
  if (opts.init) {
    require(opts.init->size() == family.num_params(),
            "fit: init has wrong length");
    return {*opts.init};
  }
  const Vector mean = data.mean();
  const int kc = family.components();
  const int d = family.dim();
  Vector base(family.num_params());
  for (int j = 0; j < kc; ++j) base.segment(j * d, d) = mean;
  if (!family.is_mixture()) return {base};
  require(opts.restarts >= 1, "fit: restarts must be positive");
  Rng rng(opts.seed);
  std::normal_distribution<double> normal(0.0, opts.init_sd);
  std::vector<Vector> starts;
  for (int r = 0; r < opts.restarts; ++r) {
    Vector t = base;
    for (Eigen::Index j = 0; j < t.size(); ++j) t(j) += normal(rng);
    starts.push_back(std::move(t));
  }
  return starts;
}

/// Optimizer settings with the first step measured in the family's own
/// length scale.
inline OptimizeOptions scaled_optimizer(const ModelFamily& family,
                                        const OptimizeOptions& opts) {
  OptimizeOptions o = opts;
  o.initial_step *= family.length_scale();
  return o;
}

/// Runs the optimizer from every start and keeps the lowest objective among
/// runs that did not end in a line-search failure.
template <class Objective>
FitReport run_restarts(Objective&& fg, const std::vector<Vector>& starts,
                       const OptimizeOptions& opts) {
  FitReport report;
  std::optional<OptimizeResult> best;
  for (const auto& start : starts) {
    OptimizeResult res = minimize_lbfgs(fg, start, opts);
    report.restarts.push_back(res.value);
    report.restart_thetas.push_back(res.x);
    report.restart_status.push_back(res.status);
    if (res.status == FitStatus::LineSearchFailure) continue;
    if (!best || res.value < best->value) best = std::move(res);
  }
  require(best.has_value(), "fit: all restarts failed the line search");
  report.theta_hat = best->x;
  report.objective = best->value;
  report.objective_trace = best->trace;
  report.status = best->status;
  report.iterations = best->iterations;
  return report;
}

/// Minimizes M_n for a precomputed weight table.
inline FitReport fit_with_weights(const ModelFamily& family, const Dataset& data,
                                  const WeightTable& weights,
                                  const FitOptions& opts = {}) {
  detail::check_table(family, data, weights);
  auto fg = [&](const Vector& theta, Vector& grad) {
    return detail::objective_impl(family, theta, data, weights, &grad);
  };
  return run_restarts(fg, initial_points(family, data, opts),
                      scaled_optimizer(family, opts.optimizer));
}

/// TruncSM fit: tabulates the weight once, then minimizes M_n.
inline FitReport fit(const ModelFamily& family, const Dataset& data,
                     const Domain& domain, const WeightSpec& weight,
                     const FitOptions& opts = {}) {
  require(data.size() > 0, "fit: empty dataset");
  require(data.dim() == domain.dim() && data.dim() == family.dim(),
          "fit: dimension mismatch");
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    require(contains(domain, data.points.row(i).transpose()),
            "fit: point " + std::to_string(i) + " outside domain");
  }
  const WeightTable weights = distance_batch(domain, weight, data.points);
  FitReport report = fit_with_weights(family, data, weights, opts);
  report.weight_evals = weights.eval_count;
  return report;
}

/// Monte Carlo mean with its standard error.
struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

namespace detail {

inline McEstimate mean_and_se(const Vector& v) {
  McEstimate e;
  const double n = static_cast<double>(v.size());
  e.value = v.mean();
  if (v.size() > 1) {
    const double var = (v.array() - e.value).square().sum() / (n - 1.0);
    e.std_error = std::sqrt(var / n);
  }
  return e;
}

}  // namespace detail

/// Weighted Fisher-Hyvarinen divergence between q and p_theta,
///   sum_k E_q[ g_k (d_k l_theta - d_k log q)^2 ],
/// estimated from samples of q when its score is known.
template <class Score>
McEstimate fh_divergence(const ModelFamily& family, const VectorRef& theta,
                         const Dataset& data, const WeightTable& weights,
                         Score&& true_score) {
  detail::check_table(family, data, weights);
  Vector terms(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const Vector x = data.points.row(i).transpose();
    const Vector dq = true_score(x);
    require(dq.size() == data.dim(), "fh_divergence: score dimension mismatch");
    const Vector diff = score_eval(family, theta, x).dl - dq;
    terms(i) = (weights.g.row(i).transpose().array() * diff.array().square()).sum();
  }
  return detail::mean_and_se(terms);
}

struct IdentityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double std_error = 0.0;
  double zscore = 0.0;
};

/// Integration-by-parts identity behind the tractable objective:
///   E_q[ sum_k g_k d_k l d_k log q ] = -E_q[ sum_k d_k (g_k d_k l) ].
/// The z-score uses the standard error of the per-sample difference.
template <class Score>
IdentityCheck ibp_identity_check(const ModelFamily& family, const VectorRef& theta,
                                 const Dataset& data, const WeightTable& weights,
                                 Score&& true_score) {
  detail::check_table(family, data, weights);
  require(data.size() > 0, "ibp_identity_check: empty dataset");
  const auto n = data.size();
  Vector lhs(n), rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector x = data.points.row(i).transpose();
    const Vector dq = true_score(x);
    require(dq.size() == data.dim(), "ibp_identity_check: score dimension mismatch");
    const ScoreEval s = score_eval(family, theta, x);
    double l = 0.0, r = 0.0;
    for (int k = 0; k < data.dim(); ++k) {
      l += weights.g(i, k) * s.dl(k) * dq(k);
      r -= weights.dg(i, k) * s.dl(k) + weights.g(i, k) * s.d2l(k);
    }
    lhs(i) = l;
    rhs(i) = r;
  }
  IdentityCheck out;
  out.lhs = lhs.mean();
  out.rhs = rhs.mean();
  out.std_error = detail::mean_and_se(lhs - rhs).std_error;
  const double gap = std::abs(out.lhs - out.rhs);
  out.zscore = gap == 0.0 ? 0.0 : gap / out.std_error;
  return out;
}

}  // namespace truncsm

#endif  // TRUNCSM_ESTIMATOR_HPP
