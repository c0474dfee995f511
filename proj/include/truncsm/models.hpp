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

#ifndef TRUNCSM_MODELS_HPP
#define TRUNCSM_MODELS_HPP

// Unnormalized density models with the input-space derivatives used by the
// truncated score-matching objective.
//
// GaussianMean:  log p(x) = -|x - theta|^2 / 2                 (r = d)
// IsotropicGMM:  log p(x) = log (1/K) sum_j exp(-|x - theta_j|^2 / 2 s2)
//                theta = (theta_1, ..., theta_K) flattened     (r = K d)
//
// Neither log density carries its normalizing constant; both are <= 0
// everywhere, which the rejection samplers rely on.

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>

#include "common.hpp"

namespace truncsm {

struct GaussianMean {
  int d = 1;
};

struct IsotropicGMM {
  int d = 1;
  int components = 1;
  double variance = 1.0;
};

class ModelFamily {
 public:
  static ModelFamily gaussian_mean(int d) {
    require(d >= 1, "gaussian_mean: d must be positive");
    return ModelFamily(GaussianMean{d});
  }
  static ModelFamily isotropic_gmm(int d, int components, double variance) {
    require(d >= 1, "isotropic_gmm: d must be positive");
    require(components >= 1, "isotropic_gmm: need at least one component");
    require(std::isfinite(variance) && variance > 0.0,
            "isotropic_gmm: variance must be positive");
    return ModelFamily(IsotropicGMM{d, components, variance});
  }

  int dim() const {
    return std::visit([](const auto& m) { return m.d; }, family_);
  }
  int num_params() const {
    if (const auto* g = as<IsotropicGMM>()) return g->components * g->d;
    return dim();
  }
  int components() const {
    if (const auto* g = as<IsotropicGMM>()) return g->components;
    return 1;
  }
  bool is_mixture() const { return as<IsotropicGMM>() != nullptr; }

  /// Natural length in parameter space: the component standard deviation.
  double length_scale() const {
    if (const auto* g = as<IsotropicGMM>()) return std::sqrt(g->variance);
    return 1.0;
  }

  template <class T>
  const T* as() const {
    return std::get_if<T>(&family_);
  }

  std::string describe() const {
    if (const auto* g = as<IsotropicGMM>()) {
      return "gmm(d=" + std::to_string(g->d) +
             ",K=" + std::to_string(g->components) + ")";
    }
    return "gaussian_mean(d=" + std::to_string(dim()) + ")";
  }

 private:
  explicit ModelFamily(std::variant<GaussianMean, IsotropicGMM> f)
      : family_(f) {}

  std::variant<GaussianMean, IsotropicGMM> family_;
};

/// Input-space derivatives of log p at one point.
///   dl(k)          = d_k log p
///   d2l(k)         = d_k^2 log p
///   grad_dl(j, k)  = d/d theta_j of dl(k)       (r x d)
///   grad_d2l(j, k) = d/d theta_j of d2l(k)      (r x d)
struct ScoreEval {
  Vector dl;
  Vector d2l;
  Matrix grad_dl;
  Matrix grad_d2l;
};

namespace detail {

inline void check_model_args(const ModelFamily& family, const VectorRef& theta,
                             const VectorRef& x) {
  require(theta.size() == family.num_params(),
          "model: parameter length mismatch");
  require(x.size() == family.dim(), "model: point dimension mismatch");
}

// Responsibilities w_j(x) with the log-sum-exp shift; also returns the log of
// the (1/K-weighted) mixture sum.
inline double responsibilities(const IsotropicGMM& g, const VectorRef& theta,
                               const VectorRef& x, Vector& w) {
  const int kc = g.components;
  const int d = g.d;
  w.resize(kc);
  for (int j = 0; j < kc; ++j) {
    w(j) = -(x - theta.segment(j * d, d)).squaredNorm() / (2.0 * g.variance);
  }
  const double shift = w.maxCoeff();
  w = (w.array() - shift).exp();
  const double total = w.sum();
  w /= total;
  return shift + std::log(total) - std::log(static_cast<double>(kc));
}

}  // namespace detail

/// Unnormalized log density.
inline double log_density(const ModelFamily& family, const VectorRef& theta,
                          const VectorRef& x) {
  detail::check_model_args(family, theta, x);
  if (const auto* g = family.as<IsotropicGMM>()) {
    Vector w;
    return detail::responsibilities(*g, theta, x, w);
  }
  return -0.5 * (x - theta).squaredNorm();
}

/// Log density together with its gradient in theta.
inline double log_density_grad_theta(const ModelFamily& family,
                                     const VectorRef& theta, const VectorRef& x,
                                     Vector& grad) {
  detail::check_model_args(family, theta, x);
  if (const auto* g = family.as<IsotropicGMM>()) {
    Vector w;
    const double value = detail::responsibilities(*g, theta, x, w);
    grad.resize(theta.size());
    for (int j = 0; j < g->components; ++j) {
      grad.segment(j * g->d, g->d) =
          w(j) * (x - theta.segment(j * g->d, g->d)) / g->variance;
    }
    return value;
  }
  grad = x - theta;
  return -0.5 * (x - theta).squaredNorm();
}

/// Log density at every row of `points` (n x d). When `resp` is given it
/// receives the n x K responsibilities (a column of ones for a single
/// Gaussian).
inline Vector log_density_batch(const ModelFamily& family, const VectorRef& theta,
                                const Matrix& points, Matrix* resp = nullptr) {
  require(theta.size() == family.num_params(),
          "model: parameter length mismatch");
  require(points.cols() == family.dim(), "model: point dimension mismatch");
  const int d = family.dim();
  const auto n = points.rows();
  if (const auto* g = family.as<IsotropicGMM>()) {
    const int kc = g->components;
    Matrix e(n, kc);
    for (int j = 0; j < kc; ++j) {
      const Eigen::RowVectorXd c = theta.segment(j * d, d).transpose();
      e.col(j) = -(points.rowwise() - c).rowwise().squaredNorm() /
                 (2.0 * g->variance);
    }
    const Vector shift = e.rowwise().maxCoeff();
    e.colwise() -= shift;
    e = e.array().exp();
    const Vector total = e.rowwise().sum();
    if (resp) *resp = e.array().colwise() / total.array();
    return shift.array() + total.array().log() -
           std::log(static_cast<double>(kc));
  }
  if (resp) *resp = Matrix::Ones(n, 1);
  const Eigen::RowVectorXd c = theta.transpose();
  return -0.5 * (points.rowwise() - c).rowwise().squaredNorm();
}

/// Sum over rows of weight_i * grad_theta log p(points_i), given the
/// responsibilities from log_density_batch.
inline Vector weighted_grad_theta(const ModelFamily& family, const VectorRef& theta,
                                  const Matrix& points, const Matrix& resp,
                                  const Vector& weight) {
  const int d = family.dim();
  const int kc = family.components();
  double inv_var = 1.0;
  if (const auto* g = family.as<IsotropicGMM>()) inv_var = 1.0 / g->variance;
  Vector grad(theta.size());
  for (int j = 0; j < kc; ++j) {
    const Vector wj = resp.col(j).cwiseProduct(weight);
    // sum_i wj_i (x_i - theta_j) / s2
    grad.segment(j * d, d) =
        (points.transpose() * wj - wj.sum() * theta.segment(j * d, d)) * inv_var;
  }
  return grad;
}

/// Scores, second derivatives and their parameter gradients at x.
///
/// For the mixture, with component scores s_jk = (theta_jk - x_k) / s2 and
/// responsibilities w_j:
///   dl_k   = sum_j w_j s_jk
///   d2l_k  = sum_j w_j s_jk^2 - dl_k^2 - 1/s2
///   d dl_k  / d theta_jm = w_j [delta_km / s2 - s_jm (s_jk - dl_k)]
///   d d2l_k / d theta_jm = -w_j s_jm (s_jk^2 - S2_k) + 2 w_j s_jk delta_km / s2
///                          - 2 dl_k d dl_k / d theta_jm
/// where S2_k = sum_j w_j s_jk^2.
inline ScoreEval score_eval(const ModelFamily& family, const VectorRef& theta,
                            const VectorRef& x) {
  detail::check_model_args(family, theta, x);
  const int d = family.dim();
  const int r = family.num_params();
  ScoreEval s;
  s.grad_dl = Matrix::Zero(r, d);
  s.grad_d2l = Matrix::Zero(r, d);
  if (const auto* g = family.as<IsotropicGMM>()) {
    const int kc = g->components;
    const double inv_var = 1.0 / g->variance;
    Vector w;
    detail::responsibilities(*g, theta, x, w);
    Matrix comp(kc, d);  // s_jk
    for (int j = 0; j < kc; ++j) {
      comp.row(j) = ((theta.segment(j * d, d) - x) * inv_var).transpose();
    }
    s.dl = comp.transpose() * w;
    const Vector s2 = comp.array().square().matrix().transpose() * w;
    s.d2l = s2.array() - s.dl.array().square() - inv_var;
    for (int j = 0; j < kc; ++j) {
      for (int m = 0; m < d; ++m) {
        const int row = j * d + m;
        const double sjm = comp(j, m);
        for (int k = 0; k < d; ++k) {
          const double delta = (k == m) ? inv_var : 0.0;
          const double gdl = w(j) * (delta - sjm * (comp(j, k) - s.dl(k)));
          s.grad_dl(row, k) = gdl;
          s.grad_d2l(row, k) =
              -w(j) * sjm * (comp(j, k) * comp(j, k) - s2(k)) +
              2.0 * w(j) * comp(j, k) * delta - 2.0 * s.dl(k) * gdl;
        }
      }
    }
    return s;
  }
  s.dl = theta - x;
  s.d2l = Vector::Constant(d, -1.0);
  s.grad_dl.setIdentity();
  return s;
}

/// Mixture responsibilities at x (sum to one). A single-component family
/// returns {1}.
inline Vector responsibilities(const ModelFamily& family, const VectorRef& theta,
                               const VectorRef& x) {
  detail::check_model_args(family, theta, x);
  Vector w = Vector::Ones(1);
  if (const auto* g = family.as<IsotropicGMM>()) {
    detail::responsibilities(*g, theta, x, w);
  }
  return w;
}

/// Worst scaled error between the analytic derivatives and central finite
/// differences with step h: dl against differences of log p, d2l against
/// differences of dl, and both theta-gradients against differences in
/// theta. Each entry contributes |analytic - numeric| / max(1, |analytic|).
inline double fd_check(const ModelFamily& family, const VectorRef& theta,
                       const VectorRef& x, double h) {
  require(h > 0.0, "fd_check: step must be positive");
  const int d = family.dim();
  const int r = family.num_params();
  const ScoreEval s = score_eval(family, theta, x);
  double worst = 0.0;
  auto record = [&](double analytic, double numeric) {
    worst = std::max(worst, std::abs(analytic - numeric) /
                                std::max(1.0, std::abs(analytic)));
  };
  for (int k = 0; k < d; ++k) {
    Vector xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    record(s.dl(k), (log_density(family, theta, xp) -
                     log_density(family, theta, xm)) / (2.0 * h));
    record(s.d2l(k), (score_eval(family, theta, xp).dl(k) -
                      score_eval(family, theta, xm).dl(k)) / (2.0 * h));
  }
  for (int j = 0; j < r; ++j) {
    Vector tp = theta, tm = theta;
    tp(j) += h;
    tm(j) -= h;
    const ScoreEval sp = score_eval(family, tp, x);
    const ScoreEval sm = score_eval(family, tm, x);
    for (int k = 0; k < d; ++k) {
      record(s.grad_dl(j, k), (sp.dl(k) - sm.dl(k)) / (2.0 * h));
      record(s.grad_d2l(j, k), (sp.d2l(k) - sm.d2l(k)) / (2.0 * h));
    }
  }
  return worst;
}

}  // namespace truncsm

#endif  // TRUNCSM_MODELS_HPP
