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

#ifndef TRUNCSM_OPTIMIZE_HPP
#define TRUNCSM_OPTIMIZE_HPP

#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "common.hpp"

namespace truncsm {

enum class FitStatus { Converged, MaxIterations, LineSearchFailure };

inline std::string to_string(FitStatus s) {
  switch (s) {
    case FitStatus::Converged:
      return "converged";
    case FitStatus::MaxIterations:
      return "max_iterations";
    case FitStatus::LineSearchFailure:
      return "line_search_failure";
  }
  return "";
}

struct OptimizeOptions {
  double tol = 1e-6;  // on the Euclidean norm of the gradient
  int max_iters = 500;
  int memory = 10;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
  /// Length of the first trial step, taken before any curvature pairs exist.
  double initial_step = 1.0;
};

struct TraceEntry {
  int iteration = 0;
  double value = 0.0;
  double grad_norm = 0.0;
};

struct OptimizeResult {
  Vector x;
  double value = 0.0;
  Vector grad;
  FitStatus status = FitStatus::MaxIterations;
  std::vector<TraceEntry> trace;
  int evaluations = 0;
  int iterations = 0;
};

/// Limited-memory BFGS with Armijo backtracking. `fg(x, grad)` returns the
/// objective and writes its gradient. Entirely deterministic: identical
/// inputs give bit-identical iterates.
///
/// A direction that admits no Armijo step is retried once along the
/// steepest-descent direction with the curvature memory cleared before the
/// run is declared a line-search failure.
template <class Objective>
OptimizeResult minimize_lbfgs(Objective&& fg, Vector x0,
                              const OptimizeOptions& opts = {}) {
  require(opts.initial_step > 0.0 && opts.memory >= 1 && opts.tol >= 0.0,
          "optimizer: invalid options");
  OptimizeResult res;
  res.x = std::move(x0);
  res.value = fg(res.x, res.grad);
  res.evaluations = 1;
  require(std::isfinite(res.value) && res.grad.allFinite(),
          "optimizer: non-finite objective at the initial point");
  res.trace.push_back({0, res.value, res.grad.norm()});

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  Vector grad_new;
  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    if (res.grad.norm() <= opts.tol) {
      res.status = FitStatus::Converged;
      return res;
    }
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      Vector dir;
      if (attempt == 1 || s_hist.empty()) {
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        dir = -res.grad;
      } else {
        // Two-loop recursion.
        Vector q = res.grad;
        std::vector<double> alpha(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
          alpha[i] = rho_hist[i] * s_hist[i].dot(q);
          q -= alpha[i] * y_hist[i];
        }
        const double gamma =
            s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        q *= gamma;
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
          const double beta = rho_hist[i] * y_hist[i].dot(q);
          q += (alpha[i] - beta) * s_hist[i];
        }
        dir = -q;
      }
      const double slope = res.grad.dot(dir);
      if (!(slope < 0.0)) {
        if (attempt == 0) continue;
        break;
      }
      // Without curvature information the first trial step has a fixed
      // length, which keeps the iterates invariant under rescaling of the
      // objective.
      double step = s_hist.empty() ? opts.initial_step / dir.norm() : 1.0;
      for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
        Vector x_new = res.x + step * dir;
        const double f_new = fg(x_new, grad_new);
        ++res.evaluations;
        if (std::isfinite(f_new) && grad_new.allFinite() &&
            f_new <= res.value + opts.armijo * step * slope) {
          Vector s = x_new - res.x;
          Vector y = grad_new - res.grad;
          const double sy = s.dot(y);
          if (sy > 1e-12 * s.norm() * y.norm()) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opts.memory) {
              s_hist.pop_front();
              y_hist.pop_front();
              rho_hist.pop_front();
            }
          }
          res.x = std::move(x_new);
          res.value = f_new;
          res.grad = grad_new;
          accepted = true;
          break;
        }
        step *= opts.backtrack;
      }
    }
    if (!accepted) {
      res.status = FitStatus::LineSearchFailure;
      return res;
    }
    res.iterations = iter;
    res.trace.push_back({iter, res.value, res.grad.norm()});
  }
  res.status = res.grad.norm() <= opts.tol ? FitStatus::Converged
                                           : FitStatus::MaxIterations;
  return res;
}

}  // namespace truncsm

#endif  // TRUNCSM_OPTIMIZE_HPP
