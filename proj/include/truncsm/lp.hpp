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

#ifndef TRUNCSM_LP_HPP
#define TRUNCSM_LP_HPP

// Dense two-phase simplex for small standard-form programs
//
//     minimize    cost' y
//     subject to  A y = rhs,  y >= 0
//
// The row count is tiny in every use inside this library (the dimension of
// a polytope plus one), while the column count can reach a few thousand, so
// a full tableau is cheap. Bland's rule is used throughout to rule out
// cycling on the heavily degenerate programs that polytope duals produce.

#include <cmath>
#include <limits>
#include <vector>

#include "common.hpp"

namespace truncsm::lp {

enum class Status { Optimal, Infeasible, Unbounded };

struct Solution {
  Status status = Status::Infeasible;
  double value = 0.0;
  Vector y;
};

namespace detail {

struct Tableau {
  // rows 0..p-1 hold constraints, last column is the right-hand side.
  Matrix t;
  std::vector<int> basis;
  int columns = 0;  // number of structural + artificial columns

  void pivot(int row, int col) {
    t.row(row) /= t(row, col);
    for (int r = 0; r < t.rows(); ++r) {
      if (r != row && t(r, col) != 0.0) {
        t.row(r) -= t(r, col) * t.row(row);
      }
    }
    basis[row] = col;
  }
};

// Runs simplex iterations on `tab` for the objective stored in the last row
// (reduced costs, minimization form). Only columns < `allowed` may enter.
inline Status iterate(Tableau& tab, int allowed, double tol) {
  const int p = static_cast<int>(tab.basis.size());
  const int rhs = static_cast<int>(tab.t.cols()) - 1;
  const int obj = p;
  for (int guard = 0; guard < 100000; ++guard) {
    int enter = -1;
    for (int c = 0; c < allowed; ++c) {
      if (tab.t(obj, c) < -tol) {
        enter = c;
        break;
      }
    }
    if (enter < 0) return Status::Optimal;
    int leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < p; ++r) {
      const double a = tab.t(r, enter);
      if (a > tol) {
        const double ratio = tab.t(r, rhs) / a;
        if (ratio < best - tol ||
            (std::abs(ratio - best) <= tol && leave >= 0 &&
             tab.basis[r] < tab.basis[leave])) {
          best = ratio;
          leave = r;
        }
      }
    }
    if (leave < 0) return Status::Unbounded;
    tab.pivot(leave, enter);
  }
  throw Error("simplex iteration limit reached");
}

}  // namespace detail

inline Solution minimize(const Matrix& a, const Vector& rhs, const Vector& cost,
                         double tol = 1e-10) {
  const int p = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  require(rhs.size() == p && cost.size() == m, "lp: shape mismatch");

  detail::Tableau tab;
  tab.columns = m + p;
  tab.t = Matrix::Zero(p + 1, m + p + 1);
  tab.basis.resize(p);
  for (int r = 0; r < p; ++r) {
    const double sign = rhs(r) < 0.0 ? -1.0 : 1.0;
    tab.t.row(r).head(m) = sign * a.row(r);
    tab.t(r, m + r) = 1.0;
    tab.t(r, m + p) = sign * rhs(r);
    tab.basis[r] = m + r;
  }
  // Phase 1: minimize the sum of artificials.
  for (int r = 0; r < p; ++r) {
    tab.t.row(p) -= tab.t.row(r);
  }
  for (int r = 0; r < p; ++r) tab.t(p, m + r) = 0.0;
  detail::iterate(tab, m + p, tol);
  Solution out;
  if (-tab.t(p, m + p) > 1e-8 * (1.0 + rhs.cwiseAbs().maxCoeff())) {
    out.status = Status::Infeasible;
    return out;
  }
  // Drive zero-level artificials out of the basis; rows where that is
  // impossible are redundant and get zeroed.
  for (int r = 0; r < p; ++r) {
    if (tab.basis[r] < m) continue;
    int col = -1;
    for (int c = 0; c < m; ++c) {
      if (std::abs(tab.t(r, c)) > tol) {
        col = c;
        break;
      }
    }
    if (col >= 0) {
      tab.pivot(r, col);
    } else {
      tab.t.row(r).setZero();
    }
  }
  // Phase 2: original cost expressed in reduced form.
  tab.t.row(p).setZero();
  tab.t.row(p).head(m) = cost.transpose();
  for (int r = 0; r < p; ++r) {
    const int b = tab.basis[r];
    if (b < m && cost(b) != 0.0) {
      tab.t.row(p) -= cost(b) * tab.t.row(r);
    }
  }
  if (detail::iterate(tab, m, tol) == Status::Unbounded) {
    out.status = Status::Unbounded;
    return out;
  }
  out.status = Status::Optimal;
  out.y = Vector::Zero(m);
  for (int r = 0; r < p; ++r) {
    if (tab.basis[r] < m) out.y(tab.basis[r]) = tab.t(r, m + p);
  }
  out.value = cost.dot(out.y);
  return out;
}

}  // namespace truncsm::lp

#endif  // TRUNCSM_LP_HPP
