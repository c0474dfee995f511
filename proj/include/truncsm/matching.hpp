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

#ifndef TRUNCSM_MATCHING_HPP
#define TRUNCSM_MATCHING_HPP

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "common.hpp"

namespace truncsm {

/// Centers stored as the flattened (theta_1, ..., theta_K) of a mixture.
inline Matrix as_centers(const VectorRef& theta, int d) {
  require(d >= 1 && theta.size() % d == 0, "as_centers: bad length");
  Matrix c(theta.size() / d, d);
  for (Eigen::Index j = 0; j < c.rows(); ++j) {
    c.row(j) = theta.segment(j * d, d).transpose();
  }
  return c;
}

struct CenterMatch {
  std::vector<int> assignment;  // estimate j is matched to truth assignment[j]
  Vector distances;             // per estimated center
  double total = 0.0;           // || theta_hat(matched) - theta* ||
  double max = 0.0;
};

/// Minimum-cost assignment of estimated to true centers (cost = squared
/// distance), by enumeration; mixtures here have few components.
inline CenterMatch match_centers(const Matrix& estimated, const Matrix& truth) {
  require(estimated.rows() == truth.rows() && estimated.cols() == truth.cols(),
          "match_centers: shape mismatch");
  const int k = static_cast<int>(truth.rows());
  require(k >= 1 && k <= 9, "match_centers: supports 1..9 centers");
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_perm = perm;
  do {
    double cost = 0.0;
    for (int j = 0; j < k; ++j) {
      cost += (estimated.row(j) - truth.row(perm[j])).squaredNorm();
    }
    if (cost < best) {
      best = cost;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  CenterMatch m;
  m.assignment = best_perm;
  m.distances.resize(k);
  for (int j = 0; j < k; ++j) {
    m.distances(j) = (estimated.row(j) - truth.row(best_perm[j])).norm();
  }
  m.total = std::sqrt(best);
  m.max = m.distances.maxCoeff();
  return m;
}

}  // namespace truncsm

#endif  // TRUNCSM_MATCHING_HPP
