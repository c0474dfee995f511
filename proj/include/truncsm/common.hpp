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

#ifndef TRUNCSM_COMMON_HPP
#define TRUNCSM_COMMON_HPP

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace truncsm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

/// Raised for every contract violation reported by the library: dimension
/// mismatches, points outside a domain, unsupported metric/domain pairings,
/// malformed input files and failed fits.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) {
    throw Error(message);
  }
}

}  // namespace truncsm

#endif  // TRUNCSM_COMMON_HPP
