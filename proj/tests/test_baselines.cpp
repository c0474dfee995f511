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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include <truncsm/baselines.hpp>
#include <truncsm/data.hpp>

namespace {

using truncsm::Domain;
using truncsm::FitOptions;
using truncsm::Matrix;
using truncsm::ModelFamily;
using truncsm::Vector;

Vector v2(double a, double b) {
  Vector x(2);
  x << a, b;
  return x;
}

Domain unit_interval() { return Domain::box(Vector::Zero(1), Vector::Ones(1)); }

double sd(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

TEST(Normalizer, ConstantDensityOnUnitInterval) {
  const auto est = truncsm::make_normalizer(unit_interval(), 1000, 1);
  const double lz = truncsm::estimate_log_z(
      [](const Matrix& p) { return Vector::Zero(p.rows()).eval(); }, est);
  EXPECT_NEAR(lz, 0.0, 1e-12);
}

TEST(Normalizer, ExponentialTiltWithinStandardErrors) {
  const auto est = truncsm::make_normalizer(unit_interval(), 100000, 2);
  const auto z = truncsm::estimate_z([](const Matrix& p) { return p.col(0).eval(); }, est);
  EXPECT_LT(std::abs(z.value - (std::exp(1.0) - 1.0)), 3.0 * z.std_error);
  const double lz = truncsm::estimate_log_z([](const Matrix& p) { return p.col(0).eval(); }, est);
  EXPECT_NEAR(lz, std::log(z.value), 1e-12);
}

TEST(Normalizer, SpreadShrinksAsInverseRootN) {
  auto tilt = [](const Matrix& p) { return p.col(0).eval(); };
  std::vector<double> small, large;
  for (std::uint64_t s = 0; s < 40; ++s) {
    small.push_back(truncsm::estimate_log_z(tilt, truncsm::make_normalizer(unit_interval(), 1000, 10 + s)));
    large.push_back(truncsm::estimate_log_z(tilt, truncsm::make_normalizer(unit_interval(), 16000, 100 + s)));
  }
  const double ratio = sd(small) / sd(large);
  EXPECT_GT(ratio, 2.5);
  EXPECT_LT(ratio, 6.5);
}

TEST(Normalizer, EmptyDomainSampleThrows) {
  truncsm::NormalizerEstimate est;
  est.total = 10;
  est.box_volume = 1.0;
  est.inside.resize(0, 1);
  EXPECT_THROW(truncsm::estimate_log_z(ModelFamily::gaussian_mean(1), Vector::Zero(1), est),
               truncsm::Error);
  EXPECT_THROW(truncsm::make_normalizer(unit_interval(), 0, 1), truncsm::Error);
}

TEST(Normalizer, UnboundedDomainThrows) {
  std::vector<truncsm::Halfspace> hs;
  hs.push_back({v2(-1, 0), 0.0});
  hs.push_back({v2(0, -1), 0.0});
  hs.push_back({v2(1, -1), -1.0});
  const auto wedge = Domain::polytope(hs);
  EXPECT_THROW(truncsm::make_normalizer(wedge, 100, 1), truncsm::Error);
}

TEST(RjMle, AgreesWithTruthOnUnitSquare) {
  const auto f = ModelFamily::gaussian_mean(2);
  const auto square = Domain::box(v2(0, 0), v2(1, 1));
  const auto data = truncsm::sample_truncated_kept(f, v2(0.5, 0.5), square, 5000, 3);
  const auto r = truncsm::fit_rjmle(f, data, square, 100000, 4);
  EXPECT_LT((r.theta_hat - v2(0.5, 0.5)).norm(), 0.2);
  EXPECT_GE(r.normalizer_evals, r.iterations + 1);
  EXPECT_EQ(r.weight_evals, 0);
}

TEST(RjMle, HugeBoxRecoversSampleMean) {
  const auto f = ModelFamily::gaussian_mean(2);
  const auto big = Domain::box(v2(-12, -12), v2(12, 12));
  const auto data = truncsm::sample_truncated(f, v2(0.3, -0.4), big, 2000, 5);
  const auto r = truncsm::fit_rjmle(f, data, big, 200000, 6);
  EXPECT_LT((r.theta_hat - data.mean()).norm(), 0.1);
}

TEST(RjMle, DeterministicForFixedParticles) {
  const auto f = ModelFamily::isotropic_gmm(2, 2, 1.0);
  const auto dom = Domain::polygon(truncsm::star_polygon_preset());
  const auto data = truncsm::sample_truncated(f, (Vector(4) << -1, 1, 1, -1).finished(), dom, 2000, 7);
  FitOptions opts;
  opts.seed = 8;
  const auto a = truncsm::fit_rjmle(f, data, dom, 20000, 9, opts);
  const auto b = truncsm::fit_rjmle(f, data, dom, 20000, 9, opts);
  EXPECT_EQ(a.theta_hat, b.theta_hat);
  EXPECT_EQ(a.normalizer_evals, b.normalizer_evals);
  EXPECT_GT(a.normalizer_evals, 10);
}

TEST(RjMle, RejectsPointsOutsideDomain) {
  const auto f = ModelFamily::gaussian_mean(2);
  truncsm::Dataset data;
  data.points = v2(2.0, 0.5).transpose();
  EXPECT_THROW(truncsm::fit_rjmle(f, data, Domain::box(v2(0, 0), v2(1, 1)), 100, 1), truncsm::Error);
}

TEST(UntruncatedMle, GaussianIsSampleMean) {
  const auto f = ModelFamily::gaussian_mean(2);
  const auto data = truncsm::sample_truncated(f, v2(0, 0), Domain::box(v2(0, 0), v2(1, 1)), 2000, 10);
  EXPECT_EQ(truncsm::fit_mle_untruncated(f, data).theta_hat, data.mean());
}

TEST(UntruncatedMle, SingleComponentEmIsSampleMean) {
  const auto f = ModelFamily::isotropic_gmm(2, 1, 1.0);
  const auto data = truncsm::sample_truncated(f, v2(0.2, 0.1), Domain::box(v2(-5, -5), v2(5, 5)), 500, 11);
  const auto r = truncsm::fit_mle_untruncated(f, data);
  EXPECT_LT((r.theta_hat - data.mean()).norm(), 1e-12);
}

TEST(UntruncatedMle, EmTraceIsMonotone) {
  const auto f = ModelFamily::isotropic_gmm(2, 4, 1.0);
  const Vector truth = (Vector(8) << 2, 2, -2, 2, -2, -2, 2, -2).finished();
  const auto data = truncsm::sample_truncated(f, truth, Domain::box(v2(-8, -8), v2(8, 8)), 4000, 12);
  FitOptions opts;
  opts.init_sd = 1.0;
  opts.seed = 2;
  const auto r = truncsm::fit_mle_untruncated(f, data, opts);
  ASSERT_GT(r.objective_trace.size(), 2u);
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
    EXPECT_LE(r.objective_trace[i].value, r.objective_trace[i - 1].value + 1e-12);
  }
}

}  // namespace
