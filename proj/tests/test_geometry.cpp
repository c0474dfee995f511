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
#include <random>

#include <truncsm/geometry.hpp>

#include "oracles.hpp"

namespace {

using truncsm::Domain;
using truncsm::Error;
using truncsm::Halfspace;
using truncsm::Metric;
using truncsm::Ring;
using truncsm::Vector;
using truncsm::WeightSpec;

Vector v2(double a, double b) {
  Vector x(2);
  x << a, b;
  return x;
}

Domain unit_square_polytope() {
  return Domain::polytope({{v2(-1, 0), 0.0}, {v2(1, 0), -1.0},
                           {v2(0, -1), 0.0}, {v2(0, 1), -1.0}});
}

Domain triangle() { return Domain::polygon(Ring{{0, 0}, {1, 0}, {0, 1}}); }

TEST(Contains, UnitSquareInteriorAndBoundary) {
  const auto sq = unit_square_polytope();
  EXPECT_TRUE(contains(sq, v2(0.5, 0.5)));
  EXPECT_FALSE(contains(sq, v2(1.0, 0.5)));
  EXPECT_FALSE(contains(sq, v2(0.0, 0.0)));
}

TEST(Contains, TriangleOutsideHypotenuse) {
  const auto tri = triangle();
  EXPECT_FALSE(contains(tri, v2(0.9, 0.9)));
  EXPECT_TRUE(contains(tri, v2(0.2, 0.2)));
  EXPECT_FALSE(contains(tri, v2(0.5, 0.5)));  // on the hypotenuse
  EXPECT_FALSE(contains(tri, v2(0.0, 0.0)));  // vertex
  EXPECT_FALSE(contains(tri, v2(0.3, 0.0)));  // edge
}

TEST(Contains, DimensionMismatchThrows) {
  Vector x(3);
  x << 0.1, 0.1, 0.1;
  EXPECT_THROW(contains(unit_square_polytope(), x), Error);
  EXPECT_THROW(contains(triangle(), x), Error);
}

TEST(Contains, DisjointTemplateHasGap) {
  const auto dom = Domain::polygon(scale_polygon(truncsm::PolygonTemplate::Disjoint, 0.5));
  EXPECT_TRUE(contains(dom, v2(1.0, 0.25)));
  EXPECT_TRUE(contains(dom, v2(1.0, 1.75)));
  EXPECT_FALSE(contains(dom, v2(1.0, 1.0)));
}

TEST(Distance, UnitSquareNearestFacet) {
  const auto r = distance(unit_square_polytope(), WeightSpec::distance(), v2(0.1, 0.4));
  EXPECT_NEAR(r.g, 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(r.grad(0), 1.0);
  EXPECT_DOUBLE_EQ(r.grad(1), 0.0);
}

TEST(Distance, BoxMatchesPolytope) {
  const auto box = Domain::box(v2(0, 0), v2(1, 1));
  const auto r = distance(box, WeightSpec::distance(), v2(0.1, 0.4));
  EXPECT_NEAR(r.g, 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(r.grad(0), 1.0);
  const auto s = distance(box, WeightSpec::distance(), v2(0.7, 0.95));
  EXPECT_NEAR(s.g, 0.05, 1e-15);
  EXPECT_DOUBLE_EQ(s.grad(1), -1.0);
}

TEST(Distance, TriangleTieTakesFirstSegment) {
  // Bottom edge and left edge both at 0.25; hypotenuse at 0.5/sqrt(2).
  const auto r = distance(triangle(), WeightSpec::distance(), v2(0.25, 0.25));
  EXPECT_NEAR(r.g, 0.25, 1e-15);
  EXPECT_DOUBLE_EQ(r.grad(0), 0.0);
  EXPECT_DOUBLE_EQ(r.grad(1), 1.0);
  EXPECT_GT(0.5 / std::sqrt(2.0), 0.25);
}

TEST(Distance, ClockwiseInputIsNormalized) {
  const auto cw = Domain::polygon(Ring{{0, 0}, {0, 1}, {1, 0}});
  const auto& ring = cw.as<truncsm::Polygon>()->rings[0];
  EXPECT_EQ(ring[0], truncsm::Point2(0, 0));
  EXPECT_EQ(ring[1], truncsm::Point2(1, 0));
  const auto r = distance(cw, WeightSpec::distance(), v2(0.25, 0.25));
  EXPECT_DOUBLE_EQ(r.grad(1), 1.0);
}

TEST(Distance, CapSaturates) {
  // g0 = 0.3 at (0.3, 0.5) in the unit square; c = 4 gives min(1, 1.2) = 1.
  const auto r = distance(unit_square_polytope(), WeightSpec::capped(4.0), v2(0.3, 0.5));
  EXPECT_EQ(r.g, 1.0);
  EXPECT_EQ(r.grad, Vector::Zero(2));
  const auto s = distance(unit_square_polytope(), WeightSpec::capped(2.0), v2(0.3, 0.5));
  EXPECT_NEAR(s.g, 0.6, 1e-15);
  EXPECT_DOUBLE_EQ(s.grad(0), 2.0);
}

TEST(Distance, CapKinkReturnsZeroGradient) {
  const auto r = distance(unit_square_polytope(), WeightSpec::capped(4.0), v2(0.25, 0.5));
  EXPECT_EQ(r.g, 1.0);
  EXPECT_EQ(r.grad, Vector::Zero(2));
}

TEST(Distance, ConstantWeight) {
  const auto r = distance(triangle(), WeightSpec::unit(), v2(0.2, 0.1));
  EXPECT_EQ(r.g, 1.0);
  EXPECT_EQ(r.grad, Vector::Zero(2));
}

TEST(Distance, MahalanobisBallIdentityReducesToEuclidean) {
  const auto ball = Domain::metric_ball(Metric::mahalanobis(truncsm::Matrix::Identity(2, 2)), 1.0, 2);
  const auto r = distance(ball, WeightSpec::distance(Metric::mahalanobis(truncsm::Matrix::Identity(2, 2))),
                          v2(0.3, 0.0));
  EXPECT_NEAR(r.g, 0.7, 1e-15);
  EXPECT_NEAR(r.grad(0), -1.0, 1e-15);
  // Euclidean weight goes through the ellipsoid projection and must agree.
  const auto e = distance(ball, WeightSpec::distance(), v2(0.3, 0.0));
  EXPECT_NEAR(e.g, 0.7, 1e-12);
  EXPECT_NEAR(e.grad(0), -1.0, 1e-9);
}

TEST(Distance, MahalanobisBallOwnMetric) {
  truncsm::Matrix sigma(2, 2);
  sigma << 1.0, -0.9, -0.9, 1.0;
  const Metric m = Metric::mahalanobis(sigma);
  const auto ball = Domain::metric_ball(m, 1.0, 2);
  const Vector x = v2(0.2, -0.3);
  const auto r = distance(ball, WeightSpec::distance(m), x);
  const double norm = std::sqrt(x.dot(sigma.inverse() * x));
  EXPECT_NEAR(r.g, 1.0 - norm, 1e-14);
  EXPECT_LT((r.grad - truncsm::oracle::fd_gradient(ball, WeightSpec::distance(m), x)).norm(), 1e-7);
}

TEST(Distance, EuclideanToEllipseMatchesDenseSampling) {
  truncsm::Matrix sigma(2, 2);
  sigma << 1.0, -0.9, -0.9, 1.0;
  const auto ball = Domain::metric_ball(Metric::mahalanobis(sigma), 1.0, 2);
  // Boundary points L u for unit u.
  const truncsm::Matrix l = sigma.llt().matrixL();
  const int n = 400000;
  truncsm::Matrix boundary(n, 2);
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * std::acos(-1.0) * i / n;
    boundary.row(i) = (l * v2(std::cos(t), std::sin(t))).transpose();
  }
  for (const auto& x : truncsm::oracle::interior_points(ball, 60, 7)) {
    const auto r = distance(ball, WeightSpec::distance(), x);
    EXPECT_NEAR(r.g, truncsm::oracle::nearest_sample(boundary, x), 1e-6);
    EXPECT_NEAR(r.grad.norm(), 1.0, 1e-9);
    EXPECT_LT((r.grad - truncsm::oracle::fd_gradient(ball, WeightSpec::distance(), x)).norm(), 1e-5);
  }
}

TEST(Distance, EllipsoidDegenerateBranch) {
  // Point on the long axis of an elongated ellipse, far enough from the
  // center that the nearest boundary point leaves the axis.
  truncsm::Matrix sigma(2, 2);
  sigma << 4.0, 0.0, 0.0, 0.25;
  const auto ball = Domain::metric_ball(Metric::mahalanobis(sigma), 1.0, 2);
  const Vector x = v2(1.5, 0.0);
  const auto r = distance(ball, WeightSpec::distance(), x);
  double best = 1e9;
  for (int i = 0; i < 2000000; ++i) {
    const double t = 2.0 * std::acos(-1.0) * i / 2000000;
    best = std::min(best, (v2(2.0 * std::cos(t), 0.5 * std::sin(t)) - x).norm());
  }
  EXPECT_NEAR(r.g, best, 1e-8);
  EXPECT_NEAR(r.grad.norm(), 1.0, 1e-9);
}

TEST(Distance, ErrorPaths) {
  EXPECT_THROW(distance(unit_square_polytope(), WeightSpec::distance(), v2(1.5, 0.5)), Error);
  EXPECT_THROW(distance(triangle(), WeightSpec::distance(Metric::l1()), v2(0.2, 0.2)), Error);
  const auto ball = Domain::metric_ball(Metric::euclidean(), 1.0, 2);
  EXPECT_THROW(distance(ball, WeightSpec::distance(Metric::l1()), v2(0.2, 0.2)), Error);
  Vector x3(3);
  x3 << 0.1, 0.1, 0.1;
  EXPECT_THROW(distance(unit_square_polytope(), WeightSpec::distance(), x3), Error);
}

TEST(Distance, L1OnPolytopeUsesDualNorm) {
  const auto dom = truncsm::hemi_l1_ball(2);  // |x|+|y| < 1, y > 0
  const Vector x = v2(0.1, 0.2);
  const auto r = distance(dom, WeightSpec::distance(Metric::l1()), x);
  // l1 distance to {x + y = 1} is 1 - 0.3 = 0.7, to {y = 0} is 0.2.
  EXPECT_NEAR(r.g, 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(r.grad(1), 1.0);
  const auto s = distance(dom, WeightSpec::distance(Metric::l1()), v2(0.5, 0.45));
  EXPECT_NEAR(s.g, 0.05, 1e-12);
  EXPECT_DOUBLE_EQ(s.grad(0), -1.0);
  EXPECT_DOUBLE_EQ(s.grad(1), -1.0);
  const auto e = distance(dom, WeightSpec::distance(), v2(0.5, 0.45));
  EXPECT_NEAR(e.g, 0.05 / std::sqrt(2.0), 1e-12);
}

TEST(Distance, L1BallBallMetricAgreesWithPolytope) {
  const auto ball = Domain::metric_ball(Metric::l1(), 1.0, 3, {2});
  const auto poly = truncsm::hemi_l1_ball(3);
  for (const auto& x : truncsm::oracle::interior_points(poly, 50, 3)) {
    for (const auto& w : {WeightSpec::distance(Metric::l1()), WeightSpec::distance()}) {
      EXPECT_NEAR(distance(ball, w, x).g, distance(poly, w, x).g, 1e-14);
    }
  }
}

TEST(DistanceBatch, UnitGradientsAndShape) {
  truncsm::Matrix pts(3, 2);
  pts << 0.2, 0.3, 0.5, 0.6, 0.9, 0.15;
  const auto t = distance_batch(unit_square_polytope(), WeightSpec::distance(), pts);
  ASSERT_EQ(t.g.rows(), 3);
  EXPECT_EQ(t.eval_count, 1);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(t.dg.row(i).norm(), 1.0, 1e-15);
    EXPECT_EQ(t.g(i, 0), t.g(i, 1));
  }
}

TEST(DistanceBatch, ConstantWeight) {
  truncsm::Matrix pts(2, 2);
  pts << 0.2, 0.3, 0.5, 0.6;
  const auto t = distance_batch(unit_square_polytope(), WeightSpec::unit(), pts);
  EXPECT_TRUE((t.g.array() == 1.0).all());
  EXPECT_TRUE((t.dg.array() == 0.0).all());
}

TEST(DistanceBatch, PolygonSegmentEvaluationsAreNTimesVertices) {
  const auto dom = Domain::polygon(truncsm::star_polygon_preset());
  const auto pts = truncsm::oracle::interior_points(dom, 37, 1);
  truncsm::Matrix m(37, 2);
  for (int i = 0; i < 37; ++i) m.row(i) = pts[i].transpose();
  const auto t = distance_batch(dom, WeightSpec::distance(), m);
  EXPECT_EQ(t.primitive_evals, 37u * 16u);
}

TEST(DistanceBatch, PointOutsidePropagates) {
  truncsm::Matrix pts(2, 2);
  pts << 0.2, 0.3, 1.5, 0.6;
  EXPECT_THROW(distance_batch(unit_square_polytope(), WeightSpec::distance(), pts), Error);
}

TEST(BoundingBox, Examples) {
  const auto tri = bounding_box(triangle());
  EXPECT_EQ(tri.lower, v2(0, 0));
  EXPECT_EQ(tri.upper, v2(1, 1));
  const auto box = bounding_box(Domain::box(v2(-1, 2), v2(3, 4)));
  EXPECT_EQ(box.lower, v2(-1, 2));
  EXPECT_EQ(box.upper, v2(3, 4));
  const auto ball = bounding_box(Domain::metric_ball(Metric::euclidean(), 1.0, 3));
  EXPECT_EQ(ball.lower, Vector::Constant(3, -1.0));
  EXPECT_EQ(ball.upper, Vector::Constant(3, 1.0));
}

TEST(BoundingBox, PolytopeByLinearPrograms) {
  const auto sq = bounding_box(unit_square_polytope());
  EXPECT_NEAR((sq.lower - v2(0, 0)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((sq.upper - v2(1, 1)).norm(), 0.0, 1e-12);
  const auto hemi = bounding_box(truncsm::hemi_l1_ball(5));
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(hemi.lower(k), -1.0, 1e-10);
    EXPECT_NEAR(hemi.upper(k), 1.0, 1e-10);
  }
  EXPECT_NEAR(hemi.lower(4), 0.0, 1e-10);
  EXPECT_NEAR(hemi.upper(4), 1.0, 1e-10);
}

TEST(BoundingBox, UnboundedPolytopeThrows) {
  // Strip 0 < y < 1, unbounded in x.
  const auto strip = Domain::polytope({{v2(0, -1), 0.0}, {v2(0, 1), -1.0}, {v2(0, 1), -2.0}});
  EXPECT_THROW(bounding_box(strip), Error);
}

TEST(DomainValidation, RejectsBadInput) {
  EXPECT_THROW(Domain::polygon(Ring{{0, 0}, {1, 1}, {1, 0}, {0, 1}}), Error);  // bow tie
  EXPECT_THROW(Domain::polygon(Ring{{0, 0}, {1, 0}}), Error);
  EXPECT_THROW(Domain::box(v2(0, 0), v2(1, 0)), Error);
  EXPECT_THROW(Domain::metric_ball(Metric::euclidean(), 0.0, 2), Error);
  // x < 0 and x > 1 simultaneously: empty interior.
  EXPECT_THROW(Domain::polytope({{v2(1, 0), 0.0}, {v2(-1, 0), 1.0}, {v2(0, 1), -1.0}}), Error);
  EXPECT_THROW(Domain::polytope({{v2(1, 0), 0.0}, {v2(-1, 0), -1.0}}), Error);  // < d+1
  truncsm::Matrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(Metric::mahalanobis(bad), Error);
  bad << 1.0, 0.5, 0.4, 1.0;
  EXPECT_THROW(Metric::mahalanobis(bad), Error);
  EXPECT_THROW(WeightSpec::capped(-1.0), Error);
}

TEST(ScalePolygon, SquareTemplate) {
  const auto rings = scale_polygon(truncsm::PolygonTemplate::Square, 1.0);
  ASSERT_EQ(rings.size(), 1u);
  const Ring expected{{-1, -1}, {-1, 1}, {1, 1}, {1, -1}};
  EXPECT_EQ(rings[0], expected);
  const auto doubled = scale_polygon(truncsm::PolygonTemplate::Square, 2.0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(doubled[0][i], 2.0 * rings[0][i]);
}

TEST(ScalePolygon, DisjointTemplate) {
  const auto rings = scale_polygon(truncsm::PolygonTemplate::Disjoint, 0.5);
  ASSERT_EQ(rings.size(), 2u);
  const Ring first{{0.5, 0}, {0.5, 0.5}, {1.5, 0.5}, {1.5, 0}};
  EXPECT_EQ(rings[0], first);
  EXPECT_THROW(scale_polygon(truncsm::PolygonTemplate::Square, 0.0), Error);
}

// ---------------------------------------------------------------------------
// Properties

struct Case {
  const char* name;
  Domain domain;
};

std::vector<Case> property_domains() {
  truncsm::Matrix sigma(2, 2);
  sigma << 1.0, -0.6, -0.6, 1.0;
  return {
      {"square", unit_square_polytope()},
      {"star", Domain::polygon(truncsm::star_polygon_preset())},
      {"disjoint", Domain::polygon(scale_polygon(truncsm::PolygonTemplate::Disjoint, 1.0))},
      {"polytope3", Domain::polytope(truncsm::oracle::random_polytope(3, 12, 5))},
      {"ellipse", Domain::metric_ball(Metric::mahalanobis(sigma), 1.0, 2)},
  };
}

TEST(GeometryProperties, LipschitzAndUnitGradient) {
  for (const auto& c : property_domains()) {
    const auto pts = truncsm::oracle::interior_points(c.domain, 300, 11);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const auto a = distance(c.domain, WeightSpec::distance(), pts[i]);
      const auto b = distance(c.domain, WeightSpec::distance(), pts[i + 1]);
      EXPECT_GE(a.g, 0.0) << c.name;
      EXPECT_LE(std::abs(a.g - b.g), (pts[i] - pts[i + 1]).norm() + 1e-12) << c.name;
      EXPECT_NEAR(a.grad.norm(), 1.0, 1e-9) << c.name;
    }
  }
}

TEST(GeometryProperties, GradientMatchesFiniteDifferences) {
  for (const auto& c : property_domains()) {
    for (const auto& x : truncsm::oracle::interior_points(c.domain, 50, 13)) {
      const auto r = distance(c.domain, WeightSpec::distance(), x);
      const Vector fd = truncsm::oracle::fd_gradient(c.domain, WeightSpec::distance(), x, 1e-7);
      // Medial-axis points are non-differentiable; skip exact kinks.
      if ((r.grad - fd).norm() > 1e-4 && std::abs(fd.norm() - 1.0) > 1e-4) continue;
      EXPECT_LT((r.grad - fd).norm(), 1e-4) << c.name;
    }
  }
}

TEST(GeometryProperties, VanishesAtBoundary) {
  const auto sq = unit_square_polytope();
  for (double eps : {1e-3, 1e-6, 1e-9}) {
    EXPECT_LE(distance(sq, WeightSpec::distance(), v2(eps, 0.5)).g, eps + 1e-12);
    EXPECT_LE(distance(sq, WeightSpec::distance(), v2(0.5, 1.0 - eps)).g, eps + 1e-12);
  }
  const auto tri = triangle();
  for (double eps : {1e-3, 1e-6}) {
    EXPECT_LE(distance(tri, WeightSpec::distance(), v2(0.3, eps)).g, eps + 1e-12);
  }
}

TEST(GeometryProperties, ConcaveOnConvexPolytopes) {
  const auto dom = Domain::polytope(truncsm::oracle::random_polytope(3, 12, 21));
  const auto pts = truncsm::oracle::interior_points(dom, 400, 22);
  for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
    const Vector mid = 0.5 * (pts[i] + pts[i + 1]);
    const double gm = distance(dom, WeightSpec::distance(), mid).g;
    const double ga = distance(dom, WeightSpec::distance(), pts[i]).g;
    const double gb = distance(dom, WeightSpec::distance(), pts[i + 1]).g;
    EXPECT_GE(gm, 0.5 * (ga + gb) - 1e-12);
  }
}

TEST(GeometryProperties, CapIsComposedMin) {
  const auto dom = Domain::polygon(truncsm::star_polygon_preset());
  for (double c : {0.1, 1.0, 3.0, 100.0}) {
    for (const auto& x : truncsm::oracle::interior_points(dom, 100, 31)) {
      const auto raw = distance(dom, WeightSpec::distance(), x);
      const auto cap = distance(dom, WeightSpec::capped(c), x);
      EXPECT_EQ(cap.g, std::min(1.0, c * raw.g));
      if (c * raw.g < 1.0) {
        EXPECT_EQ(cap.grad, (c * raw.grad).eval());
      } else {
        EXPECT_EQ(cap.grad, Vector::Zero(2));
      }
    }
  }
}

TEST(GeometryProperties, MahalanobisLipschitzInItsMetric) {
  truncsm::Matrix sigma(2, 2);
  sigma << 1.0, -0.9, -0.9, 1.0;
  const Metric m = Metric::mahalanobis(sigma);
  const auto dom = Domain::polygon(truncsm::star_polygon_preset());
  const auto pts = truncsm::oracle::interior_points(dom, 200, 41);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double a = distance(dom, WeightSpec::distance(m), pts[i]).g;
    const double b = distance(dom, WeightSpec::distance(m), pts[i + 1]).g;
    EXPECT_LE(std::abs(a - b), m.norm(pts[i] - pts[i + 1]) + 1e-12);
  }
}

TEST(GeometryProperties, AgreesWithBruteForceOracle) {
  const auto star = truncsm::star_polygon_preset();
  const auto boundary = truncsm::oracle::sample_polygon_boundary({star});
  ASSERT_GE(boundary.rows(), 100000);
  const auto dom = Domain::polygon(star);
  for (const auto& x : truncsm::oracle::interior_points(dom, 100, 51)) {
    EXPECT_NEAR(distance(dom, WeightSpec::distance(), x).g,
                truncsm::oracle::nearest_sample(boundary, x), 1e-3);
  }
}

}  // namespace
