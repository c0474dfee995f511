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

#ifndef TRUNCSM_GEOMETRY_HPP
#define TRUNCSM_GEOMETRY_HPP

// Truncation domains and the distance-to-boundary weight.
//
// Every domain is an open set V. The weight g0(x) is the distance from an
// interior point x to the boundary of V, measured in a user-selected metric
// (Euclidean, Mahalanobis or l1), optionally capped as min(1, c * g0) or
// replaced by the constant 1. distance() returns the weight together with
// its gradient in ordinary coordinates; distance_batch() tabulates both for
// a whole dataset so the estimator never touches the geometry again.
//
// Where several boundary pieces are equally close the gradient of the first
// one in storage order is returned. For polygons that order is the
// counter-clockwise vertex order established at construction; for boxes it
// is lower_0, upper_0, lower_1, upper_1, ...; for metric balls the curved
// boundary precedes the positivity facets.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "common.hpp"
#include "lp.hpp"

namespace truncsm {

/// Open halfspace { x : <a, x> + b < 0 }.
struct Halfspace {
  Vector a;
  double b = 0.0;
};

/// Metric used to measure distances between points.
class Metric {
 public:
  enum class Kind { Euclidean, Mahalanobis, L1 };

  static Metric euclidean() { return Metric(Kind::Euclidean); }
  static Metric l1() { return Metric(Kind::L1); }

  /// d(x, z) = sqrt((x - z)' sigma^-1 (x - z)); sigma must be symmetric
  /// positive definite.
  static Metric mahalanobis(const Matrix& sigma) {
    require(sigma.rows() == sigma.cols() && sigma.rows() > 0,
            "mahalanobis: sigma must be square");
    require((sigma - sigma.transpose()).cwiseAbs().maxCoeff() <=
                1e-12 * (1.0 + sigma.cwiseAbs().maxCoeff()),
            "mahalanobis: sigma must be symmetric");
    Metric m(Kind::Mahalanobis);
    Eigen::LLT<Matrix> llt(sigma);
    require(llt.info() == Eigen::Success,
            "mahalanobis: sigma must be positive definite");
    m.sigma_ = sigma;
    m.chol_ = llt.matrixL();
    return m;
  }

  Kind kind() const { return kind_; }
  const Matrix& sigma() const { return sigma_; }
  /// Lower Cholesky factor L with sigma = L L'.
  const Matrix& cholesky() const { return chol_; }

  double norm(const VectorRef& v) const {
    switch (kind_) {
      case Kind::Euclidean:
        return v.norm();
      case Kind::L1:
        return v.lpNorm<1>();
      case Kind::Mahalanobis:
        check_dim(v.size());
        return chol_.triangularView<Eigen::Lower>().solve(Vector(v)).norm();
    }
    return 0.0;
  }

  /// Dual norm sup{ <a, v> : norm(v) <= 1 }; the distance from x to the
  /// hyperplane <a, z> + b = 0 is |<a, x> + b| / dual_norm(a).
  double dual_norm(const VectorRef& a) const {
    switch (kind_) {
      case Kind::Euclidean:
        return a.norm();
      case Kind::L1:
        return a.lpNorm<Eigen::Infinity>();
      case Kind::Mahalanobis:
        check_dim(a.size());
        return (chol_.transpose() * a).norm();
    }
    return 0.0;
  }

  bool same_as(const Metric& other) const {
    if (kind_ != other.kind_) return false;
    if (kind_ != Kind::Mahalanobis) return true;
    return sigma_.rows() == other.sigma_.rows() && sigma_ == other.sigma_;
  }

  std::string describe() const {
    switch (kind_) {
      case Kind::Euclidean:
        return "euclidean";
      case Kind::L1:
        return "l1";
      case Kind::Mahalanobis:
        return "mahalanobis";
    }
    return "";
  }

 private:
  explicit Metric(Kind k) : kind_(k) {}

  void check_dim(Eigen::Index n) const {
    require(n == sigma_.rows(), "mahalanobis: dimension mismatch");
  }

  Kind kind_;
  Matrix sigma_;
  Matrix chol_;
};

/// Weight function selection: g0 in `metric`, optionally capped, or the
/// constant weight of plain score matching.
struct WeightSpec {
  Metric metric = Metric::euclidean();
  std::optional<double> cap;
  bool constant = false;

  static WeightSpec distance(Metric m = Metric::euclidean()) {
    WeightSpec w;
    w.metric = std::move(m);
    return w;
  }
  static WeightSpec capped(double c, Metric m = Metric::euclidean()) {
    WeightSpec w;
    w.metric = std::move(m);
    w.cap = c;
    w.validate();
    return w;
  }
  static WeightSpec unit() {
    WeightSpec w;
    w.constant = true;
    return w;
  }

  void validate() const {
    require(!(cap && constant), "weight: cap and constant are exclusive");
    require(!cap || (std::isfinite(*cap) && *cap > 0.0),
            "weight: cap must be positive");
  }

  std::string describe() const {
    if (constant) return "constant";
    std::string s = metric.describe();
    if (cap) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s;cap=%g", s.c_str(), *cap);
      s = buf;
    }
    return s;
  }
};

using Point2 = Eigen::Vector2d;
using Ring = std::vector<Point2>;

struct ConvexPolytope {
  std::vector<Halfspace> halfspaces;
};

/// One or more closed rings; membership follows the even-odd rule over all
/// rings together, so disjoint pieces and holes are both expressible.
struct Polygon {
  std::vector<Ring> rings;
};

/// { x : metric.norm(x) < radius, x_i > 0 for i in positive }.
struct MetricBall {
  Metric metric = Metric::euclidean();
  double radius = 1.0;
  std::vector<int> positive;
  int dim = 0;
};

struct Box {
  Vector lower;
  Vector upper;
};

namespace detail {

inline double cross(const Point2& a, const Point2& b) {
  return a.x() * b.y() - a.y() * b.x();
}

inline double signed_area(const Ring& ring) {
  double s = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    s += cross(ring[i], ring[(i + 1) % ring.size()]);
  }
  return 0.5 * s;
}

inline int orientation(const Point2& a, const Point2& b, const Point2& c) {
  const double v = cross(b - a, c - a);
  return (v > 0.0) - (v < 0.0);
}

inline bool on_segment(const Point2& a, const Point2& b, const Point2& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

inline bool segments_intersect(const Point2& p1, const Point2& p2,
                               const Point2& q1, const Point2& q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

// Chebyshev radius of { x : A x + b < 0 } via the dual program
//   min -b'y  s.t.  A'y = 0,  sum_j |a_j| y_j = 1,  y >= 0.
// Infinite when the dual is infeasible (primal unbounded).
inline double chebyshev_radius(const std::vector<Halfspace>& hs) {
  const int d = static_cast<int>(hs.front().a.size());
  const int m = static_cast<int>(hs.size());
  Matrix a(d + 1, m);
  Vector cost(m);
  for (int j = 0; j < m; ++j) {
    a.col(j).head(d) = hs[j].a;
    a(d, j) = hs[j].a.norm();
    cost(j) = -hs[j].b;
  }
  Vector rhs = Vector::Zero(d + 1);
  rhs(d) = 1.0;
  const auto sol = lp::minimize(a, rhs, cost);
  if (sol.status == lp::Status::Infeasible) {
    return std::numeric_limits<double>::infinity();
  }
  if (sol.status == lp::Status::Unbounded) return -1.0;
  return sol.value;
}

}  // namespace detail

class Domain {
 public:
  using Variant = std::variant<ConvexPolytope, Polygon, MetricBall, Box>;

  static Domain polytope(std::vector<Halfspace> halfspaces) {
    require(!halfspaces.empty(), "polytope: no halfspaces");
    const auto d = halfspaces.front().a.size();
    require(d >= 1, "polytope: zero dimension");
    for (const auto& h : halfspaces) {
      require(h.a.size() == d, "polytope: inconsistent halfspace dimension");
      require(h.a.allFinite() && std::isfinite(h.b),
              "polytope: non-finite halfspace");
      require(h.a.norm() > 0.0, "polytope: halfspace normal must be nonzero");
    }
    require(halfspaces.size() >= static_cast<std::size_t>(d) + 1,
            "polytope: need at least d+1 halfspaces");
    require(detail::chebyshev_radius(halfspaces) > 1e-12,
            "polytope: empty interior");
    return Domain(ConvexPolytope{std::move(halfspaces)},
                  static_cast<int>(d));
  }

  /// Rings are reoriented counter-clockwise (keeping the first vertex
  /// first) and checked for self- and mutual intersection.
  static Domain polygon(std::vector<Ring> rings) {
    require(!rings.empty(), "polygon: no rings");
    for (auto& ring : rings) {
      require(ring.size() >= 3, "polygon: a ring needs at least 3 vertices");
      for (const auto& p : ring) {
        require(p.allFinite(), "polygon: non-finite vertex");
      }
      require(detail::signed_area(ring) != 0.0, "polygon: degenerate ring");
      if (detail::signed_area(ring) < 0.0) {
        std::reverse(ring.begin() + 1, ring.end());
      }
    }
    struct Edge {
      std::size_t ring, index;
      Point2 a, b;
    };
    std::vector<Edge> edges;
    for (std::size_t r = 0; r < rings.size(); ++r) {
      const auto& ring = rings[r];
      for (std::size_t i = 0; i < ring.size(); ++i) {
        const Point2& a = ring[i];
        const Point2& b = ring[(i + 1) % ring.size()];
        require(a != b, "polygon: repeated consecutive vertex");
        edges.push_back({r, i, a, b});
      }
    }
    for (std::size_t i = 0; i < edges.size(); ++i) {
      for (std::size_t j = i + 1; j < edges.size(); ++j) {
        const auto& e = edges[i];
        const auto& f = edges[j];
        if (e.ring == f.ring) {
          const std::size_t n = rings[e.ring].size();
          if ((e.index + 1) % n == f.index || (f.index + 1) % n == e.index) {
            continue;
          }
        }
        require(!detail::segments_intersect(e.a, e.b, f.a, f.b),
                "polygon: boundary self-intersects");
      }
    }
    return Domain(Polygon{std::move(rings)}, 2);
  }

  static Domain polygon(Ring ring) {
    return polygon(std::vector<Ring>{std::move(ring)});
  }

  static Domain metric_ball(Metric metric, double radius, int dim,
                            std::vector<int> positive = {}) {
    require(dim >= 1, "ball: dimension must be positive");
    require(std::isfinite(radius) && radius > 0.0,
            "ball: radius must be positive");
    if (metric.kind() == Metric::Kind::Mahalanobis) {
      require(metric.sigma().rows() == dim, "ball: sigma dimension mismatch");
    }
    std::sort(positive.begin(), positive.end());
    positive.erase(std::unique(positive.begin(), positive.end()),
                   positive.end());
    for (int i : positive) {
      require(i >= 0 && i < dim, "ball: positivity index out of range");
    }
    return Domain(MetricBall{std::move(metric), radius, std::move(positive), dim},
                  dim);
  }

  static Domain box(Vector lower, Vector upper) {
    require(lower.size() == upper.size() && lower.size() >= 1,
            "box: bound dimension mismatch");
    require(lower.allFinite() && upper.allFinite(), "box: non-finite bounds");
    require((lower.array() < upper.array()).all(),
            "box: lower must be strictly below upper");
    const int d = static_cast<int>(lower.size());
    return Domain(Box{std::move(lower), std::move(upper)}, d);
  }

  int dim() const { return dim_; }
  const Variant& shape() const { return shape_; }

  template <class T>
  const T* as() const {
    return std::get_if<T>(&shape_);
  }

 private:
  Domain(Variant v, int d) : shape_(std::move(v)), dim_(d) {}

  Variant shape_;
  int dim_;
};

/// Box as the equivalent list of 2d halfspaces, ordered
/// lower_0, upper_0, lower_1, upper_1, ...
inline std::vector<Halfspace> box_halfspaces(const Box& box) {
  const auto d = box.lower.size();
  std::vector<Halfspace> hs;
  hs.reserve(2 * d);
  for (Eigen::Index i = 0; i < d; ++i) {
    Vector e = Vector::Zero(d);
    e(i) = -1.0;
    hs.push_back({e, box.lower(i)});
    e(i) = 1.0;
    hs.push_back({e, -box.upper(i)});
  }
  return hs;
}

/// Facets { s'x - 1 < 0 } of the unit l1 ball, restricted to the sign
/// patterns with s_i = +1 on `positive` coordinates (the other patterns are
/// implied by x_i > 0), followed by the positivity facets themselves.
inline std::vector<Halfspace> l1_ball_halfspaces(int d, double radius,
                                                 const std::vector<int>& positive) {
  require(d <= 20, "l1 ball: dimension too large for facet enumeration");
  std::vector<bool> fixed(d, false);
  for (int i : positive) fixed[i] = true;
  std::vector<int> free_idx;
  for (int i = 0; i < d; ++i) {
    if (!fixed[i]) free_idx.push_back(i);
  }
  std::vector<Halfspace> hs;
  const std::size_t patterns = std::size_t{1} << free_idx.size();
  for (std::size_t mask = 0; mask < patterns; ++mask) {
    Vector s = Vector::Ones(d);
    for (std::size_t k = 0; k < free_idx.size(); ++k) {
      if (mask & (std::size_t{1} << k)) s(free_idx[k]) = -1.0;
    }
    hs.push_back({s, -radius});
  }
  for (int i : positive) {
    Vector e = Vector::Zero(d);
    e(i) = -1.0;
    hs.push_back({e, 0.0});
  }
  return hs;
}

/// The hemi-l1 ball { ||x||_1 < 1, x_{d-1} > 0 } as a convex polytope with
/// 2^(d-1) + 1 facets.
inline Domain hemi_l1_ball(int d) {
  require(d >= 1 && d <= 12, "hemi l1 ball: dimension must be in [1, 12]");
  return Domain::polytope(l1_ball_halfspaces(d, 1.0, {d - 1}));
}

// ---------------------------------------------------------------------------
// Membership

inline void check_point_dim(const Domain& domain, const VectorRef& x) {
  require(x.size() == domain.dim(),
          "dimension mismatch: domain is " + std::to_string(domain.dim()) +
              "-D, point is " + std::to_string(x.size()) + "-D");
}

namespace detail {

inline bool polygon_contains(const Polygon& poly, const Point2& p) {
  for (const auto& ring : poly.rings) {
    for (std::size_t i = 0; i < ring.size(); ++i) {
      const Point2& a = ring[i];
      const Point2& b = ring[(i + 1) % ring.size()];
      if (cross(b - a, p - a) == 0.0 && on_segment(a, b, p)) return false;
    }
  }
  bool inside = false;
  for (const auto& ring : poly.rings) {
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
      const Point2& vi = ring[i];
      const Point2& vj = ring[j];
      if ((vi.y() > p.y()) != (vj.y() > p.y()) &&
          p.x() < (vj.x() - vi.x()) * (p.y() - vi.y()) / (vj.y() - vi.y()) +
                      vi.x()) {
        inside = !inside;
      }
    }
  }
  return inside;
}

}  // namespace detail

/// True iff x lies in the open domain; boundary points are outside.
inline bool contains(const Domain& domain, const VectorRef& x) {
  check_point_dim(domain, x);
  if (!x.allFinite()) return false;
  if (const auto* poly = domain.as<ConvexPolytope>()) {
    for (const auto& h : poly->halfspaces) {
      if (!(h.a.dot(x) + h.b < 0.0)) return false;
    }
    return true;
  }
  if (const auto* pg = domain.as<Polygon>()) {
    return detail::polygon_contains(*pg, Point2(x(0), x(1)));
  }
  if (const auto* ball = domain.as<MetricBall>()) {
    for (int i : ball->positive) {
      if (!(x(i) > 0.0)) return false;
    }
    return ball->metric.norm(x) < ball->radius;
  }
  const auto& box = std::get<Box>(domain.shape());
  return (x.array() > box.lower.array()).all() &&
         (x.array() < box.upper.array()).all();
}

// ---------------------------------------------------------------------------
// Distance to the boundary

struct DistanceResult {
  double g = 0.0;
  Vector grad;
};

namespace detail {

// Closest point on the ellipsoid sum_i (z_i / e_i)^2 = 1 to an interior
// point u, both in principal coordinates. Bisection on the Lagrange
// multiplier t of z_i = e_i^2 u_i / (e_i^2 + t), with the degenerate branch
// t = -e_min^2 when the shortest axis carries no component of u.
inline Vector ellipsoid_closest(const Vector& e, const Vector& u) {
  const auto n = e.size();
  Eigen::Index i_min = 0;
  for (Eigen::Index i = 1; i < n; ++i) {
    if (e(i) < e(i_min)) i_min = i;
  }
  Eigen::Index j_star = -1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (u(i) != 0.0 && (j_star < 0 || e(i) < e(j_star))) j_star = i;
  }
  Vector z = Vector::Zero(n);
  if (j_star < 0) {
    z(i_min) = e(i_min);
    return z;
  }
  auto f = [&](double t) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (u(i) == 0.0) continue;
      const double r = e(i) * u(i) / (e(i) * e(i) + t);
      s += r * r;
    }
    return s - 1.0;
  };
  const double emin2 = e(i_min) * e(i_min);
  if (e(i_min) < e(j_star) && f(-emin2) <= 0.0) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (u(i) == 0.0 || e(i) == e(i_min)) continue;
      z(i) = e(i) * e(i) * u(i) / (e(i) * e(i) - emin2);
      s += (z(i) / e(i)) * (z(i) / e(i));
    }
    z(i_min) = e(i_min) * std::sqrt(std::max(0.0, 1.0 - s));
    return z;
  }
  const double ej = e(j_star);
  double lo = -ej * ej + ej * std::abs(u(j_star));
  double hi = 0.0;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double t = 0.5 * (lo + hi);
  for (Eigen::Index i = 0; i < n; ++i) {
    z(i) = e(i) * e(i) * u(i) / (e(i) * e(i) + t);
  }
  return z;
}

// Precomputed evaluation plan for one (domain, weight) pair.
class DistanceKernel {
 public:
  DistanceKernel(const Domain& domain, const WeightSpec& weight)
      : domain_(domain), weight_(weight) {
    weight_.validate();
    const int d = domain.dim();
    if (weight_.constant) return;
    const Metric& w = weight_.metric;
    if (w.kind() == Metric::Kind::Mahalanobis) {
      require(w.sigma().rows() == d, "weight metric dimension mismatch");
    }
    if (const auto* poly = domain.as<ConvexPolytope>()) {
      set_facets(poly->halfspaces);
    } else if (const auto* box = domain.as<Box>()) {
      set_facets(box_halfspaces(*box));
    } else if (const auto* pg = domain.as<Polygon>()) {
      require(w.kind() != Metric::Kind::L1,
              "unsupported pairing: l1 weight on a polygon domain");
      mode_ = Mode::Polygon;
      if (w.kind() == Metric::Kind::Mahalanobis) {
        to_y_ = w.cholesky().triangularView<Eigen::Lower>().solve(
            Matrix::Identity(2, 2));
      } else {
        to_y_ = Matrix::Identity(2, 2);
      }
      for (const auto& ring : pg->rings) {
        Ring r;
        for (const auto& p : ring) r.push_back(to_y_ * p);
        rings_y_.push_back(std::move(r));
      }
    } else {
      setup_ball(std::get<MetricBall>(domain.shape()));
    }
  }

  DistanceResult operator()(const VectorRef& x, std::size_t& primitive) const {
    check_point_dim(domain_, x);
    require(contains(domain_, x), "distance: point outside domain");
    const int d = domain_.dim();
    DistanceResult r;
    if (weight_.constant) {
      r.g = 1.0;
      r.grad = Vector::Zero(d);
      return r;
    }
    switch (mode_) {
      case Mode::Facets:
        r = facet_distance(x, primitive);
        break;
      case Mode::Polygon:
        r = polygon_distance(x, primitive);
        break;
      case Mode::BallSameMetric:
      case Mode::Ellipsoid:
        r = ball_distance(x, primitive);
        break;
    }
    if (weight_.cap) {
      const double c = *weight_.cap;
      const double cg = c * r.g;
      if (cg < 1.0) {
        r.g = cg;
        r.grad *= c;
      } else {
        r.g = 1.0;
        r.grad.setZero();
      }
    }
    return r;
  }

 private:
  enum class Mode { Facets, Polygon, BallSameMetric, Ellipsoid };

  void set_facets(const std::vector<Halfspace>& hs) {
    mode_ = Mode::Facets;
    facets_ = hs;
    inv_dual_.resize(hs.size());
    for (std::size_t j = 0; j < hs.size(); ++j) {
      inv_dual_[j] = 1.0 / weight_.metric.dual_norm(hs[j].a);
    }
  }

  void setup_ball(const MetricBall& ball) {
    const Metric& w = weight_.metric;
    const Metric& s = ball.metric;
    const int d = ball.dim;
    for (int i : ball.positive) {
      Vector e = Vector::Zero(d);
      e(i) = -1.0;
      facets_.push_back({e, 0.0});
      inv_dual_.push_back(1.0 / w.dual_norm(e));
    }
    if (s.kind() == Metric::Kind::L1) {
      if (w.kind() == Metric::Kind::L1) {
        mode_ = Mode::BallSameMetric;
        return;
      }
      // Any other weight metric: exact nearest-facet distance over the
      // enumerated l1 facets (positivity facets come last, as for balls).
      set_facets(l1_ball_halfspaces(d, ball.radius, ball.positive));
      return;
    }
    require(w.kind() != Metric::Kind::L1,
            "unsupported pairing: l1 weight on a euclidean/mahalanobis ball");
    if (w.same_as(s)) {
      mode_ = Mode::BallSameMetric;
      return;
    }
    // Work in y = L_w^-1 x where the weight metric is Euclidean; the ball
    // becomes the ellipsoid y' A y < r^2 with A = L_w' S^-1 L_w.
    mode_ = Mode::Ellipsoid;
    Matrix lw = Matrix::Identity(d, d);
    if (w.kind() == Metric::Kind::Mahalanobis) lw = w.cholesky();
    Matrix s_inv = Matrix::Identity(d, d);
    if (s.kind() == Metric::Kind::Mahalanobis) {
      s_inv = s.sigma().llt().solve(Matrix::Identity(d, d));
    }
    const Matrix a = lw.transpose() * s_inv * lw;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()));
    require(eig.info() == Eigen::Success, "ellipsoid eigen-decomposition failed");
    rotation_ = eig.eigenvectors();
    semi_axes_ = ball.radius * eig.eigenvalues().cwiseSqrt().cwiseInverse();
    to_y_ = lw.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
  }

  DistanceResult facet_distance(const VectorRef& x, std::size_t& primitive) const {
    DistanceResult r;
    r.g = std::numeric_limits<double>::infinity();
    std::size_t best = 0;
    for (std::size_t j = 0; j < facets_.size(); ++j) {
      const double dist = -(facets_[j].a.dot(x) + facets_[j].b) * inv_dual_[j];
      if (dist < r.g) {
        r.g = dist;
        best = j;
      }
    }
    primitive += facets_.size();
    r.grad = -facets_[best].a * inv_dual_[best];
    return r;
  }

  DistanceResult polygon_distance(const VectorRef& x, std::size_t& primitive) const {
    const Point2 y = to_y_ * Point2(x(0), x(1));
    double best2 = std::numeric_limits<double>::infinity();
    Point2 best_n = Point2::Zero();
    for (const auto& ring : rings_y_) {
      const std::size_t t_count = ring.size();
      for (std::size_t t = 0; t < t_count; ++t) {
        const Point2& p = ring[t];
        const Point2& q = ring[(t + 1) % t_count];
        const Point2 pq = p - q;
        const double alpha =
            std::clamp(pq.dot(y - q) / pq.squaredNorm(), 0.0, 1.0);
        const Point2 n = y - (alpha * p + (1.0 - alpha) * q);
        const double dist2 = n.squaredNorm();
        if (dist2 < best2) {
          best2 = dist2;
          best_n = n;
        }
      }
      primitive += t_count;
    }
    DistanceResult r;
    r.g = std::sqrt(best2);
    const Point2 grad_y = best_n / r.g;
    r.grad = to_y_.transpose() * grad_y;
    return r;
  }

  DistanceResult ball_distance(const VectorRef& x, std::size_t& primitive) const {
    const auto& ball = std::get<MetricBall>(domain_.shape());
    const int d = ball.dim;
    DistanceResult r;
    r.grad = Vector::Zero(d);
    if (mode_ == Mode::BallSameMetric) {
      const Metric& m = ball.metric;
      const double nx = m.norm(x);
      r.g = ball.radius - nx;
      switch (m.kind()) {
        case Metric::Kind::Euclidean:
          if (nx > 0.0) {
            r.grad = -x / nx;
          } else {
            r.grad(0) = -1.0;
          }
          break;
        case Metric::Kind::Mahalanobis:
          if (nx > 0.0) {
            r.grad = -m.sigma().llt().solve(Vector(x)) / nx;
          } else {
            r.grad(0) = -1.0 / std::sqrt(m.sigma()(0, 0));
          }
          break;
        case Metric::Kind::L1:
          for (int i = 0; i < d; ++i) r.grad(i) = x(i) < 0.0 ? 1.0 : -1.0;
          break;
      }
    } else {
      const Vector u = rotation_.transpose() * (to_y_ * x);
      const Vector z = ellipsoid_closest(semi_axes_, u);
      const Vector diff = u - z;
      r.g = diff.norm();
      r.grad = to_y_.transpose() * (rotation_ * (diff / r.g));
    }
    ++primitive;
    for (std::size_t j = 0; j < facets_.size(); ++j) {
      const double dist = -(facets_[j].a.dot(x) + facets_[j].b) * inv_dual_[j];
      if (dist < r.g) {
        r.g = dist;
        r.grad = -facets_[j].a * inv_dual_[j];
      }
    }
    primitive += facets_.size();
    return r;
  }

  const Domain& domain_;
  WeightSpec weight_;
  Mode mode_ = Mode::Facets;
  std::vector<Halfspace> facets_;
  std::vector<double> inv_dual_;
  std::vector<Ring> rings_y_;
  Matrix to_y_;
  Matrix rotation_;
  Vector semi_axes_;
};

}  // namespace detail

/// Weight g and its gradient at an interior point x.
inline DistanceResult distance(const Domain& domain, const WeightSpec& weight,
                               const VectorRef& x) {
  std::size_t primitive = 0;
  return detail::DistanceKernel(domain, weight)(x, primitive);
}

/// Per-sample, per-coordinate weights g_k(x_i) and partials d_k g_k(x_i).
/// The scalar weight is shared by every coordinate, so each row of `g` is
/// constant.
struct WeightTable {
  Matrix g;
  Matrix dg;
  int eval_count = 0;
  /// Facet or segment evaluations performed while building the table.
  std::size_t primitive_evals = 0;

  Eigen::Index rows() const { return g.rows(); }

  WeightTable scaled(double alpha) const {
    WeightTable t = *this;
    t.g *= alpha;
    t.dg *= alpha;
    return t;
  }
};

/// Evaluates the weight once for every row of `points` (n x d).
inline WeightTable distance_batch(const Domain& domain, const WeightSpec& weight,
                                  const Matrix& points) {
  require(points.cols() == domain.dim(), "distance_batch: dimension mismatch");
  detail::DistanceKernel kernel(domain, weight);
  WeightTable table;
  const auto n = points.rows();
  const auto d = points.cols();
  table.g.resize(n, d);
  table.dg.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector x = points.row(i).transpose();
    const auto r = kernel(x, table.primitive_evals);
    table.g.row(i).setConstant(r.g);
    table.dg.row(i) = r.grad.transpose();
  }
  table.eval_count = 1;
  return table;
}

// ---------------------------------------------------------------------------
// Bounding boxes

/// Axis-aligned box containing the closure of the domain. Tight for
/// polygons, boxes, balls and polytopes (the latter via one linear program
/// per coordinate bound).
inline Box bounding_box(const Domain& domain) {
  const int d = domain.dim();
  if (const auto* box = domain.as<Box>()) return *box;
  if (const auto* pg = domain.as<Polygon>()) {
    Vector lo = Vector::Constant(2, std::numeric_limits<double>::infinity());
    Vector hi = -lo;
    for (const auto& ring : pg->rings) {
      for (const auto& p : ring) {
        lo = lo.cwiseMin(Vector(p));
        hi = hi.cwiseMax(Vector(p));
      }
    }
    return Box{lo, hi};
  }
  if (const auto* ball = domain.as<MetricBall>()) {
    Vector ext(d);
    for (int i = 0; i < d; ++i) {
      switch (ball->metric.kind()) {
        case Metric::Kind::Mahalanobis:
          ext(i) = ball->radius * std::sqrt(ball->metric.sigma()(i, i));
          break;
        default:
          ext(i) = ball->radius;
      }
    }
    Vector lo = -ext;
    for (int i : ball->positive) lo(i) = 0.0;
    return Box{lo, ext};
  }
  // max +/- x_i over { A x <= -b } through the dual
  //   min -b'y  s.t.  A'y = +/- e_i,  y >= 0.
  const auto& hs = std::get<ConvexPolytope>(domain.shape()).halfspaces;
  const int m = static_cast<int>(hs.size());
  Matrix a(d, m);
  Vector cost(m);
  for (int j = 0; j < m; ++j) {
    a.col(j) = hs[j].a;
    cost(j) = -hs[j].b;
  }
  Vector lo(d), hi(d);
  for (int i = 0; i < d; ++i) {
    for (double sign : {1.0, -1.0}) {
      Vector rhs = Vector::Zero(d);
      rhs(i) = sign;
      const auto sol = lp::minimize(a, rhs, cost);
      require(sol.status == lp::Status::Optimal,
              "bounding_box: domain is unbounded");
      if (sign > 0) {
        hi(i) = sol.value;
      } else {
        lo(i) = -sol.value;
      }
    }
  }
  return Box{lo, hi};
}

inline double box_volume(const Box& box) {
  return (box.upper - box.lower).prod();
}

// ---------------------------------------------------------------------------
// Scalable polygon templates

enum class PolygonTemplate { Square, Disjoint };

/// Vertex sets parameterized by the size multiplier b:
///   square   {(-b,-b), (-b,b), (b,b), (b,-b)}
///   disjoint {(1-b,0.5-b), (1-b,0.5), (1+b,0.5), (1+b,0.5-b)} and
///            {(1-b,1.5), (1-b,1.5+b), (1+b,1.5+b), (1+b,1.5)}
/// The disjoint pair keeps the horizontal gap 0.5 < y < 1.5 for every b.
inline std::vector<Ring> scale_polygon(PolygonTemplate shape, double b) {
  require(std::isfinite(b) && b > 0.0, "scale_polygon: b must be positive");
  if (shape == PolygonTemplate::Square) {
    return {Ring{{-b, -b}, {-b, b}, {b, b}, {b, -b}}};
  }
  return {Ring{{1 - b, 0.5 - b}, {1 - b, 0.5}, {1 + b, 0.5}, {1 + b, 0.5 - b}},
          Ring{{1 - b, 1.5}, {1 - b, 1.5 + b}, {1 + b, 1.5 + b}, {1 + b, 1.5}}};
}

/// Non-convex 16-vertex star spanning roughly [-3, 3]^2, with its long arms
/// pointing at the diagonals. Used as the default observation window for the
/// four-component mixture experiment.
inline Ring star_polygon_preset() {
  Ring ring;
  const double pi = std::acos(-1.0);
  for (int k = 0; k < 16; ++k) {
    const double angle = pi / 4.0 + k * pi / 8.0;
    const double radius = (k % 2 == 0) ? 3.0 : 1.6;
    ring.emplace_back(radius * std::cos(angle), radius * std::sin(angle));
  }
  return ring;
}

}  // namespace truncsm

#endif  // TRUNCSM_GEOMETRY_HPP
