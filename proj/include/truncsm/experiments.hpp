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

#ifndef TRUNCSM_EXPERIMENTS_HPP
#define TRUNCSM_EXPERIMENTS_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "baselines.hpp"
#include "data.hpp"
#include "estimator.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "matching.hpp"
#include "models.hpp"

namespace truncsm {

inline constexpr const char* kResultSchema = "truncsm-results/1";

inline const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids = {
      "gmm-polygon", "maha-vs-euclid", "capped-scaling",
      "l1-vs-l2",    "chicago",        "identity-check"};
  return ids;
}

struct ExperimentConfig {
  std::string experiment;
  std::vector<std::uint64_t> seeds;
  /// Sample-size grid. Generated draws for gmm-polygon, capped-scaling and
  /// the synthetic chicago stand-in; kept points otherwise.
  std::vector<std::size_t> n;
  std::vector<std::string> methods;
  std::vector<std::string> metrics;
  std::vector<double> caps;
  std::vector<std::size_t> particles;
  int restarts = 1;
  std::optional<std::string> domain_file;
  std::optional<std::string> points_file;
  /// Domain correlation grid for maha-vs-euclid; component standard
  /// deviation for chicago.
  std::vector<double> sigma;
  std::vector<double> b;
  std::vector<std::string> templates;
  std::vector<int> dims;
  std::string x_col = "lon";
  std::string y_col = "lat";
  std::string out;
  bool timing = false;
  bool zero_weight = false;
  double init_sd = 0.06;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["experiment"] = experiment;
    j["seeds"] = seeds;
    j["n"] = n;
    j["methods"] = methods;
    j["metrics"] = metrics;
    j["caps"] = caps;
    j["particles"] = particles;
    j["restarts"] = restarts;
    j["domain_file"] = domain_file ? nlohmann::json(*domain_file) : nlohmann::json();
    j["points_file"] = points_file ? nlohmann::json(*points_file) : nlohmann::json();
    j["sigma"] = sigma;
    j["b"] = b;
    j["templates"] = templates;
    j["dims"] = dims;
    j["x_col"] = x_col;
    j["y_col"] = y_col;
    j["zero_weight"] = zero_weight;
    j["init_sd"] = init_sd;
    return j;
  }
};

inline std::vector<std::uint64_t> seed_range(std::uint64_t first, std::uint64_t count) {
  std::vector<std::uint64_t> s(count);
  std::iota(s.begin(), s.end(), first);
  return s;
}

/// Defaults per experiment; command-line options override individual fields.
inline ExperimentConfig default_config(const std::string& id) {
  ExperimentConfig c;
  c.experiment = id;
  c.out = id + ".csv";
  c.metrics = {"euclidean"};
  if (id == "gmm-polygon") {
    c.seeds = seed_range(0, 10);
    c.n = {10000};
    c.methods = {"truncsm", "rjmle"};
    c.particles = {500000};
  } else if (id == "maha-vs-euclid") {
    c.seeds = seed_range(0, 50);
    c.n = {250, 1000, 4000};
    c.methods = {"truncsm"};
    c.metrics = {"euclidean", "mahalanobis"};
    c.sigma = {0.0, 0.3, 0.6, 0.9};
  } else if (id == "capped-scaling") {
    c.seeds = seed_range(0, 30);
    c.n = {1600};
    c.methods = {"truncsm"};
    c.caps = {0.1, 10.0, 100.0};
    c.b = {0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0};
    c.templates = {"square", "disjoint"};
  } else if (id == "l1-vs-l2") {
    c.seeds = seed_range(0, 50);
    c.n = {150};
    c.methods = {"truncsm"};
    c.metrics = {"l1", "euclidean"};
    c.dims = {1, 2, 4, 6, 8};
  } else if (id == "chicago") {
    c.seeds = seed_range(0, 50);
    c.n = {2000};
    c.methods = {"truncsm", "rjmle", "mle"};
    c.particles = {20000};
    c.restarts = 10;
  } else if (id == "identity-check") {
    c.seeds = seed_range(0, 10);
    c.n = {100000};
    c.methods = {"truncsm"};
  } else {
    throw Error("unknown experiment '" + id + "'");
  }
  return c;
}

/// One fitted configuration cell for one seed.
struct ResultRow {
  std::string experiment;
  std::string cell;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::string method;
  std::string weight;
  std::optional<double> error;
  int iterations = 0;
  std::optional<double> objective;
  std::string status;
  Vector estimate;
  std::map<std::string, double> extra;
  std::optional<double> wall_time_s;
};

/// A fitted mixture center from one restart (chicago only).
struct CenterRow {
  std::string method;
  std::uint64_t seed = 0;
  int restart = 0;
  int slot = 0;
  double x = 0.0;
  double y = 0.0;
  double objective = 0.0;
  std::string status;
};

struct ExperimentOutput {
  nlohmann::json config;
  std::vector<ResultRow> rows;
  std::vector<CenterRow> centers;
};

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + stream + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline bool is_weighted(const std::string& method) {
  return method == "truncsm" || method == "sm-constant";
}

inline Metric parse_metric(const std::string& name, const Matrix* sigma) {
  if (name == "euclidean") return Metric::euclidean();
  if (name == "l1") return Metric::l1();
  if (name == "mahalanobis") {
    require(sigma != nullptr,
            "metric 'mahalanobis' is only available in maha-vs-euclid");
    return Metric::mahalanobis(*sigma);
  }
  throw Error("unknown metric '" + name + "'");
}

/// TruncSM weights for the configured metric and cap grids.
inline std::vector<WeightSpec> weight_grid(const ExperimentConfig& cfg,
                                           const Matrix* sigma = nullptr) {
  std::vector<WeightSpec> out;
  for (const auto& m : cfg.metrics) {
    const Metric metric = parse_metric(m, sigma);
    if (cfg.caps.empty()) {
      out.push_back(WeightSpec::distance(metric));
    } else {
      for (double c : cfg.caps) out.push_back(WeightSpec::capped(c, metric));
    }
  }
  return out;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

struct MethodRun {
  FitReport report;
  double seconds = 0.0;
};

inline FitOptions fit_options(const ExperimentConfig& cfg, std::uint64_t seed) {
  FitOptions o;
  o.restarts = cfg.restarts;
  o.seed = derive_seed(seed, 1);
  o.init_sd = cfg.init_sd;
  return o;
}

inline MethodRun run_method(const std::string& method, const ModelFamily& family,
                            const Dataset& data, const Domain& domain,
                            const WeightSpec& weight, std::size_t particles,
                            std::uint64_t seed, const ExperimentConfig& cfg) {
  const FitOptions opts = fit_options(cfg, seed);
  Stopwatch clock;
  MethodRun run;
  if (method == "truncsm") {
    run.report = fit(family, data, domain, weight, opts);
  } else if (method == "sm-constant") {
    run.report = fit(family, data, domain, WeightSpec::unit(), opts);
  } else if (method == "rjmle") {
    run.report = fit_rjmle(family, data, domain, particles, derive_seed(seed, 2), opts);
  } else if (method == "mle") {
    run.report = fit_mle_untruncated(family, data, opts);
  } else {
    throw Error("unknown method '" + method + "'");
  }
  run.seconds = clock.seconds();
  return run;
}

inline ResultRow make_row(const ExperimentConfig& cfg, const std::string& cell,
                          std::uint64_t seed, const Dataset& data,
                          const std::string& method, const std::string& weight,
                          const MethodRun& run) {
  ResultRow r;
  r.experiment = cfg.experiment;
  r.cell = cell;
  r.seed = seed;
  r.n = static_cast<std::size_t>(data.size());
  r.method = method;
  r.weight = weight;
  r.iterations = run.report.iterations;
  r.objective = run.report.objective;
  r.status = to_string(run.report.status);
  r.estimate = run.report.theta_hat;
  if (cfg.timing) r.wall_time_s = run.seconds;
  return r;
}

inline ResultRow failed_row(const ExperimentConfig& cfg, const std::string& cell,
                            std::uint64_t seed, const std::string& method,
                            const std::string& weight, const std::string& what) {
  ResultRow r;
  r.experiment = cfg.experiment;
  r.cell = cell;
  r.seed = seed;
  r.method = method;
  r.weight = weight;
  r.status = "failed: " + what;
  return r;
}

inline std::string weight_label(const std::string& method, const WeightSpec& w) {
  if (method == "truncsm") return w.describe();
  if (method == "sm-constant") return "constant";
  return "-";
}

/// Runs every method (and every weight for TruncSM) on one dataset.
template <class Score>
void fit_all(const ExperimentConfig& cfg, const std::string& cell, std::uint64_t seed,
             const ModelFamily& family, const Dataset& data, const Domain& domain,
             const std::vector<WeightSpec>& weights, Score&& score,
             std::vector<ResultRow>& rows) {
  for (const auto& method : cfg.methods) {
    std::vector<std::pair<std::string, WeightSpec>> variants;
    std::vector<std::size_t> particle_grid = {0};
    if (method == "truncsm") {
      for (const auto& w : weights) variants.emplace_back(w.describe(), w);
    } else {
      variants.emplace_back(weight_label(method, WeightSpec::unit()), WeightSpec::unit());
      if (method == "rjmle") particle_grid = cfg.particles;
    }
    for (std::size_t particles : particle_grid) {
      for (const auto& [label, w] : variants) {
        const std::string c =
            method == "rjmle" ? cell + ";particles=" + std::to_string(particles) : cell;
        try {
          const MethodRun run =
              run_method(method, family, data, domain, w, particles, seed, cfg);
          ResultRow row = make_row(cfg, c, seed, data, method, label, run);
          score(row, w, run.report);
          rows.push_back(std::move(row));
        } catch (const Error& e) {
          rows.push_back(failed_row(cfg, c, seed, method, label, e.what()));
        }
      }
    }
  }
}

inline double mixture_error(const Vector& est, const Vector& truth, int d,
                            std::map<std::string, double>& extra) {
  const CenterMatch m = match_centers(as_centers(est, d), as_centers(truth, d));
  extra["mean_matched"] = m.total / static_cast<double>(m.distances.size());
  return m.max;
}

}  // namespace detail

/// Four-component mixture with centers (2,2), (-2,2), (-2,-2), (2,-2)
/// observed on a non-convex polygon.
inline ExperimentOutput run_gmm_polygon(const ExperimentConfig& cfg) {
  ExperimentOutput out;
  out.config = cfg.to_json();
  const auto family = ModelFamily::isotropic_gmm(2, 4, 1.0);
  Vector truth(8);
  truth << 2, 2, -2, 2, -2, -2, 2, -2;
  const Domain domain = cfg.domain_file ? Domain::polygon(load_polygon_file(*cfg.domain_file))
                                        : Domain::polygon(star_polygon_preset());
  const auto weights = detail::weight_grid(cfg);
  for (std::size_t n : cfg.n) {
    const std::string cell = "n_generated=" + std::to_string(n);
    for (std::uint64_t seed : cfg.seeds) {
      const Dataset data = sample_truncated(family, truth, domain, n, seed);
      detail::fit_all(cfg, cell, seed, family, data, domain, weights,
                      [&](ResultRow& row, const WeightSpec&, const FitReport& rep) {
                        row.error = detail::mixture_error(rep.theta_hat, truth, 2, row.extra);
                        if (rep.normalizer_evals > 0) {
                          row.extra["normalizer_evals"] =
                              static_cast<double>(rep.normalizer_evals);
                        }
                        row.extra["weight_evals"] = rep.weight_evals;
                      },
                      out.rows);
    }
  }
  return out;
}

/// Gaussian mean on the ellipse x' S^-1 x < 1 with S = [[1, -s], [-s, 1]].
inline ExperimentOutput run_maha_vs_euclid(const ExperimentConfig& cfg) {
  ExperimentOutput out;
  out.config = cfg.to_json();
  const auto family = ModelFamily::gaussian_mean(2);
  const Vector truth = Vector::Constant(2, 0.5);
  for (double s : cfg.sigma) {
    require(std::isfinite(s) && s >= 0.0 && s < 1.0,
            "maha-vs-euclid: sigma must lie in [0, 1)");
    Matrix cov(2, 2);
    cov << 1.0, -s, -s, 1.0;
    const Domain domain = Domain::metric_ball(Metric::mahalanobis(cov), 1.0, 2);
    const auto weights = detail::weight_grid(cfg, &cov);
    for (std::size_t n : cfg.n) {
      const std::string cell = "sigma=" + detail::fmt(s) + ";n=" + std::to_string(n);
      for (std::uint64_t seed : cfg.seeds) {
        const Dataset data = sample_truncated_kept(family, truth, domain, n, seed);
        detail::fit_all(cfg, cell, seed, family, data, domain, weights,
                        [&](ResultRow& row, const WeightSpec&, const FitReport& rep) {
                          row.error = (rep.theta_hat - truth).norm();
                        },
                        out.rows);
      }
    }
  }
  return out;
}

/// Gaussian mean with capped weights on square and two-rectangle domains
/// scaled by b.
inline ExperimentOutput run_capped_scaling(const ExperimentConfig& cfg) {
  ExperimentOutput out;
  out.config = cfg.to_json();
  const auto family = ModelFamily::gaussian_mean(2);
  const Vector truth = Vector::Constant(2, 0.5);
  const auto weights = detail::weight_grid(cfg);
  for (const auto& name : cfg.templates) {
    PolygonTemplate shape;
    if (name == "square") {
      shape = PolygonTemplate::Square;
    } else if (name == "disjoint") {
      shape = PolygonTemplate::Disjoint;
    } else {
      throw Error("capped-scaling: unknown template '" + name + "'");
    }
    for (double b : cfg.b) {
      const Domain domain = Domain::polygon(scale_polygon(shape, b));
      for (std::size_t n : cfg.n) {
        const std::string cell = "template=" + name + ";b=" + detail::fmt(b) +
                                 ";n_generated=" + std::to_string(n);
        for (std::uint64_t seed : cfg.seeds) {
          Dataset data;
          try {
            data = sample_truncated(family, truth, domain, n, seed);
          } catch (const Error& e) {
            out.rows.push_back(detail::failed_row(cfg, cell, seed, "-", "-", e.what()));
            continue;
          }
          const WeightTable g0 = distance_batch(domain, WeightSpec::distance(), data.points);
          detail::fit_all(
              cfg, cell, seed, family, data, domain, weights,
              [&](ResultRow& row, const WeightSpec& w, const FitReport& rep) {
                row.error = (rep.theta_hat - truth).norm();
                if (row.method == "truncsm" && w.cap) {
                  const double c = *w.cap;
                  const auto capped = (g0.g.col(0).array() * c >= 1.0).count();
                  row.extra["capped_fraction"] =
                      static_cast<double>(capped) / static_cast<double>(data.size());
                }
              },
              out.rows);
        }
      }
    }
  }
  return out;
}

/// Gaussian mean 0.5 * 1_d on { ||x||_1 < 1, x_d > 0 } with l1 and l2 weights.
inline ExperimentOutput run_l1_vs_l2(const ExperimentConfig& cfg) {
  ExperimentOutput out;
  out.config = cfg.to_json();
  for (int d : cfg.dims) {
    require(d >= 1 && d <= 12, "l1-vs-l2: dimension must lie in [1, 12]");
    const auto family = ModelFamily::gaussian_mean(d);
    const Vector truth = Vector::Constant(d, 0.5);
    const Domain domain = hemi_l1_ball(d);
    const auto weights = detail::weight_grid(cfg);
    for (std::size_t n : cfg.n) {
      const std::string cell = "d=" + std::to_string(d) + ";n=" + std::to_string(n);
      for (std::uint64_t seed : cfg.seeds) {
        const Dataset data = sample_truncated_uniform(family, truth, domain, n, seed,
                                                      uniform_in_l1_ball(d, 1.0));
        detail::fit_all(cfg, cell, seed, family, data, domain, weights,
                        [&](ResultRow& row, const WeightSpec&, const FitReport& rep) {
                          row.error = (rep.theta_hat - truth).norm();
                        },
                        out.rows);
      }
    }
  }
  return out;
}

namespace detail {

/// Two-center mixture observed east of x = 0 with both true centers just
/// west of the border.
inline Ring western_standin_ring() {
  return {Point2(0.0, -4.0), Point2(3.0, -4.0), Point2(3.0, 4.0), Point2(0.0, 4.0)};
}

inline Vector western_standin_truth() {
  Vector t(4);
  t << -0.5, 1.5, -0.5, -1.5;
  return t;
}

/// Centers of one estimate ordered north to south, so restarts that differ
/// only by a label swap line up.
inline Matrix ordered_centers(const Vector& theta) {
  Matrix c = as_centers(theta, 2);
  std::vector<int> idx(static_cast<std::size_t>(c.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return c(a, 1) > c(b, 1); });
  Matrix out(c.rows(), 2);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = c.row(idx[i]);
  }
  return out;
}

/// Largest per-center spread sqrt(var_x + var_y) across restarts.
inline double restart_spread(const std::vector<Vector>& thetas) {
  if (thetas.size() < 2) return 0.0;
  const Eigen::Index k = as_centers(thetas.front(), 2).rows();
  double worst = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    Vector mean = Vector::Zero(2);
    for (const auto& t : thetas) mean += ordered_centers(t).row(j).transpose();
    mean /= static_cast<double>(thetas.size());
    double ss = 0.0;
    for (const auto& t : thetas) {
      ss += (ordered_centers(t).row(j).transpose() - mean).squaredNorm();
    }
    worst = std::max(worst, std::sqrt(ss / static_cast<double>(thetas.size() - 1)));
  }
  return worst;
}

}  // namespace detail

/// Two-center mixture with fixed variance on a city-boundary polygon, or on
/// a synthetic western-truncation stand-in when no points file is given.
inline ExperimentOutput run_chicago(const ExperimentConfig& cfg) {
  ExperimentOutput out;
  out.config = cfg.to_json();
  const bool real = cfg.points_file.has_value();
  require(!real || cfg.domain_file.has_value(),
          "chicago: --points-file requires --domain-file");
  require(!real || cfg.sigma.size() == 1,
          "chicago: real data requires a single --sigma (component standard deviation)");
  require(cfg.sigma.size() <= 1, "chicago: --sigma takes one value");
  const double sd = cfg.sigma.empty() ? 1.0 : cfg.sigma.front();
  require(std::isfinite(sd) && sd > 0.0, "chicago: sigma must be positive");
  const auto family = ModelFamily::isotropic_gmm(2, 2, sd * sd);

  std::optional<Vector> truth;
  Domain domain = Domain::polygon(detail::western_standin_ring());
  std::optional<Dataset> real_data;
  if (real) {
    const auto rings = load_polygon_file(*cfg.domain_file);
    const double lat0 = polygon_centroid(rings)(1);
    domain = Domain::polygon(project_rings(rings, lat0));
    real_data = clip_to_domain(load_points_csv(*cfg.points_file, cfg.x_col, cfg.y_col, lat0),
                               domain);
  } else if (cfg.domain_file) {
    domain = Domain::polygon(load_polygon_file(*cfg.domain_file));
    truth = detail::western_standin_truth();
  } else {
    truth = detail::western_standin_truth();
  }
  const Box box = bounding_box(domain);
  const double diag = (box.upper - box.lower).norm();
  const auto weights = detail::weight_grid(cfg);

  auto score = [&](ResultRow& row, const WeightSpec&, const FitReport& rep) {
    if (truth) row.error = detail::mixture_error(rep.theta_hat, *truth, 2, row.extra);
    const Matrix c = as_centers(rep.theta_hat, 2);
    row.extra["mean_x"] = c.col(0).mean();
    row.extra["bbox_diag"] = diag;
    row.extra["restart_sd"] = detail::restart_spread(rep.restart_thetas);
    std::size_t outside = 0;
    for (std::size_t r = 0; r < rep.restart_thetas.size(); ++r) {
      const Matrix rc = detail::ordered_centers(rep.restart_thetas[r]);
      bool any_out = false;
      for (Eigen::Index j = 0; j < rc.rows(); ++j) {
        any_out = any_out || !contains(domain, rc.row(j).transpose());
        out.centers.push_back({row.method, row.seed, static_cast<int>(r), static_cast<int>(j),
                               rc(j, 0), rc(j, 1), rep.restarts[r],
                               to_string(rep.restart_status[r])});
      }
      if (any_out) ++outside;
    }
    row.extra["outside_fraction"] =
        static_cast<double>(outside) / static_cast<double>(rep.restart_thetas.size());
  };

  if (real) {
    for (std::uint64_t seed : cfg.seeds) {
      detail::fit_all(cfg, "real", seed, family, *real_data, domain, weights, score, out.rows);
    }
    return out;
  }
  for (std::size_t n : cfg.n) {
    const std::string cell = "synthetic;n_generated=" + std::to_string(n);
    for (std::uint64_t seed : cfg.seeds) {
      const Dataset data = sample_truncated(family, *truth, domain, n, seed);
      detail::fit_all(cfg, cell, seed, family, data, domain, weights, score, out.rows);
    }
  }
  return out;
}

/// Monte Carlo check of the integration-by-parts identity for a truncated
/// standard Gaussian on the unit square, evaluated at theta = (0.2, 0.2).
inline ExperimentOutput run_identity_check(const ExperimentConfig& cfg) {
  ExperimentOutput out;
  out.config = cfg.to_json();
  const auto family = ModelFamily::gaussian_mean(2);
  const Domain domain = Domain::box(Vector::Zero(2), Vector::Ones(2));
  const Vector truth = Vector::Zero(2);
  const Vector theta = Vector::Constant(2, 0.2);
  auto score = [](const Vector& x) -> Vector { return -x; };
  std::vector<WeightSpec> weights = detail::weight_grid(cfg);
  for (std::size_t n : cfg.n) {
    const std::string cell = "n=" + std::to_string(n);
    for (std::uint64_t seed : cfg.seeds) {
      const Dataset data = sample_truncated_kept(family, truth, domain, n, seed);
      for (const auto& w : weights) {
        detail::Stopwatch clock;
        WeightTable table = distance_batch(domain, w, data.points);
        std::string label = w.describe();
        if (cfg.zero_weight) {
          table.g.setZero();
          table.dg.setZero();
          label = "zero";
        }
        const IdentityCheck chk = ibp_identity_check(family, theta, data, table, score);
        ResultRow row;
        row.experiment = cfg.experiment;
        row.cell = cell;
        row.seed = seed;
        row.n = static_cast<std::size_t>(data.size());
        row.method = "identity";
        row.weight = label;
        row.status = "ok";
        row.estimate = theta;
        row.extra["lhs"] = chk.lhs;
        row.extra["rhs"] = chk.rhs;
        row.extra["std_error"] = chk.std_error;
        row.extra["zscore"] = chk.zscore;
        if (cfg.timing) row.wall_time_s = clock.seconds();
        out.rows.push_back(std::move(row));
      }
    }
  }
  return out;
}

inline void validate(const ExperimentConfig& cfg) {
  const auto& ids = experiment_ids();
  require(std::find(ids.begin(), ids.end(), cfg.experiment) != ids.end(),
          "unknown experiment '" + cfg.experiment + "'");
  require(!cfg.seeds.empty(), "at least one seed is required");
  require(!cfg.n.empty(), "at least one sample size is required");
  for (std::size_t n : cfg.n) require(n >= 1, "sample sizes must be positive");
  require(cfg.restarts >= 1, "restarts must be positive");
  require(std::isfinite(cfg.init_sd) && cfg.init_sd >= 0.0,
          "init_sd must be non-negative");
  static const std::vector<std::string> methods = {"truncsm", "rjmle", "mle", "sm-constant"};
  for (const auto& m : cfg.methods) {
    require(std::find(methods.begin(), methods.end(), m) != methods.end(),
            "unknown method '" + m + "'");
  }
  if (cfg.experiment != "identity-check") {
    require(!cfg.methods.empty(), "at least one method is required");
  }
  const bool wants_rjmle =
      std::find(cfg.methods.begin(), cfg.methods.end(), "rjmle") != cfg.methods.end();
  if (wants_rjmle) {
    require(!cfg.particles.empty(), "rjmle needs a particle count");
    for (std::size_t p : cfg.particles) require(p >= 1, "particle counts must be positive");
  }
  require(!cfg.metrics.empty(), "at least one metric is required");
  for (double c : cfg.caps) require(std::isfinite(c) && c > 0.0, "caps must be positive");
  const bool polygon_source = cfg.experiment == "gmm-polygon" || cfg.experiment == "chicago";
  require(!cfg.domain_file || polygon_source,
          "--domain-file is only used by gmm-polygon and chicago");
  require(!cfg.points_file || cfg.experiment == "chicago",
          "--points-file is only used by chicago");
  require(!cfg.zero_weight || cfg.experiment == "identity-check",
          "--zero-weight is only used by identity-check");
  if (cfg.experiment == "maha-vs-euclid") require(!cfg.sigma.empty(), "sigma grid is empty");
  if (cfg.experiment == "capped-scaling") {
    require(!cfg.b.empty() && !cfg.templates.empty(), "capped-scaling needs b and templates");
  }
  if (cfg.experiment == "l1-vs-l2") require(!cfg.dims.empty(), "dimension grid is empty");
  require(!cfg.out.empty(), "output path is empty");
}

inline ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  if (cfg.experiment == "gmm-polygon") return run_gmm_polygon(cfg);
  if (cfg.experiment == "maha-vs-euclid") return run_maha_vs_euclid(cfg);
  if (cfg.experiment == "capped-scaling") return run_capped_scaling(cfg);
  if (cfg.experiment == "l1-vs-l2") return run_l1_vs_l2(cfg);
  if (cfg.experiment == "chicago") return run_chicago(cfg);
  return run_identity_check(cfg);
}

// ---------------------------------------------------------------------------
// Result files

inline const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> cols = {
      "experiment", "cell",      "seed",   "n",        "method",
      "weight",     "error",     "iterations", "objective", "status",
      "estimate",   "extra",     "wall_time_s"};
  return cols;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

inline std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

inline std::string join_vector(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v(i));
  return s;
}

inline std::string join_extra(const std::map<std::string, double>& m) {
  std::string s;
  for (const auto& [k, v] : m) s += (s.empty() ? "" : ";") + k + "=" + fmt(v);
  return s;
}

inline void write_header(std::ostream& os, const nlohmann::json& config,
                         const std::string& kind) {
  nlohmann::json head;
  head["schema"] = kResultSchema;
  head["file"] = kind;
  os << "# " << head.dump() << "\n";
  os << "# " << config.dump() << "\n";
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace detail

struct SummaryRow {
  std::string cell;
  std::string method;
  std::string weight;
  std::size_t count = 0;
  double mean_error = 0.0;
  double sd_error = 0.0;
  double median_error = 0.0;
  std::map<std::string, double> extra_median;
};

/// Error mean, sd and median per (cell, method, weight), in first-seen order.
inline std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  std::vector<SummaryRow> out;
  std::vector<std::vector<double>> errors;
  std::vector<std::map<std::string, std::vector<double>>> extras;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SummaryRow& s) {
      return s.cell == r.cell && s.method == r.method && s.weight == r.weight;
    });
    std::size_t idx;
    if (it == out.end()) {
      out.push_back({r.cell, r.method, r.weight, 0, 0.0, 0.0, 0.0, {}});
      errors.emplace_back();
      extras.emplace_back();
      idx = out.size() - 1;
    } else {
      idx = static_cast<std::size_t>(it - out.begin());
    }
    ++out[idx].count;
    if (r.error) errors[idx].push_back(*r.error);
    for (const auto& [k, v] : r.extra) extras[idx][k].push_back(v);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& e = errors[i];
    if (!e.empty()) {
      const double mean = std::accumulate(e.begin(), e.end(), 0.0) / e.size();
      double ss = 0.0;
      for (double x : e) ss += (x - mean) * (x - mean);
      out[i].mean_error = mean;
      out[i].sd_error = e.size() > 1 ? std::sqrt(ss / (e.size() - 1)) : 0.0;
      out[i].median_error = detail::median(e);
    } else {
      out[i].mean_error = out[i].sd_error = out[i].median_error = std::nan("");
    }
    for (const auto& [k, v] : extras[i]) out[i].extra_median[k] = detail::median(v);
  }
  return out;
}

inline std::string summary_path(const std::string& out) { return out + ".summary.csv"; }
inline std::string centers_path(const std::string& out) { return out + ".centers.csv"; }

/// Writes the result CSV, the per-cell summary and, for chicago, the
/// per-restart centers.
inline void write_outputs(const ExperimentConfig& cfg, const ExperimentOutput& result) {
  using detail::csv_field;
  using detail::fmt;
  std::ofstream os(cfg.out);
  require(os.good(), "cannot write " + cfg.out);
  detail::write_header(os, result.config, "results");
  const auto& cols = result_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  for (const auto& r : result.rows) {
    os << csv_field(r.experiment) << ',' << csv_field(r.cell) << ',' << r.seed << ','
       << r.n << ',' << csv_field(r.method) << ',' << csv_field(r.weight) << ','
       << detail::opt(r.error) << ',' << r.iterations << ',' << detail::opt(r.objective)
       << ',' << csv_field(r.status) << ',' << detail::join_vector(r.estimate) << ','
       << csv_field(detail::join_extra(r.extra)) << ',' << detail::opt(r.wall_time_s)
       << "\n";
  }
  require(os.good(), "write failed for " + cfg.out);

  std::ofstream ss(summary_path(cfg.out));
  require(ss.good(), "cannot write " + summary_path(cfg.out));
  detail::write_header(ss, result.config, "summary");
  ss << "experiment,cell,method,weight,count,mean_error,sd_error,median_error,extra_median\n";
  for (const auto& s : summarize(result.rows)) {
    auto num = [](double v) { return std::isnan(v) ? std::string() : fmt(v); };
    ss << csv_field(cfg.experiment) << ',' << csv_field(s.cell) << ',' << csv_field(s.method)
       << ',' << csv_field(s.weight) << ',' << s.count << ',' << num(s.mean_error) << ','
       << num(s.sd_error) << ',' << num(s.median_error) << ','
       << csv_field(detail::join_extra(s.extra_median)) << "\n";
  }

  if (cfg.experiment != "chicago") return;
  std::ofstream cs(centers_path(cfg.out));
  require(cs.good(), "cannot write " + centers_path(cfg.out));
  detail::write_header(cs, result.config, "centers");
  cs << "method,seed,restart,slot,x,y,objective,status\n";
  for (const auto& c : result.centers) {
    cs << c.method << ',' << c.seed << ',' << c.restart << ',' << c.slot << ',' << fmt(c.x)
       << ',' << fmt(c.y) << ',' << fmt(c.objective) << ',' << c.status << "\n";
  }
}

}  // namespace truncsm

#endif  // TRUNCSM_EXPERIMENTS_HPP
