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

#ifndef TRUNCSM_DATA_HPP
#define TRUNCSM_DATA_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "common.hpp"
#include "geometry.hpp"
#include "models.hpp"

namespace truncsm {

using Rng = std::mt19937_64;

struct DatasetMeta {
  std::uint64_t seed = 0;
  std::string generator;
  std::size_t n_generated = 0;
  std::size_t n_kept = 0;
  std::size_t skipped = 0;  // unparsable rows on load
  std::size_t removed = 0;  // rows dropped by clip_to_domain
  /// Set when geographic coordinates were projected: x = lon cos(lat0), y = lat.
  std::optional<double> reference_latitude;
};

/// n points in R^d, one per row.
struct Dataset {
  Matrix points;
  DatasetMeta meta;

  Eigen::Index size() const { return points.rows(); }
  int dim() const { return static_cast<int>(points.cols()); }
  Vector mean() const { return points.colwise().mean().transpose(); }
};

inline nlohmann::json to_json(const DatasetMeta& m) {
  nlohmann::json j = {{"seed", m.seed},
                      {"generator", m.generator},
                      {"n_generated", m.n_generated},
                      {"n_kept", m.n_kept},
                      {"skipped", m.skipped},
                      {"removed", m.removed}};
  if (m.reference_latitude) {
    j["projection"] = {{"kind", "equirectangular"},
                       {"reference_latitude", *m.reference_latitude}};
  }
  return j;
}

/// One draw from the untruncated model: a Gaussian around theta, or for a
/// mixture a uniformly chosen component followed by a Gaussian draw.
inline Vector draw_untruncated(const ModelFamily& family, const VectorRef& theta,
                               Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int d = family.dim();
  Vector x(d);
  if (const auto* g = family.as<IsotropicGMM>()) {
    std::uniform_int_distribution<int> pick(0, g->components - 1);
    const int j = pick(rng);
    const double sd = std::sqrt(g->variance);
    for (int k = 0; k < d; ++k) x(k) = theta(j * d + k) + sd * normal(rng);
    return x;
  }
  for (int k = 0; k < d; ++k) x(k) = theta(k) + normal(rng);
  return x;
}

namespace detail {

inline Dataset pack(const std::vector<Vector>& kept, int d) {
  Dataset ds;
  ds.points.resize(static_cast<Eigen::Index>(kept.size()), d);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    ds.points.row(static_cast<Eigen::Index>(i)) = kept[i].transpose();
  }
  ds.meta.n_kept = kept.size();
  return ds;
}

}  // namespace detail

/// Draws `n_generated` points from the untruncated model and keeps those
/// inside the domain.
inline Dataset sample_truncated(const ModelFamily& family, const VectorRef& theta,
                                const Domain& domain, std::size_t n_generated,
                                std::uint64_t seed) {
  require(n_generated >= 1, "sample_truncated: n_generated must be positive");
  require(theta.size() == family.num_params(),
          "sample_truncated: parameter length mismatch");
  require(family.dim() == domain.dim(), "sample_truncated: dimension mismatch");
  Rng rng(seed);
  std::vector<Vector> kept;
  for (std::size_t i = 0; i < n_generated; ++i) {
    Vector x = draw_untruncated(family, theta, rng);
    if (contains(domain, x)) kept.push_back(std::move(x));
  }
  require(!kept.empty(), "sample_truncated: zero points retained");
  Dataset ds = detail::pack(kept, family.dim());
  ds.meta.seed = seed;
  ds.meta.generator = "truncated " + family.describe();
  ds.meta.n_generated = n_generated;
  return ds;
}

/// Keeps drawing from the untruncated model until `n_kept` points fall
/// inside the domain.
inline Dataset sample_truncated_kept(const ModelFamily& family,
                                     const VectorRef& theta, const Domain& domain,
                                     std::size_t n_kept, std::uint64_t seed,
                                     std::size_t max_draws = 500'000'000) {
  require(n_kept >= 1, "sample_truncated_kept: n_kept must be positive");
  require(theta.size() == family.num_params(),
          "sample_truncated_kept: parameter length mismatch");
  require(family.dim() == domain.dim(),
          "sample_truncated_kept: dimension mismatch");
  Rng rng(seed);
  std::vector<Vector> kept;
  kept.reserve(n_kept);
  std::size_t draws = 0;
  while (kept.size() < n_kept) {
    require(draws < max_draws, "sample_truncated_kept: draw budget exhausted");
    Vector x = draw_untruncated(family, theta, rng);
    ++draws;
    if (contains(domain, x)) kept.push_back(std::move(x));
  }
  Dataset ds = detail::pack(kept, family.dim());
  ds.meta.seed = seed;
  ds.meta.generator = "truncated " + family.describe();
  ds.meta.n_generated = draws;
  return ds;
}

/// Sampler of uniform points on a region containing the domain.
using UniformProposal = std::function<Vector(Rng&)>;

inline UniformProposal uniform_in_box(const Box& box) {
  return [box](Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector x(box.lower.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      x(k) = box.lower(k) + (box.upper(k) - box.lower(k)) * unif(rng);
    }
    return x;
  };
}

/// Uniform on { ||x||_1 < radius } via normalized exponential spacings and
/// random signs.
inline UniformProposal uniform_in_l1_ball(int d, double radius) {
  return [d, radius](Rng& rng) {
    std::exponential_distribution<double> expo(1.0);
    std::bernoulli_distribution coin(0.5);
    Vector e(d + 1);
    for (int k = 0; k <= d; ++k) e(k) = expo(rng);
    const double total = e.sum();
    Vector x(d);
    for (int k = 0; k < d; ++k) {
      x(k) = radius * e(k) / total * (coin(rng) ? 1.0 : -1.0);
    }
    return x;
  };
}

/// Exact truncated sampling for domains too small for plain rejection from
/// the model: uniform proposals on a superset of the domain, accepted with
/// probability p(x) (the unnormalized densities here never exceed 1).
inline Dataset sample_truncated_uniform(const ModelFamily& family,
                                        const VectorRef& theta,
                                        const Domain& domain, std::size_t n_kept,
                                        std::uint64_t seed,
                                        const UniformProposal& proposal,
                                        std::size_t max_draws = 500'000'000) {
  require(n_kept >= 1, "sample_truncated_uniform: n_kept must be positive");
  require(family.dim() == domain.dim(),
          "sample_truncated_uniform: dimension mismatch");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vector> kept;
  std::size_t draws = 0;
  while (kept.size() < n_kept) {
    require(draws < max_draws,
            "sample_truncated_uniform: draw budget exhausted");
    Vector x = proposal(rng);
    ++draws;
    const double u = unif(rng);
    if (!contains(domain, x)) continue;
    if (std::log(u) < log_density(family, theta, x)) kept.push_back(std::move(x));
  }
  Dataset ds = detail::pack(kept, family.dim());
  ds.meta.seed = seed;
  ds.meta.generator = "truncated " + family.describe() + " (uniform proposal)";
  ds.meta.n_generated = draws;
  return ds;
}

/// Drops points outside the domain (boundary points included).
inline Dataset clip_to_domain(const Dataset& data, const Domain& domain) {
  require(data.dim() == domain.dim(), "clip_to_domain: dimension mismatch");
  std::vector<Vector> kept;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    Vector x = data.points.row(i).transpose();
    if (contains(domain, x)) kept.push_back(std::move(x));
  }
  require(!kept.empty(), "clip_to_domain: all points removed");
  Dataset out = detail::pack(kept, data.dim());
  out.meta = data.meta;
  out.meta.removed = data.meta.removed + static_cast<std::size_t>(data.size()) - kept.size();
  out.meta.n_kept = kept.size();
  return out;
}

// ---------------------------------------------------------------------------
// Delimited text

namespace detail {

// Splits one CSV record; double quotes group fields and "" escapes a quote.
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_real(const std::string& text) {
  const std::string s = trim(text);
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (used != s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// Reads a point CSV with a header row. With a reference latitude the two
/// columns are treated as (lon, lat) and projected equirectangularly,
/// x = lon cos(lat0), y = lat; without one they are taken as planar (x, y).
/// Rows with a missing or non-numeric coordinate are skipped and counted.
inline Dataset load_points_csv(const std::string& path, const std::string& x_col,
                               const std::string& y_col,
                               std::optional<double> reference_latitude = {}) {
  std::ifstream in(path);
  require(in.good(), "load_points_csv: cannot read " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)),
          "load_points_csv: zero valid rows (empty file)");
  const auto header = detail::split_csv(line);
  int xi = -1, yi = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string h = detail::trim(header[i]);
    if (h == x_col) xi = static_cast<int>(i);
    if (h == y_col) yi = static_cast<int>(i);
  }
  require(xi >= 0 && yi >= 0,
          "load_points_csv: columns '" + x_col + "'/'" + y_col + "' not found");
  const double scale =
      reference_latitude ? std::cos(*reference_latitude * std::acos(-1.0) / 180.0)
                         : 1.0;
  std::vector<Vector> rows;
  std::size_t skipped = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv(line);
    const int need = std::max(xi, yi);
    std::optional<double> x, y;
    if (static_cast<int>(fields.size()) > need) {
      x = detail::parse_real(fields[xi]);
      y = detail::parse_real(fields[yi]);
    }
    if (!x || !y) {
      ++skipped;
      continue;
    }
    Vector p(2);
    p << *x * scale, *y;
    rows.push_back(std::move(p));
  }
  require(!rows.empty(), "load_points_csv: zero valid rows");
  Dataset ds = detail::pack(rows, 2);
  ds.meta.generator = "csv:" + path;
  ds.meta.n_generated = rows.size() + skipped;
  ds.meta.skipped = skipped;
  ds.meta.reference_latitude = reference_latitude;
  return ds;
}

/// Writes points as CSV (columns x0, x1, ...) at full precision, plus the
/// metadata as a JSON sidecar at `path + ".json"`.
inline void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "write_dataset_csv: cannot write " + path);
  for (int k = 0; k < data.dim(); ++k) {
    out << (k ? "," : "") << "x" << k;
  }
  out << "\n";
  char buf[40];
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (int k = 0; k < data.dim(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", data.points(i, k));
      out << (k ? "," : "") << buf;
    }
    out << "\n";
  }
  std::ofstream side(path + ".json");
  require(side.good(), "write_dataset_csv: cannot write sidecar");
  side << to_json(data.meta).dump(2) << "\n";
}

}  // namespace truncsm

#endif  // TRUNCSM_DATA_HPP
