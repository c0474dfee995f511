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

#ifndef TRUNCSM_IO_HPP
#define TRUNCSM_IO_HPP

// Plain-text domain files.
//
//   polygon:   one "x,y" vertex per line, closure implicit; a blank line
//              starts a new ring
//   halfspace: one "a_1,...,a_d,b" per line for <a, x> + b < 0
//
// Lines starting with '#' are ignored in both.

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "data.hpp"
#include "geometry.hpp"

namespace truncsm {

namespace detail {

inline std::vector<double> parse_row(const std::string& line, const std::string& path,
                                     int line_no) {
  std::vector<double> out;
  for (const auto& field : split_csv(line)) {
    const auto v = parse_real(field);
    require(v.has_value(), path + ":" + std::to_string(line_no) +
                               ": expected a number, got '" + trim(field) + "'");
    out.push_back(*v);
  }
  return out;
}

}  // namespace detail

inline std::vector<Ring> load_polygon_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot read polygon file " + path);
  std::vector<Ring> rings(1);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (!t.empty() && t[0] == '#') continue;
    if (t.empty()) {
      if (!rings.back().empty()) rings.emplace_back();
      continue;
    }
    const auto row = detail::parse_row(t, path, line_no);
    require(row.size() == 2, path + ":" + std::to_string(line_no) +
                                 ": expected 'x,y'");
    rings.back().emplace_back(row[0], row[1]);
  }
  if (rings.back().empty()) rings.pop_back();
  require(!rings.empty(), "polygon file " + path + " has no vertices");
  return rings;
}

inline std::vector<Halfspace> load_halfspace_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot read halfspace file " + path);
  std::vector<Halfspace> hs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto row = detail::parse_row(t, path, line_no);
    require(row.size() >= 2, path + ":" + std::to_string(line_no) +
                                 ": expected 'a_1,...,a_d,b'");
    Halfspace h;
    h.a = Eigen::Map<const Vector>(row.data(), static_cast<Eigen::Index>(row.size() - 1));
    h.b = row.back();
    require(hs.empty() || hs.front().a.size() == h.a.size(),
            path + ":" + std::to_string(line_no) + ": inconsistent dimension");
    hs.push_back(std::move(h));
  }
  require(!hs.empty(), "halfspace file " + path + " is empty");
  return hs;
}

/// Area-weighted centroid of the rings (signed areas, so holes subtract).
inline Point2 polygon_centroid(const std::vector<Ring>& rings) {
  double area = 0.0;
  Point2 c = Point2::Zero();
  for (const auto& ring : rings) {
    for (std::size_t i = 0; i < ring.size(); ++i) {
      const Point2& p = ring[i];
      const Point2& q = ring[(i + 1) % ring.size()];
      const double w = detail::cross(p, q);
      area += w;
      c += w * (p + q);
    }
  }
  require(area != 0.0, "polygon_centroid: zero area");
  return c / (3.0 * area);
}

/// Equirectangular projection of (lon, lat) vertices about a reference
/// latitude, matching load_points_csv.
inline std::vector<Ring> project_rings(std::vector<Ring> rings, double lat0) {
  const double scale = std::cos(lat0 * std::acos(-1.0) / 180.0);
  for (auto& ring : rings) {
    for (auto& p : ring) p.x() *= scale;
  }
  return rings;
}

}  // namespace truncsm

#endif  // TRUNCSM_IO_HPP
