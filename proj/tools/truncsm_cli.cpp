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

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <truncsm/experiments.hpp>

namespace {

/// "0-49" or "1,4,7" or a mix such as "0-4,10".
std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = truncsm::detail::trim(text.substr(pos, comma - pos));
    truncsm::require(!item.empty(), "empty entry in seed list '" + text + "'");
    const std::size_t dash = item.find('-');
    try {
      std::size_t used = 0;
      if (dash == std::string::npos) {
        out.push_back(std::stoull(item, &used));
        truncsm::require(used == item.size(), "bad seed '" + item + "'");
      } else {
        const std::string lo_text = item.substr(0, dash);
        const std::string hi_text = item.substr(dash + 1);
        const std::uint64_t lo = std::stoull(lo_text, &used);
        truncsm::require(used == lo_text.size(), "bad seed range '" + item + "'");
        const std::uint64_t hi = std::stoull(hi_text, &used);
        truncsm::require(used == hi_text.size() && lo <= hi, "bad seed range '" + item + "'");
        for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw truncsm::Error("bad seed entry '" + item + "'");
    }
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Truncated score matching experiments"};
  app.set_version_flag("--version", std::string("truncsm ") + truncsm::kResultSchema);

  std::string experiment;
  std::string seeds_text;
  std::vector<std::size_t> n;
  std::vector<std::string> methods, metrics, templates;
  std::vector<double> caps, sigma, b;
  std::vector<std::size_t> particles;
  std::vector<int> dims;
  int restarts = 0;
  std::string domain_file, points_file, out, x_col, y_col;
  double init_sd = -1.0;
  bool timing = false, zero_weight = false;

  std::string ids;
  for (const auto& id : truncsm::experiment_ids()) ids += (ids.empty() ? "" : ", ") + id;
  app.add_option("-e,--experiment", experiment, "Experiment id: " + ids)->required();
  app.add_option("--seeds,--seed", seeds_text, "Seeds, e.g. 7, 0-49 or 1,2,5");
  app.add_option("--n", n, "Sample size grid")->delimiter(',');
  app.add_option("--method", methods, "truncsm, rjmle, mle, sm-constant")->delimiter(',');
  app.add_option("--metric", metrics, "euclidean, mahalanobis, l1")->delimiter(',');
  app.add_option("--cap", caps, "Cap constants c for min(1, c*g)")->delimiter(',');
  app.add_option("--particles", particles, "Normalizer particles for rjmle")->delimiter(',');
  app.add_option("--restarts", restarts, "Random restarts per fit");
  app.add_option("--domain-file", domain_file, "Polygon vertex file (x,y per line)");
  app.add_option("--points-file", points_file, "Point CSV for chicago");
  app.add_option("--sigma", sigma,
                 "Domain correlation grid (maha-vs-euclid) or component sd (chicago)")
      ->delimiter(',');
  app.add_option("--b", b, "Template scale grid (capped-scaling)")->delimiter(',');
  app.add_option("--template", templates, "square, disjoint")->delimiter(',');
  app.add_option("--dim", dims, "Dimension grid (l1-vs-l2)")->delimiter(',');
  app.add_option("--x-col", x_col, "Longitude/x column of the points file");
  app.add_option("--y-col", y_col, "Latitude/y column of the points file");
  app.add_option("--init-sd", init_sd, "Standard deviation of restart perturbations");
  app.add_option("-o,--out", out, "Result CSV path");
  app.add_flag("--timing", timing, "Record wall time per fit");
  app.add_flag("--zero-weight", zero_weight, "identity-check with g = 0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    truncsm::ExperimentConfig cfg = truncsm::default_config(experiment);
    if (!seeds_text.empty()) cfg.seeds = parse_seed_list(seeds_text);
    if (!n.empty()) cfg.n = n;
    if (!methods.empty()) cfg.methods = methods;
    if (!metrics.empty()) cfg.metrics = metrics;
    if (!caps.empty()) cfg.caps = caps;
    if (!particles.empty()) cfg.particles = particles;
    if (app.count("--restarts")) cfg.restarts = restarts;
    if (!domain_file.empty()) cfg.domain_file = domain_file;
    if (!points_file.empty()) cfg.points_file = points_file;
    if (!sigma.empty()) cfg.sigma = sigma;
    if (!b.empty()) cfg.b = b;
    if (!templates.empty()) cfg.templates = templates;
    if (!dims.empty()) cfg.dims = dims;
    if (!x_col.empty()) cfg.x_col = x_col;
    if (!y_col.empty()) cfg.y_col = y_col;
    if (app.count("--init-sd")) cfg.init_sd = init_sd;
    if (!out.empty()) cfg.out = out;
    if (experiment == "chicago" && cfg.points_file && !app.count("--restarts")) {
      cfg.restarts = 500;
    }
    cfg.timing = timing;
    cfg.zero_weight = zero_weight;
    truncsm::validate(cfg);
    {
      std::ofstream probe(cfg.out);
      truncsm::require(probe.good(), "cannot write " + cfg.out);
    }
    const auto result = truncsm::run_experiment(cfg);
    truncsm::write_outputs(cfg, result);
    std::size_t failed = 0;
    for (const auto& r : result.rows) failed += r.status.rfind("failed", 0) == 0;
    std::cout << cfg.experiment << ": " << result.rows.size() << " rows written to " << cfg.out;
    if (failed) std::cout << " (" << failed << " failed fits)";
    std::cout << "\n";
    for (const auto& s : truncsm::summarize(result.rows)) {
      std::cout << "  " << s.cell << " " << s.method << " " << s.weight << ": n=" << s.count;
      if (!std::isnan(s.mean_error)) {
        std::cout << " error mean " << truncsm::detail::fmt(s.mean_error) << " sd "
                  << truncsm::detail::fmt(s.sd_error);
      }
      for (const auto& [k, v] : s.extra_median) {
        std::cout << " " << k << "~" << truncsm::detail::fmt(v);
      }
      std::cout << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "truncsm: error: " << e.what() << "\n";
    return 1;
  }
}
