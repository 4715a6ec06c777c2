#ifndef RUINWALK_EXPERIMENT_HPP
#define RUINWALK_EXPERIMENT_HPP

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ruinwalk/limits.hpp"
#include "ruinwalk/mc.hpp"

namespace ruinwalk {

// A declarative experiment: a model, a level grid, a sampling budget and a
// list of named checks, each carrying its own thresholds and an expected
// verdict (some presets are expected to fail their asymptotic law).
struct ExperimentSpec {
  std::string name;
  nlohmann::json model;
  std::vector<double> x_grid;
  std::string sampler = "big_jump";  // conditional sampling route
  long long n_paths = 1000000;       // crude/estimate budget per level
  long long target_hits = 2000;      // conditional sample size per level
  double barrier_mult = 4.0;
  std::uint64_t seed = 20240801;
  nlohmann::json checks = nlohmann::json::array();

  nlohmann::json to_json() const;
  static ExperimentSpec from_json(const nlohmann::json& j);
  // empty when valid; otherwise one message per violated field
  std::vector<std::string> validate() const;
};

struct ExperimentResult {
  nlohmann::json summary;
  bool all_as_expected = false;
};

// Runs every check, writes summary.json, ks_trend.csv, plot_quantiles.csv
// and per-level record CSVs into out_dir (when non-empty), and returns the
// summary.  Throws std::invalid_argument on an invalid spec.
ExperimentResult run_experiment(const ExperimentSpec& spec,
                                const std::string& out_dir, int workers,
                                std::optional<std::uint64_t> seed_override);

std::vector<std::string> preset_names();
ExperimentSpec preset(const std::string& name);

}  // namespace ruinwalk

#endif  // RUINWALK_EXPERIMENT_HPP
