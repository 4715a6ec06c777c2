#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ruinwalk/experiment.hpp"

using nlohmann::json;
using namespace ruinwalk;

namespace {

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open " + path);
  json j;
  f >> j;
  return j;
}

int cmd_run(const std::string& spec_path, const std::string& preset_name,
            std::optional<std::uint64_t> seed, int workers,
            const std::string& out) {
  ExperimentSpec spec;
  if (!preset_name.empty()) {
    spec = preset(preset_name);
  } else {
    spec = ExperimentSpec::from_json(load_json(spec_path));
  }
  ExperimentResult res = run_experiment(spec, out, workers, seed);
  std::cout << res.summary.dump(2) << "\n";
  return res.all_as_expected ? 0 : 1;
}

int cmd_presets(const std::string& json_name) {
  if (!json_name.empty()) {
    std::cout << preset(json_name).to_json().dump(2) << "\n";
    return 0;
  }
  for (const auto& n : preset_names()) std::cout << n << "\n";
  return 0;
}

int cmd_tails(const std::string& dist_path, const std::vector<double>& xs) {
  TailModel m = TailModel::from_json(load_json(dist_path));
  json out = json::array();
  std::optional<ScaleFunction> e;
  std::optional<LimitLawG> g;
  if (m.heavy()) {
    e = m.scale_function();
    g = m.limit_law();
  }
  for (double x : xs) {
    json row{{"x", x},
             {"tail", m.tail(x)},
             {"integrated_tail", m.integrated_tail(x)},
             {"mean", m.mean()}};
    if (e) {
      row["e"] = (*e)(x);
      if (g->kind == LimitLawG::Kind::ParetoTail) {
        row["g"] = "pareto_tail";
        row["g_exponent"] = g->exponent;           // exponent of 1+t
        row["tail_index"] = g->exponent + 1.0;     // index of the tail itself
      } else {
        row["g"] = "std_exp";
      }
    }
    out.push_back(row);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_bound(double alpha, double beta, double cutoff) {
  json c{{"type", "growth_bound"}, {"alpha", alpha}, {"beta", beta},
         {"cutoff", cutoff}, {"expected_feasible", true}};
  TailModel f = TailModel::discrete_power(alpha, cutoff);
  auto rep = growth_bound_check(
      f, [beta](double x) { return std::ceil(std::pow(x, beta)); });
  json out{{"alpha", alpha},
           {"beta", beta},
           {"cutoff", cutoff},
           {"feasible", rep.feasible},
           {"er_truncated", rep.er_truncated},
           {"er_converges", rep.er_converges},
           {"bound_holds", rep.bound_holds},
           {"recursion_ok", rep.recursion_ok},
           {"witness_x", rep.witness_x},
           {"k1", rep.k1}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"first-exceedance simulation toolkit for heavy-tailed walks"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run an experiment spec");
  std::string spec_path, preset_name, out_dir;
  std::uint64_t seed_val = 0;
  bool seed_set = false;
  int workers = 2;
  run->add_option("spec", spec_path, "experiment spec JSON file");
  run->add_option("--preset", preset_name, "run a bundled preset by name");
  run->add_option("--seed", seed_val, "master seed override")
      ->each([&](const std::string&) { seed_set = true; });
  run->add_option("--workers", workers, "worker threads");
  run->add_option("--out", out_dir, "output directory for result files");

  // presets
  auto* presets_cmd = app.add_subcommand("presets", "list bundled experiments");
  std::string preset_json;
  presets_cmd->add_option("--json", preset_json, "print one preset spec as JSON");

  // tails
  auto* tails = app.add_subcommand("tails", "evaluate a distribution spec");
  std::string dist_path;
  std::vector<double> xs;
  tails->add_option("dist", dist_path, "distribution JSON file")->required();
  tails->add_option("--x", xs, "evaluation points")->required()->delimiter(',');

  // bound
  auto* bound = app.add_subcommand("bound", "growth-rate feasibility check");
  double alpha = 3.0, beta = 2.0, cutoff = 1e6;
  bound->add_option("--alpha", alpha, "tail index of F")->required();
  bound->add_option("--beta", beta, "growth exponent of phi")->required();
  bound->add_option("--cutoff", cutoff, "support truncation");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (spec_path.empty() && preset_name.empty()) {
        std::cerr << "run: need a spec file or --preset\n";
        return 2;
      }
      return cmd_run(spec_path, preset_name,
                     seed_set ? std::optional<std::uint64_t>(seed_val)
                              : std::nullopt,
                     workers, out_dir);
    }
    if (presets_cmd->parsed()) return cmd_presets(preset_json);
    if (tails->parsed()) return cmd_tails(dist_path, xs);
    if (bound->parsed()) return cmd_bound(alpha, beta, cutoff);
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 2;
}
