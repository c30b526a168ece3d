// Command-line front end: fit, null, test, power, bench.

#include <CLI11.hpp>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "k2gof/cli.hpp"
#include "k2gof/k2gof.hpp"

namespace {

using k2gof::RunConfig;

struct Overrides {
  std::string config_path;
  std::string reference, truth, method, out_dir;
  std::vector<std::string> candidates, user_models;
  std::vector<double> reference_params, truth_params, alphas, support;
  std::vector<int> grid;
  int n = 0, replicates = 0, power_replicates = 0, threads = 0;
  std::uint64_t seed = 0;
  bool recalibrate = false;
};

void add_common_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON config file");
  cmd->add_option("--reference", o.reference, "reference model name");
  cmd->add_option("--reference-params", o.reference_params, "inline reference parameters");
  cmd->add_option("--candidates", o.candidates, "candidate model names");
  cmd->add_option("--truth", o.truth, "truth model for power mode");
  cmd->add_option("--truth-params", o.truth_params, "inline truth parameters");
  cmd->add_option("--support", o.support,
                  "search region as x1_lo x2_lo x1_hi x2_hi")
      ->expected(4);
  cmd->add_option("--grid", o.grid, "grid cells per axis (n1 n2)")->expected(2);
  cmd->add_option("--n", o.n, "sample size per replicate");
  cmd->add_option("--replicates", o.replicates, "null replicates");
  cmd->add_option("--power-replicates", o.power_replicates, "power replicates");
  cmd->add_option("--alphas", o.alphas, "significance levels");
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--threads", o.threads, "worker cap (0 = hardware)");
  cmd->add_option("--method", o.method, "null method: projected|refit|mc");
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--user-model", o.user_models, "user model JSON spec file(s)");
  cmd->add_flag("--recalibrate", o.recalibrate,
                "rebuild the null at every power replicate's own fit");
}

RunConfig build_config(const CLI::App* cmd, const Overrides& o) {
  RunConfig cfg;
  if (cmd->count("--config")) cfg = RunConfig::from_json(k2gof::read_json(o.config_path));
  if (cmd->count("--reference")) cfg.reference = o.reference;
  if (cmd->count("--reference-params")) cfg.reference_params = o.reference_params;
  if (cmd->count("--candidates")) cfg.candidates = o.candidates;
  if (cmd->count("--truth")) cfg.truth = o.truth;
  if (cmd->count("--truth-params")) cfg.truth_params = o.truth_params;
  if (cmd->count("--support"))
    cfg.support = k2gof::SupportRect({o.support[0], o.support[1]}, {o.support[2], o.support[3]});
  if (cmd->count("--grid")) {
    cfg.grid_n1 = o.grid[0];
    cfg.grid_n2 = o.grid[1];
  }
  if (cmd->count("--n")) cfg.n = o.n;
  if (cmd->count("--replicates")) cfg.replicates = o.replicates;
  if (cmd->count("--power-replicates")) cfg.power_replicates = o.power_replicates;
  if (cmd->count("--alphas")) cfg.alphas = o.alphas;
  if (cmd->count("--seed")) cfg.seed = o.seed;
  if (cmd->count("--threads")) cfg.threads = o.threads;
  if (cmd->count("--method")) cfg.method = o.method;
  if (cmd->count("--out")) cfg.out_dir = o.out_dir;
  if (cmd->count("--user-model")) cfg.user_model_files = o.user_models;
  if (cmd->count("--recalibrate")) cfg.recalibrate = o.recalibrate;
  return cfg;
}

int classify(const std::exception& e) {
  if (dynamic_cast<const k2gof::HarnessError*>(&e)) return k2gof::exit_code::kHarness;
  if (dynamic_cast<const k2gof::DimensionMismatch*>(&e)) return k2gof::exit_code::kAudit;
  if (dynamic_cast<const k2gof::AuditFailure*>(&e)) return k2gof::exit_code::kAudit;
  if (dynamic_cast<const k2gof::NoConvergence*>(&e)) return k2gof::exit_code::kNoConvergence;
  return k2gof::exit_code::kInput;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goodness-of-fit via projected empirical processes and the K-2 rotation"};
  app.require_subcommand(1);

  Overrides o_fit, o_null, o_test, o_power, o_bench;
  std::string fit_csv, test_csv;

  CLI::App* c_fit = app.add_subcommand("fit", "fit the reference model to a CSV dataset");
  c_fit->add_option("data", fit_csv, "CSV file with header x1,x2")->required();
  add_common_options(c_fit, o_fit);

  CLI::App* c_null = app.add_subcommand("null", "simulate the reference null distributions");
  add_common_options(c_null, o_null);

  CLI::App* c_test = app.add_subcommand("test", "test reference and candidates on a dataset");
  c_test->add_option("data", test_csv, "CSV file with header x1,x2")->required();
  add_common_options(c_test, o_test);

  CLI::App* c_power = app.add_subcommand("power", "rejection-rate study under the truth model");
  add_common_options(c_power, o_power);

  CLI::App* c_bench = app.add_subcommand("bench", "time refit vs projected bootstrap");
  add_common_options(c_bench, o_bench);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_fit->parsed()) return k2gof::cmd_fit(build_config(c_fit, o_fit), fit_csv);
    if (c_null->parsed()) return k2gof::cmd_null(build_config(c_null, o_null));
    if (c_test->parsed()) return k2gof::cmd_test(build_config(c_test, o_test), test_csv);
    if (c_power->parsed()) return k2gof::cmd_power(build_config(c_power, o_power));
    if (c_bench->parsed()) return k2gof::cmd_bench(build_config(c_bench, o_bench));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify(e);
  }
  return 0;
}
