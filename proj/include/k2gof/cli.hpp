#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "k2gof/errors.hpp"
#include "k2gof/io.hpp"
#include "k2gof/model.hpp"
#include "k2gof/process.hpp"
#include "k2gof/rotation.hpp"
#include "k2gof/sim.hpp"

namespace k2gof {

namespace exit_code {
constexpr int kOk = 0;
constexpr int kInput = 2;
constexpr int kNoConvergence = 3;
constexpr int kHarness = 4;
constexpr int kAudit = 5;
}  // namespace exit_code

/// Effective run configuration. Defaults reproduce the study setup:
/// region [1,20]x[1,25], 50x40 grid, n = 100 observations.
struct RunConfig {
  std::string reference = "Q";
  std::vector<double> reference_params;  // empty: take from fit.json / defaults
  std::vector<std::string> candidates = {"F1", "F2", "F3"};
  std::string truth = "P";
  std::vector<double> truth_params;  // empty: model initial_guess (study defaults)
  SupportRect support = SupportRect({1.0, 1.0}, {20.0, 25.0});
  int grid_n1 = 50;
  int grid_n2 = 40;
  int n = 100;
  int replicates = 2000;
  int power_replicates = 2000;
  std::vector<double> alphas = {0.001, 0.05, 0.1};
  std::uint64_t seed = 12345;
  int threads = 0;  // 0: hardware concurrency
  std::string method = "projected";
  std::string out_dir = "out";
  std::vector<std::string> user_model_files;
  bool recalibrate = false;

  json to_json_value() const {
    json j = json::object();
    j["schema"] = 1;
    j["reference"] = reference;
    j["reference_params"] = reference_params;
    j["candidates"] = candidates;
    j["truth"] = truth;
    j["truth_params"] = truth_params;
    j["support"] = {{"lower", support.lower}, {"upper", support.upper}};
    j["grid"] = {grid_n1, grid_n2};
    j["n"] = n;
    j["replicates"] = replicates;
    j["power_replicates"] = power_replicates;
    j["alphas"] = alphas;
    j["seed"] = seed;
    j["threads"] = threads;
    j["method"] = method;
    j["out"] = out_dir;
    j["user_models"] = user_model_files;
    j["recalibrate"] = recalibrate;
    return j;
  }

  static RunConfig from_json(const json& j) {
    RunConfig c;
    if (j.contains("reference")) c.reference = j["reference"].get<std::string>();
    if (j.contains("reference_params"))
      c.reference_params = j["reference_params"].get<std::vector<double>>();
    if (j.contains("candidates"))
      c.candidates = j["candidates"].get<std::vector<std::string>>();
    if (j.contains("truth")) c.truth = j["truth"].get<std::string>();
    if (j.contains("truth_params"))
      c.truth_params = j["truth_params"].get<std::vector<double>>();
    if (j.contains("support"))
      c.support = SupportRect(j["support"]["lower"].get<std::vector<double>>(),
                              j["support"]["upper"].get<std::vector<double>>());
    if (j.contains("grid")) {
      c.grid_n1 = j["grid"][0].get<int>();
      c.grid_n2 = j["grid"][1].get<int>();
    }
    if (j.contains("n")) c.n = j["n"].get<int>();
    if (j.contains("replicates")) c.replicates = j["replicates"].get<int>();
    if (j.contains("power_replicates"))
      c.power_replicates = j["power_replicates"].get<int>();
    if (j.contains("alphas")) c.alphas = j["alphas"].get<std::vector<double>>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
    if (j.contains("method")) c.method = j["method"].get<std::string>();
    if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
    if (j.contains("user_models"))
      c.user_model_files = j["user_models"].get<std::vector<std::string>>();
    if (j.contains("recalibrate")) c.recalibrate = j["recalibrate"].get<bool>();
    return c;
  }

  std::string hash() const { return fnv1a_hex(to_json_value().dump()); }
};

namespace detail {

struct CliContext {
  RunConfig cfg;
  std::vector<ModelSpec> registry;
  GridPtr grid;
  std::string config_hash;
};

inline CliContext make_context(const RunConfig& cfg) {
  CliContext ctx;
  ctx.cfg = cfg;
  ctx.registry = register_builtin_models();
  for (const std::string& path : cfg.user_model_files)
    ctx.registry.push_back(model_spec_from_json(read_json(path)));
  ctx.grid = build_grid(cfg.support, cfg.grid_n1, cfg.grid_n2);
  ctx.config_hash = cfg.hash();
  std::filesystem::create_directories(cfg.out_dir);
  write_json(cfg.out_dir + "/effective_config.json", cfg.to_json_value());
  std::cout << "config " << ctx.config_hash << " seed " << cfg.seed << "\n";
  return ctx;
}

inline ParamVector resolve_params(const ModelSpec& spec, const std::vector<double>& inline_params,
                                  const std::string& fit_json_path) {
  ParamVector pv;
  pv.labels = spec.initial_guess.labels;
  if (!inline_params.empty()) {
    if (static_cast<int>(inline_params.size()) != spec.p)
      throw InputError("parameter override for " + spec.name + " has wrong length");
    pv.values = inline_params;
    return pv;
  }
  if (!fit_json_path.empty() && std::filesystem::exists(fit_json_path)) {
    const json j = read_json(fit_json_path);
    if (j.at("model").get<std::string>() == spec.name) {
      pv.values = j.at("params").at("values").get<std::vector<double>>();
      return pv;
    }
  }
  return spec.initial_guess;
}

inline std::string null_path(const RunConfig& cfg, const std::string& stat) {
  return cfg.out_dir + "/null_" + stat + ".json";
}

}  // namespace detail

/// fit: maximum-likelihood fit of the reference model to a CSV dataset.
inline int cmd_fit(const RunConfig& cfg, const std::string& data_csv) {
  auto ctx = detail::make_context(cfg);
  const ModelSpec& spec = find_model(ctx.registry, cfg.reference);
  const std::vector<Point> data = read_points_csv(data_csv);
  if (static_cast<int>(data.size()) < 10)
    throw InputError("'" + data_csv + "': need at least 10 rows, got " +
                     std::to_string(data.size()));
  const FitResult fit = mle_fit(spec, data, ctx.grid);
  json j = to_json(fit, spec.name);
  j["config_hash"] = ctx.config_hash;
  write_json(cfg.out_dir + "/fit.json", j);
  std::cout << "fit " << spec.name << " loglik " << fit.log_likelihood
            << (fit.converged ? "" : " (not converged)") << "\n";
  return fit.converged ? exit_code::kOk : exit_code::kNoConvergence;
}

/// null: simulate the three reference null distributions and write them as
/// JSON plus 60-bin histogram CSVs. Method projected|refit|mc. Wall time
/// lands in timing.json, which is the one run-dependent output.
inline int cmd_null(const RunConfig& cfg) {
  auto ctx = detail::make_context(cfg);
  const ModelSpec& spec = find_model(ctx.registry, cfg.reference);
  const ParamVector params =
      detail::resolve_params(spec, cfg.reference_params, cfg.out_dir + "/fit.json");

  const auto t0 = std::chrono::steady_clock::now();
  NullSet nulls;
  if (cfg.method == "projected")
    nulls = simulate_null_projected(spec, params, cfg.n, cfg.replicates, cfg.seed, ctx.grid,
                                    cfg.threads);
  else if (cfg.method == "refit")
    nulls = simulate_null_refit(spec, params, cfg.n, cfg.replicates, cfg.seed, ctx.grid,
                                cfg.threads);
  else if (cfg.method == "mc")
    nulls = simulate_null_mc(spec, params, cfg.n, cfg.replicates, cfg.seed, ctx.grid,
                             cfg.threads);
  else
    throw InputError("unknown method '" + cfg.method + "' (projected|refit|mc)");
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  for (const NullDistribution* nd : {&nulls.d, &nulls.omega2, &nulls.a2}) {
    json j = to_json(*nd);
    j["config_hash"] = ctx.config_hash;
    write_json(detail::null_path(cfg, nd->stat_kind), j);
    write_histogram_csv(cfg.out_dir + "/null_" + nd->stat_kind + "_hist.csv", nd->values);
  }
  json timing = json::object();
  timing["command"] = "null";
  timing["method"] = cfg.method;
  timing["wall_seconds"] = seconds;
  write_json(cfg.out_dir + "/timing.json", timing);
  std::cout << "null " << cfg.method << " R=" << cfg.replicates << " done in " << seconds
            << " s\n";
  return exit_code::kOk;
}

/// test: fit the reference and every candidate on the data, compute the
/// reference statistics and the K-2 rotated statistics, and report
/// p-values against the stored reference null distributions.
inline int cmd_test(const RunConfig& cfg, const std::string& data_csv) {
  auto ctx = detail::make_context(cfg);
  const ModelSpec& q_spec = find_model(ctx.registry, cfg.reference);
  const std::vector<Point> data = read_points_csv(data_csv);
  if (static_cast<int>(data.size()) < 10)
    throw InputError("'" + data_csv + "': need at least 10 rows, got " +
                     std::to_string(data.size()));

  NullDistribution null_d = null_distribution_from_json(
      read_json(detail::null_path(cfg, "D")));
  NullDistribution null_w2 = null_distribution_from_json(
      read_json(detail::null_path(cfg, "omega2")));
  NullDistribution null_a2 = null_distribution_from_json(
      read_json(detail::null_path(cfg, "A2")));

  const FitResult qfit = mle_fit(q_spec, data, ctx.grid);
  ModelInstancePtr q_inst = instantiate(q_spec, qfit.params, ctx.grid);
  ProjectionPlanPtr proj = build_projection_plan(q_inst, ctx.grid);

  json rows = json::array();
  auto add_row = [&](const std::string& name, const std::string& kind, const StatTriple& s,
                     const json& audit) {
    json r = json::object();
    r["model"] = name;
    r["kind"] = kind;
    r["D"] = s.d;
    r["omega2"] = s.omega2;
    r["A2"] = s.a2;
    r["p_D"] = p_value(null_d, s.d);
    r["p_omega2"] = p_value(null_w2, s.omega2);
    r["p_A2"] = p_value(null_a2, s.a2);
    if (!audit.is_null()) r["plan"] = audit;
    rows.push_back(r);
  };

  const ProcessField vq = projected_process(data, *proj);
  add_row(q_spec.name, "reference",
          compute_stats(vq, q_inst->density_field(), q_inst->cdf_table()), json());

  for (const std::string& cname : cfg.candidates) {
    const ModelSpec& f_spec = find_model(ctx.registry, cname);
    const FitResult ffit = mle_fit(f_spec, data, ctx.grid);
    ModelInstancePtr f_inst = instantiate(f_spec, ffit.params, ctx.grid);
    RotationPlanPtr rot = build_rotation_plan(q_inst, f_inst, ctx.grid, proj);
    if (rot->audit().worst() > 1e-3)
      throw AuditFailure("rotation plan audit failed for " + cname + ": worst residual " +
                         std::to_string(rot->audit().worst()));
    const ProcessField vf = rotated_process(data, *rot);
    add_row(cname, "rotated",
            compute_stats(vf, q_inst->density_field(), q_inst->cdf_table()),
            to_json(*rot));
  }

  json report = json::object();
  report["schema"] = 1;
  report["config_hash"] = ctx.config_hash;
  report["seed"] = cfg.seed;
  report["reference_fit"] = to_json(qfit, q_spec.name);
  report["models"] = rows;
  write_json(cfg.out_dir + "/test_report.json", report);
  std::cout << "test report: " << rows.size() << " model rows -> " << cfg.out_dir
            << "/test_report.json\n";
  return exit_code::kOk;
}

/// power: rejection-rate study with data from the truth model, calibrated
/// against one shared reference null.
inline int cmd_power(const RunConfig& cfg) {
  auto ctx = detail::make_context(cfg);
  const ModelSpec& q_spec = find_model(ctx.registry, cfg.reference);
  const ModelSpec& truth_spec = find_model(ctx.registry, cfg.truth);
  ParamVector truth_params = truth_spec.initial_guess;
  if (!cfg.truth_params.empty()) {
    if (static_cast<int>(cfg.truth_params.size()) != truth_spec.p)
      throw InputError("truth_params has wrong length for " + truth_spec.name);
    truth_params.values = cfg.truth_params;
  }
  ModelInstancePtr truth = instantiate(truth_spec, truth_params, ctx.grid);

  std::vector<ModelSpec> candidates;
  for (const std::string& cname : cfg.candidates)
    candidates.push_back(find_model(ctx.registry, cname));

  const PowerReport report =
      power_study(truth, q_spec, candidates, cfg.n, cfg.power_replicates, cfg.replicates,
                  cfg.alphas, cfg.seed, ctx.grid, cfg.threads, cfg.recalibrate);
  write_power_csv(cfg.out_dir + "/power.csv", report);
  std::cout << "power: " << report.rows.size() << " rows -> " << cfg.out_dir
            << "/power.csv\n";
  return exit_code::kOk;
}

/// bench: wall-clock comparison of the refit and projected bootstrap at the
/// configured scale. Timing output is inherently run-dependent.
inline int cmd_bench(const RunConfig& cfg) {
  auto ctx = detail::make_context(cfg);
  const ModelSpec& spec = find_model(ctx.registry, cfg.reference);
  const ParamVector params =
      detail::resolve_params(spec, cfg.reference_params, cfg.out_dir + "/fit.json");

  const auto t0 = std::chrono::steady_clock::now();
  simulate_null_projected(spec, params, cfg.n, cfg.replicates, cfg.seed, ctx.grid,
                          cfg.threads);
  const auto t1 = std::chrono::steady_clock::now();
  simulate_null_refit(spec, params, cfg.n, cfg.replicates, cfg.seed, ctx.grid, cfg.threads);
  const auto t2 = std::chrono::steady_clock::now();

  const double projected_s = std::chrono::duration<double>(t1 - t0).count();
  const double refit_s = std::chrono::duration<double>(t2 - t1).count();
  json timing = json::object();
  timing["command"] = "bench";
  timing["n"] = cfg.n;
  timing["replicates"] = cfg.replicates;
  timing["projected_seconds"] = projected_s;
  timing["refit_seconds"] = refit_s;
  timing["speedup"] = refit_s / projected_s;
  write_json(cfg.out_dir + "/timing.json", timing);
  std::cout << "bench: projected " << projected_s << " s, refit " << refit_s
            << " s, speedup " << refit_s / projected_s << "x\n";
  return exit_code::kOk;
}

}  // namespace k2gof
