#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "k2gof/errors.hpp"
#include "k2gof/fit.hpp"
#include "k2gof/grid.hpp"
#include "k2gof/model.hpp"
#include "k2gof/process.hpp"
#include "k2gof/rng.hpp"
#include "k2gof/rotation.hpp"
#include "k2gof/stats.hpp"

namespace k2gof {

/// Sorted replicate values of one statistic with full provenance.
struct NullDistribution {
  std::string stat_kind;  // "D", "omega2", "A2"
  std::vector<double> values;
  int replicates = 0;
  int n = 0;
  std::string model;
  ParamVector params_at_build;
  std::uint64_t seed = 0;
  std::string method;  // bootstrap-projected | bootstrap-refit | monte-carlo | rotated
};

struct NullSet {
  NullDistribution d, omega2, a2;
};

namespace detail {

/// Deterministic parallel loop: contiguous index chunks per worker, results
/// keyed by index, first failure (by lowest index) rethrown after join.
inline void parallel_for(int total, int threads, const std::function<void(int)>& body) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  threads = std::min(threads, total);
  if (threads <= 1) {
    for (int i = 0; i < total; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  std::vector<int> error_index(threads, -1);
  const int chunk = (total + threads - 1) / threads;
  for (int w = 0; w < threads; ++w) {
    const int lo = w * chunk;
    const int hi = std::min(total, lo + chunk);
    pool.emplace_back([&, w, lo, hi]() {
      for (int i = lo; i < hi; ++i) {
        try {
          body(i);
        } catch (...) {
          errors[w] = std::current_exception();
          error_index[w] = i;
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  int first = -1;
  for (int w = 0; w < threads; ++w)
    if (error_index[w] >= 0 && (first < 0 || error_index[w] < error_index[first])) first = w;
  if (first >= 0) std::rethrow_exception(errors[first]);
}

inline NullSet collect_null(const std::string& model, const ParamVector& params, int n,
                            std::uint64_t seed, const std::string& method,
                            std::vector<StatTriple>& stats, const std::vector<char>& failed,
                            double max_fail_fraction) {
  const int total = static_cast<int>(stats.size());
  int failures = 0;
  std::vector<double> d, w2, a2;
  d.reserve(total);
  w2.reserve(total);
  a2.reserve(total);
  for (int r = 0; r < total; ++r) {
    if (failed[r]) {
      ++failures;
      continue;
    }
    d.push_back(stats[r].d);
    w2.push_back(stats[r].omega2);
    a2.push_back(stats[r].a2);
  }
  if (failures > max_fail_fraction * total)
    throw HarnessError("replication: " + std::to_string(failures) + " of " +
                       std::to_string(total) + " replicates failed (threshold " +
                       std::to_string(max_fail_fraction) + ")");
  std::sort(d.begin(), d.end());
  std::sort(w2.begin(), w2.end());
  std::sort(a2.begin(), a2.end());
  const int kept = static_cast<int>(d.size());
  NullSet out;
  out.d = {"D", std::move(d), kept, n, model, params, seed, method};
  out.omega2 = {"omega2", std::move(w2), kept, n, model, params, seed, method};
  out.a2 = {"A2", std::move(a2), kept, n, model, params, seed, method};
  return out;
}

}  // namespace detail

/// Parametric bootstrap with the projected process: one plan at theta_hat,
/// every replicate reuses it. The fast path of the engine.
inline NullSet simulate_null_projected(const ModelSpec& spec, const ParamVector& theta_hat,
                                       int n, int replicates, std::uint64_t seed,
                                       const GridPtr& grid, int threads = 0) {
  if (replicates < 100) throw InputError("simulate_null_projected: need >= 100 replicates");
  ModelInstancePtr inst = instantiate(spec, theta_hat, grid);
  ProjectionPlanPtr plan = build_projection_plan(inst, grid);
  const GridField& dens = inst->density_field();
  const GridField& cdf = inst->cdf_table();

  std::vector<StatTriple> stats(replicates);
  std::vector<char> failed(replicates, 0);
  detail::parallel_for(replicates, threads, [&](int r) {
    RngStream rng(seed, stream_ns::kReplicate + static_cast<std::uint64_t>(r));
    const std::vector<Point> data = inst->sample(n, rng);
    const ProcessField v = projected_process(data, *plan);
    stats[r] = compute_stats(v, dens, cdf);
  });
  return detail::collect_null(spec.name, theta_hat, n, seed, "bootstrap-projected", stats,
                              failed, 1.0);
}

/// Parametric bootstrap with a full likelihood refit per replicate. Exists
/// for the cost comparison and the overlap validation; replicates whose
/// refit fails are excluded (more than 1% of them is a harness error).
inline NullSet simulate_null_refit(const ModelSpec& spec, const ParamVector& theta_hat, int n,
                                   int replicates, std::uint64_t seed, const GridPtr& grid,
                                   int threads = 0) {
  if (replicates < 100) throw InputError("simulate_null_refit: need >= 100 replicates");
  ModelInstancePtr inst = instantiate(spec, theta_hat, grid);
  std::vector<StatTriple> stats(replicates);
  std::vector<char> failed(replicates, 0);
  detail::parallel_for(replicates, threads, [&](int r) {
    RngStream rng(seed, stream_ns::kReplicate + static_cast<std::uint64_t>(r));
    const std::vector<Point> data = inst->sample(n, rng);
    try {
      auto [v, fitted] = detail::plugin_process_with_instance(data, spec, grid);
      stats[r] = compute_stats(v, fitted->density_field(), fitted->cdf_table());
    } catch (const NoConvergence&) {
      failed[r] = 1;
    }
  });
  return detail::collect_null(spec.name, theta_hat, n, seed, "bootstrap-refit", stats, failed,
                              0.01);
}

/// Monte Carlo validation variant: data generated at theta_true, estimation
/// repeated on every replicate.
inline NullSet simulate_null_mc(const ModelSpec& spec, const ParamVector& theta_true, int n,
                                int replicates, std::uint64_t seed, const GridPtr& grid,
                                int threads = 0) {
  if (replicates < 100) throw InputError("simulate_null_mc: need >= 100 replicates");
  ModelInstancePtr inst = instantiate(spec, theta_true, grid);
  std::vector<StatTriple> stats(replicates);
  std::vector<char> failed(replicates, 0);
  detail::parallel_for(replicates, threads, [&](int r) {
    RngStream rng(seed, stream_ns::kReplicate + static_cast<std::uint64_t>(r));
    const std::vector<Point> data = inst->sample(n, rng);
    try {
      auto [v, fitted] = detail::plugin_process_with_instance(data, spec, grid);
      stats[r] = compute_stats(v, fitted->density_field(), fitted->cdf_table());
    } catch (const NoConvergence&) {
      failed[r] = 1;
    }
  });
  return detail::collect_null(spec.name, theta_true, n, seed, "monte-carlo", stats, failed,
                              0.01);
}

/// Null distribution of the K-2 rotated statistics: data simulated from
/// F(beta_hat), statistics computed through a fixed rotation plan built at
/// (theta_hat, beta_hat). Used by the distribution-freeness validation.
inline NullSet simulate_null_rotated(const ModelSpec& q_spec, const ParamVector& theta_hat,
                                     const ModelSpec& f_spec, const ParamVector& beta_hat,
                                     int n, int replicates, std::uint64_t seed,
                                     const GridPtr& grid, int threads = 0) {
  if (replicates < 100) throw InputError("simulate_null_rotated: need >= 100 replicates");
  ModelInstancePtr q_inst = instantiate(q_spec, theta_hat, grid);
  ModelInstancePtr f_inst = instantiate(f_spec, beta_hat, grid);
  ProjectionPlanPtr proj = build_projection_plan(q_inst, grid);
  RotationPlanPtr plan = build_rotation_plan(q_inst, f_inst, grid, proj);
  const GridField& dens = q_inst->density_field();
  const GridField& cdf = q_inst->cdf_table();

  std::vector<StatTriple> stats(replicates);
  std::vector<char> failed(replicates, 0);
  detail::parallel_for(replicates, threads, [&](int r) {
    RngStream rng(seed, stream_ns::kReplicate + static_cast<std::uint64_t>(r));
    const std::vector<Point> data = f_inst->sample(n, rng);
    const ProcessField v = rotated_process(data, *plan);
    stats[r] = compute_stats(v, dens, cdf);
  });
  return detail::collect_null(f_spec.name, beta_hat, n, seed, "rotated", stats, failed, 1.0);
}

/// Right-tail Monte Carlo p-value with the add-one convention.
inline double p_value(const NullDistribution& dist, double observed) {
  if (dist.values.empty()) throw InputError("p_value: empty null distribution");
  const auto it = std::lower_bound(dist.values.begin(), dist.values.end(), observed);
  const std::size_t count_ge = dist.values.end() - it;
  return (1.0 + static_cast<double>(count_ge)) / (static_cast<double>(dist.values.size()) + 1.0);
}

/// Empirical (1 - alpha) quantile, higher-order-statistic convention.
inline double critical_value(const NullDistribution& dist, double alpha) {
  if (dist.values.empty()) throw InputError("critical_value: empty null distribution");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw InputError("critical_value: alpha must be in (0, 1)");
  const double r = static_cast<double>(dist.values.size());
  long idx = static_cast<long>(std::ceil((1.0 - alpha) * (r + 1.0))) - 1;
  idx = std::max(0l, std::min(idx, static_cast<long>(dist.values.size()) - 1));
  return dist.values[static_cast<std::size_t>(idx)];
}

struct PowerRow {
  std::string null_model;
  std::string statistic;  // D, omega2, A2 (rotated variants share the names)
  double alpha = 0.0;
  double power = 0.0;
  double se = 0.0;
  int replicates = 0;
};

struct PowerReport {
  std::vector<PowerRow> rows;
  ParamVector theta_calibration;  // reference fit used for the shared null
};

/// Power study: data generated from `truth`; the reference model and every
/// candidate are tested on each replicate. All tests are calibrated against
/// one shared null simulated at the reference fit of a designated
/// calibration sample (set `recalibrate_per_replicate` to rebuild the null
/// at every replicate's own fit instead; that path is orders of magnitude
/// slower and exists for sensitivity analysis).
inline PowerReport power_study(const ModelInstancePtr& truth, const ModelSpec& q_spec,
                               const std::vector<ModelSpec>& candidates, int n, int r_power,
                               int r_null, const std::vector<double>& alphas,
                               std::uint64_t seed, const GridPtr& grid, int threads = 0,
                               bool recalibrate_per_replicate = false) {
  if (r_power < 100 || r_null < 100)
    throw InputError("power_study: need >= 100 power and null replicates");
  for (const auto& c : candidates)
    if (c.p != q_spec.p)
      throw DimensionMismatch("power_study: candidate " + c.name +
                              " has a different parameter count than " + q_spec.name);

  // Shared null from a designated calibration sample.
  RngStream cal_rng(seed, stream_ns::kCalibration);
  const std::vector<Point> cal_data = truth->sample(n, cal_rng);
  const FitResult cal_fit = mle_fit(q_spec, cal_data, grid);
  const NullSet shared_null =
      simulate_null_projected(q_spec, cal_fit.params, n, r_null, seed, grid, threads);

  const int n_models = 1 + static_cast<int>(candidates.size());
  const int n_alphas = static_cast<int>(alphas.size());

  std::vector<std::vector<double>> cv(3, std::vector<double>(n_alphas));
  for (int ai = 0; ai < n_alphas; ++ai) {
    cv[0][ai] = critical_value(shared_null.d, alphas[ai]);
    cv[1][ai] = critical_value(shared_null.omega2, alphas[ai]);
    cv[2][ai] = critical_value(shared_null.a2, alphas[ai]);
  }

  // Per (replicate, model): one reject flag per (statistic, alpha), and a
  // failure flag so a broken candidate fit only voids its own cells.
  std::vector<std::vector<char>> rejects(r_power,
                                         std::vector<char>(n_models * 3 * n_alphas, 0));
  std::vector<std::vector<char>> failed(r_power, std::vector<char>(n_models, 0));

  detail::parallel_for(r_power, threads, [&](int r) {
    RngStream rng(seed, stream_ns::kPowerReplicate + static_cast<std::uint64_t>(r));
    std::vector<Point> data;
    ModelInstancePtr q_inst;
    ProjectionPlanPtr proj;
    try {
      data = truth->sample(n, rng);
      // Best-so-far parameters are used even without formal convergence;
      // heavy-tailed data can push a wrong model's fit to its domain edge
      // and the test statistic is still well defined there.
      const FitResult qfit = mle_fit(q_spec, data, grid);
      q_inst = instantiate(q_spec, qfit.params, grid);
      proj = build_projection_plan(q_inst, grid);
    } catch (const std::exception&) {
      for (int mi = 0; mi < n_models; ++mi) failed[r][mi] = 1;
      return;
    }

    std::vector<std::vector<double>> cv_local;
    const std::vector<std::vector<double>>* cv_use = &cv;
    if (recalibrate_per_replicate) {
      const NullSet local = simulate_null_projected(
          q_spec, q_inst->params(), n, r_null,
          seed ^ (0x5851F42D4C957F2Dull + static_cast<std::uint64_t>(r)), grid, 1);
      cv_local.assign(3, std::vector<double>(n_alphas));
      for (int ai = 0; ai < n_alphas; ++ai) {
        cv_local[0][ai] = critical_value(local.d, alphas[ai]);
        cv_local[1][ai] = critical_value(local.omega2, alphas[ai]);
        cv_local[2][ai] = critical_value(local.a2, alphas[ai]);
      }
      cv_use = &cv_local;
    }

    auto mark = [&](int model_idx, const StatTriple& s) {
      const double stat[3] = {s.d, s.omega2, s.a2};
      for (int si = 0; si < 3; ++si)
        for (int ai = 0; ai < n_alphas; ++ai)
          rejects[r][(model_idx * 3 + si) * n_alphas + ai] =
              stat[si] > (*cv_use)[si][ai] ? 1 : 0;
    };

    const ProcessField vq = projected_process(data, *proj);
    mark(0, compute_stats(vq, q_inst->density_field(), q_inst->cdf_table()));

    for (std::size_t m = 0; m < candidates.size(); ++m) {
      try {
        const FitResult ffit = mle_fit(candidates[m], data, grid);
        ModelInstancePtr f_inst = instantiate(candidates[m], ffit.params, grid);
        RotationPlanPtr rot = build_rotation_plan(q_inst, f_inst, grid, proj);
        const ProcessField vf = rotated_process(data, *rot);
        mark(1 + static_cast<int>(m),
             compute_stats(vf, q_inst->density_field(), q_inst->cdf_table()));
      } catch (const std::exception&) {
        failed[r][1 + m] = 1;
      }
    }
  });

  PowerReport report;
  report.theta_calibration = cal_fit.params;
  const char* stat_names[3] = {"D", "omega2", "A2"};
  for (int mi = 0; mi < n_models; ++mi) {
    const std::string name = mi == 0 ? q_spec.name : candidates[mi - 1].name;
    int failures = 0;
    for (int r = 0; r < r_power; ++r) failures += failed[r][mi];
    if (failures > 0.02 * r_power)
      throw HarnessError("power_study: " + std::to_string(failures) + " of " +
                         std::to_string(r_power) + " replicates failed for " + name +
                         " (threshold 2%)");
    const int kept = r_power - failures;
    for (int si = 0; si < 3; ++si) {
      for (int ai = 0; ai < n_alphas; ++ai) {
        long hits = 0;
        for (int r = 0; r < r_power; ++r)
          if (!failed[r][mi]) hits += rejects[r][(mi * 3 + si) * n_alphas + ai];
        const double rate = kept > 0 ? static_cast<double>(hits) / kept : 0.0;
        report.rows.push_back({name, stat_names[si], alphas[ai], rate,
                               std::sqrt(rate * (1.0 - rate) / std::max(kept, 1)), kept});
      }
    }
  }
  return report;
}

}  // namespace k2gof
