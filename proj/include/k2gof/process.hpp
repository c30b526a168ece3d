#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "k2gof/errors.hpp"
#include "k2gof/fit.hpp"
#include "k2gof/grid.hpp"
#include "k2gof/model.hpp"

namespace k2gof {

enum class ProcessKind { kProjectedQ, kPluginQ, kRotatedF };

inline const char* to_string(ProcessKind k) {
  switch (k) {
    case ProcessKind::kProjectedQ: return "projected-Q";
    case ProcessKind::kPluginQ: return "plugin-Q";
    case ProcessKind::kRotatedF: return "rotated-F";
  }
  return "?";
}

/// An empirical-process realization evaluated on the grid nodes.
struct ProcessField {
  GridField field;
  int n = 0;
  ProcessKind kind = ProcessKind::kProjectedQ;
};

namespace detail {

/// Empirical counts at grid level: value at node x is the number of data
/// points whose cell is <= x componentwise (the node's own cell included).
inline std::vector<double> dominance_weights(const Grid& g, const std::vector<Point>& data,
                                             const std::vector<double>& weights) {
  std::vector<double> v(g.size(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto [ci, cj] = g.cell_of(data[i]);
    v[g.index(ci, cj)] += weights.empty() ? 1.0 : weights[i];
  }
  prefix_sum_2d(g, v);
  return v;
}

}  // namespace detail

/// Everything the projected process needs at a fixed parameter estimate:
/// normalized scores, the projection coefficients <b_j, psi_x>_Q over the
/// grid, and the model cdf at nodes. Reusable across unlimited replicates.
class ProjectionPlan {
 public:
  ProjectionPlan(ModelInstancePtr inst, NormalizedScores scores)
      : inst_(std::move(inst)), scores_(std::move(scores)), cdf_(inst_->cdf_table()) {
    // Appendix route: <b_j, psi_x>_Q equals the partial integral of b_j q
    // because the normalized score has grid-exact zero mean.
    const int p = scores_.p();
    proj_coeff_.reserve(p);
    for (int j = 0; j < p; ++j)
      proj_coeff_.push_back(partial_integral(scores_.field(j), inst_->density_field()));
  }

  const ModelInstancePtr& instance() const { return inst_; }
  const NormalizedScores& scores() const { return scores_; }
  const std::vector<GridField>& proj_coeff() const { return proj_coeff_; }
  const GridField& cdf_field() const { return cdf_; }
  const GridPtr& grid() const { return inst_->grid(); }
  int p() const { return scores_.p(); }

 private:
  ModelInstancePtr inst_;
  NormalizedScores scores_;
  std::vector<GridField> proj_coeff_;
  GridField cdf_;
};

using ProjectionPlanPtr = std::shared_ptr<const ProjectionPlan>;

inline ProjectionPlanPtr build_projection_plan(const ModelInstancePtr& inst,
                                               const GridPtr& grid) {
  return std::make_shared<const ProjectionPlan>(inst, normalized_scores(inst, grid));
}

/// psi_{x,theta}(t) = 1{t <= x} - Q_theta(x) at grid node index `node`,
/// with the cell-level indicator convention.
inline double psi(const ProjectionPlan& plan, int node, const Point& t) {
  const Grid& g = *plan.grid();
  if (!g.rect().contains(t)) throw OutOfSupport("psi: point outside support");
  const auto [ci, cj] = g.cell_of(t);
  const int xi = node / g.n2(), xj = node % g.n2();
  const double ind = (ci <= xi && cj <= xj) ? 1.0 : 0.0;
  return ind - plan.cdf_field()[node];
}

/// Projected empirical process of the data under the plan's model:
/// at node x, (1/sqrt(n)) sum_i [psi(x, t_i) - sum_j b_j(t_i) <b_j, psi_x>_Q].
/// Score values are evaluated at the exact data points.
inline ProcessField projected_process(const std::vector<Point>& data,
                                      const ProjectionPlan& plan) {
  if (data.empty()) throw InputError("projected_process: empty data");
  const Grid& g = *plan.grid();
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!g.rect().contains(data[i]))
      throw OutOfSupport("projected_process: data point " + std::to_string(i + 1) +
                         " outside support");

  const int p = plan.p();
  const double n = static_cast<double>(data.size());
  const double inv_sqrt_n = 1.0 / std::sqrt(n);

  std::vector<double> counts = detail::dominance_weights(g, data, {});

  std::vector<double> score_sums(p, 0.0);
  std::vector<double> b(p);
  for (const Point& t : data) {
    plan.scores().eval(t, b.data());
    for (int j = 0; j < p; ++j) score_sums[j] += b[j];
  }

  std::vector<double> v(g.size());
  const auto& cdf = plan.cdf_field().values();
  for (int k = 0; k < g.size(); ++k) {
    double acc = counts[k] - n * cdf[k];
    for (int j = 0; j < p; ++j) acc -= score_sums[j] * plan.proj_coeff()[j][k];
    v[k] = acc * inv_sqrt_n;
  }
  return {GridField(plan.grid(), std::move(v)), static_cast<int>(data.size()),
          ProcessKind::kProjectedQ};
}

namespace detail {

inline std::pair<ProcessField, ModelInstancePtr> plugin_process_with_instance(
    const std::vector<Point>& data, const ModelSpec& spec, const GridPtr& grid) {
  if (data.empty()) throw InputError("plugin_process: empty data");
  FitResult fit = mle_fit(spec, data, grid);
  if (!fit.converged)
    throw NoConvergence("plugin_process: likelihood maximization did not converge");
  ModelInstancePtr inst = instantiate(spec, fit.params, grid);

  const Grid& g = *grid;
  const double n = static_cast<double>(data.size());
  const double inv_sqrt_n = 1.0 / std::sqrt(n);
  std::vector<double> counts = dominance_weights(g, data, {});
  std::vector<double> v(g.size());
  const auto& cdf = inst->cdf_table().values();
  for (int k = 0; k < g.size(); ++k) v[k] = (counts[k] - n * cdf[k]) * inv_sqrt_n;
  ProcessField pf{GridField(grid, std::move(v)), static_cast<int>(data.size()),
                  ProcessKind::kPluginQ};
  return {std::move(pf), std::move(inst)};
}

}  // namespace detail

/// Plug-in parametric empirical process: refit the model on this data and
/// return sqrt(n) [empirical cdf - fitted cdf] at the nodes. This is the
/// expensive variant kept for the cost and overlap comparisons.
inline ProcessField plugin_process(const std::vector<Point>& data, const ModelSpec& spec,
                                   const GridPtr& grid) {
  return detail::plugin_process_with_instance(data, spec, grid).first;
}

}  // namespace k2gof
