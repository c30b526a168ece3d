#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "k2gof/errors.hpp"
#include "k2gof/fit.hpp"
#include "k2gof/grid.hpp"
#include "k2gof/model.hpp"
#include "k2gof/process.hpp"

namespace k2gof {

namespace detail {
// Operators whose defining difference vector has squared F-norm below this
// act as the identity (the continuous limit of the 0/0 case).
constexpr double kDegenerateNormSq = 1e-12;
}  // namespace detail

/// Isometry l = sqrt(q / f) on the nodes. Both densities must be positive
/// wherever the other is (shared support).
inline GridField isometry_field(const ModelInstance& q_inst, const ModelInstance& f_inst) {
  const GridField& q = q_inst.density_field();
  const GridField& f = f_inst.density_field();
  check_same_grid(q, f);
  std::vector<double> v(q.values().size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (f[static_cast<int>(k)] <= 0.0 && q[static_cast<int>(k)] > 0.0)
      throw SupportMismatch("isometry_field: f vanishes where q does not (node " +
                            std::to_string(k) + ")");
    v[k] = std::sqrt(q[static_cast<int>(k)] / f[static_cast<int>(k)]);
  }
  return GridField(q.grid(), std::move(v));
}

/// Unitary operator of the rotation's second step:
/// K h = h - (1 - l) <1 - l, h>_F / (1 - <l, 1>_F).
/// Identity when ||1 - l||_F^2 is negligible.
inline GridField apply_K(const GridField& h, const GridField& l_field,
                         const GridField& f_density) {
  check_same_grid(h, l_field);
  check_same_grid(h, f_density);
  GridField one = GridField::constant(h.grid(), 1.0);
  std::vector<double> ev(l_field.values().size());
  for (std::size_t k = 0; k < ev.size(); ++k) ev[k] = 1.0 - l_field[static_cast<int>(k)];
  GridField e(h.grid(), std::move(ev));
  const double e_norm_sq = inner_product(e, e, f_density);
  if (e_norm_sq < detail::kDegenerateNormSq) return h;
  const double k_const = inner_product(l_field, one, f_density);
  if (std::abs(1.0 - k_const) < 1e-12)
    throw DegenerateK("apply_K: <l,1>_F = 1 but ||1-l||_F is not negligible");
  const double coeff = inner_product(e, h, f_density) / (1.0 - k_const);
  GridField out = h;
  for (int k = 0; k < h.grid()->size(); ++k) out[k] -= e[k] * coeff;
  return out;
}

/// Unitary swap operator U_{a,c}: maps a <-> c and leaves anything
/// orthogonal to both unchanged. Identity when a = c at grid level.
inline GridField apply_U_pair(const GridField& h, const GridField& a, const GridField& c,
                              const GridField& f_density) {
  check_same_grid(h, a);
  check_same_grid(h, c);
  check_same_grid(h, f_density);
  std::vector<double> ev(a.values().size());
  for (std::size_t k = 0; k < ev.size(); ++k)
    ev[k] = a[static_cast<int>(k)] - c[static_cast<int>(k)];
  GridField e(h.grid(), std::move(ev));
  const double e_norm_sq = inner_product(e, e, f_density);
  if (e_norm_sq < detail::kDegenerateNormSq) return h;
  const double denom = 1.0 - inner_product(a, c, f_density);
  const double coeff = inner_product(e, h, f_density) / denom;
  GridField out = h;
  for (int k = 0; k < h.grid()->size(); ++k) out[k] -= e[k] * coeff;
  return out;
}

/// Residuals of the plan's self-checks, serialized with the plan for audit.
struct RotationAudit {
  double max_c_mean = 0.0;          // max_j |<c_j, 1>_F|
  double max_ctilde_cross = 0.0;    // max_{j, k<j} |<ctilde_j, a_k>_F|
  double max_chain_map = 0.0;       // max_j ||U d_j - a_j||_inf
  double max_three_way = 0.0;       // Eq.-32 style equality at probe nodes
  double min_l = 0.0, max_l = 0.0;  // isometry range

  double worst() const {
    double w = max_c_mean;
    w = std::max(w, max_ctilde_cross);
    w = std::max(w, max_chain_map);
    w = std::max(w, max_three_way);
    return w;
  }
};

/// Precomputed K-2 rotation carrying Q's projected structure onto F.
///
/// Holds the isometry, F's normalized scores a_j, the rotated scores
/// c_j = K(l b_j), the orthogonalized chain functions, and per-node
/// coefficient fields that let the rotated process be evaluated with one
/// prefix sum per replicate.
class RotationPlan {
 public:
  RotationPlan(ModelInstancePtr q_inst, ModelInstancePtr f_inst, GridPtr grid,
               ProjectionPlanPtr proj_plan)
      : q_inst_(std::move(q_inst)),
        f_inst_(std::move(f_inst)),
        grid_(std::move(grid)),
        proj_(std::move(proj_plan)),
        a_scores_(normalized_scores(f_inst_, grid_)) {
    if (q_inst_->spec().p != f_inst_->spec().p)
      throw DimensionMismatch("build_rotation_plan: models have different parameter counts (" +
                              std::to_string(q_inst_->spec().p) + " vs " +
                              std::to_string(f_inst_->spec().p) + ")");
    const int p = q_inst_->spec().p;
    const GridField& f_dens = f_inst_->density_field();

    l_field_ = isometry_field(*q_inst_, *f_inst_);
    GridField one = GridField::constant(grid_, 1.0);
    k_const_ = inner_product(l_field_, one, f_density());

    // Step 2: c_j = K(l b_j).
    c_fields_.reserve(p);
    for (int j = 0; j < p; ++j) {
      GridField lb = proj_->scores().field(j);
      for (int k = 0; k < grid_->size(); ++k) lb[k] *= l_field_[k];
      c_fields_.push_back(apply_K(lb, l_field_, f_dens));
    }

    // Step 3: the chain. d_1 = c_1; d_j = U_{a_{j-1} d_{j-1}} ... U_{a_1 d_1} c_j.
    d_fields_.reserve(p);
    for (int j = 0; j < p; ++j) {
      GridField h = c_fields_[j];
      for (int m = 0; m < j; ++m)
        h = apply_U_pair(h, a_scores_.field(m), d_fields_[m], f_dens);
      d_fields_.push_back(std::move(h));
    }

    // Difference vectors of the composed operator, and their Gram matrix
    // together with e_0 = 1 - l of the K step.
    e_fields_.reserve(p);
    for (int j = 0; j < p; ++j) {
      GridField e = a_scores_.field(j);
      for (int k = 0; k < grid_->size(); ++k) e[k] -= d_fields_[j][k];
      e_fields_.push_back(std::move(e));
    }
    GridField e0 = one;
    for (int k = 0; k < grid_->size(); ++k) e0[k] = 1.0 - l_field_[k];
    e0_ = std::move(e0);

    gram_ = Eigen::MatrixXd::Zero(p + 1, p + 1);
    gram_(0, 0) = inner_product(e0_, e0_, f_dens);
    for (int j = 0; j < p; ++j) {
      gram_(0, j + 1) = inner_product(e0_, e_fields_[j], f_dens);
      gram_(j + 1, 0) = gram_(0, j + 1);
      for (int m = 0; m <= j; ++m) {
        gram_(m + 1, j + 1) = inner_product(e_fields_[m], e_fields_[j], f_dens);
        gram_(j + 1, m + 1) = gram_(m + 1, j + 1);
      }
    }
    k_degenerate_ = gram_(0, 0) < detail::kDegenerateNormSq;
    if (!k_degenerate_ && std::abs(1.0 - k_const_) < 1e-12)
      throw DegenerateK("build_rotation_plan: inconsistent near-degeneracy of K");
    u_degenerate_.resize(p);
    u_denom_.resize(p);
    for (int j = 0; j < p; ++j) {
      u_degenerate_[j] = gram_(j + 1, j + 1) < detail::kDegenerateNormSq;
      u_denom_[j] = 1.0 - inner_product(a_scores_.field(j), d_fields_[j], f_dens);
    }

    build_gamma_fields();
    run_audit();
  }

  const ModelInstancePtr& q_instance() const { return q_inst_; }
  const ModelInstancePtr& f_instance() const { return f_inst_; }
  const GridPtr& grid() const { return grid_; }
  const ProjectionPlanPtr& projection_plan() const { return proj_; }
  const NormalizedScores& a_scores() const { return a_scores_; }
  const GridField& l_field() const { return l_field_; }
  double k_const() const { return k_const_; }
  const std::vector<GridField>& c_fields() const { return c_fields_; }
  const std::vector<GridField>& chain_fields() const { return d_fields_; }
  const GridField& f_density() const { return f_inst_->density_field(); }
  const RotationAudit& audit() const { return audit_; }
  int p() const { return q_inst_->spec().p; }

  /// l(t) at an exact data point, from the normalized log densities.
  double l_at(const Point& t) const {
    return std::exp(0.5 * (q_inst_->log_density(t) - f_inst_->log_density(t)));
  }

  /// Apply the composed operator U K to a field in one pass.
  GridField apply_chain(const GridField& h) const {
    return apply_u_chain(apply_K(h, l_field_, f_density()));
  }

  /// The composed U = U_{a_p d_p} ... U_{a_1 d_1} alone (no K step).
  GridField apply_u_chain(const GridField& h) const {
    GridField out = h;
    for (int j = 0; j < p(); ++j)
      out = apply_U_pair(out, a_scores_.field(j), d_fields_[j], f_density());
    return out;
  }

  const GridField& gamma_field(int m) const { return gamma_fields_[m]; }  // m in [0, p]
  const std::vector<GridField>& e_fields() const { return e_fields_; }
  const GridField& e0_field() const { return e0_; }

 private:
  // Scalar reduction of U K (l psi_x) over x. The running field is always
  // l psi_x plus a combination of {e0, e_1..e_p}, so each operator only
  // needs inner products that reduce to one cumulative field per vector.
  void build_gamma_fields() {
    const int p_ = p();
    const int n = grid_->size();
    const GridField& q_cdf = q_inst_->cdf_table();

    // lf(t) = l(t) f(t) at nodes; <g, l psi_x>_F = prefix(g lf)(x) - Q(x) total.
    GridField lf = f_density();
    for (int k = 0; k < n; ++k) lf[k] *= l_field_[k];

    std::vector<GridField> base;  // <e_m, l psi_x>_F as fields over x
    base.reserve(p_ + 1);
    {
      GridField pre = partial_integral(e0_, lf);
      const double total = pre[n - 1];
      for (int k = 0; k < n; ++k) pre[k] -= q_cdf[k] * total;
      base.push_back(std::move(pre));
    }
    for (int j = 0; j < p_; ++j) {
      GridField pre = partial_integral(e_fields_[j], lf);
      const double total = pre[n - 1];
      for (int k = 0; k < n; ++k) pre[k] -= q_cdf[k] * total;
      base.push_back(std::move(pre));
    }

    gamma_fields_.assign(p_ + 1, GridField::zeros(grid_));
    std::vector<double> gamma(p_ + 1);
    for (int k = 0; k < n; ++k) {
      // K step.
      gamma[0] = k_degenerate_ ? 0.0 : -base[0][k] / (1.0 - k_const_);
      // U chain, in the paper's application order.
      for (int m = 0; m < p_; ++m) {
        if (u_degenerate_[m]) {
          gamma[m + 1] = 0.0;
          continue;
        }
        double dot = base[m + 1][k] + gamma[0] * gram_(m + 1, 0);
        for (int r = 0; r < m; ++r) dot += gamma[r + 1] * gram_(m + 1, r + 1);
        gamma[m + 1] = -dot / u_denom_[m];
      }
      for (int m = 0; m <= p_; ++m) gamma_fields_[m][k] = gamma[m];
    }
  }

  void run_audit() {
    const int p_ = p();
    const GridField& f_dens = f_density();
    GridField one = GridField::constant(grid_, 1.0);
    RotationAudit a;
    a.min_l = l_field_[0];
    a.max_l = l_field_[0];
    for (int k = 0; k < grid_->size(); ++k) {
      a.min_l = std::min(a.min_l, l_field_[k]);
      a.max_l = std::max(a.max_l, l_field_[k]);
    }
    for (int j = 0; j < p_; ++j) {
      a.max_c_mean = std::max(a.max_c_mean, std::abs(inner_product(c_fields_[j], one, f_dens)));
      for (int k = 0; k < j; ++k)
        a.max_ctilde_cross = std::max(
            a.max_ctilde_cross, std::abs(inner_product(d_fields_[j], a_scores_.field(k), f_dens)));
      // The composed operator carries each original c_j onto a_j; the
      // chain functions d_j are its intermediate images.
      GridField mapped = apply_u_chain(c_fields_[j]);
      double dist = 0.0;
      for (int k = 0; k < grid_->size(); ++k)
        dist = std::max(dist, std::abs(mapped[k] - a_scores_.field(j)[k]));
      a.max_chain_map = std::max(a.max_chain_map, dist);
    }
    // Three-way equality at a handful of spread-out probe nodes:
    // <b_j, psi_x>_Q vs <a_j, U K l psi_x>_F.
    const int n = grid_->size();
    for (int probe = 0; probe < 7; ++probe) {
      const int node = (n - 1) * probe / 6;
      GridField lpsi = make_l_psi(node);
      GridField phi = apply_u_chain(apply_K(lpsi, l_field_, f_dens));
      for (int j = 0; j < p_; ++j) {
        const double via_f = inner_product(a_scores_.field(j), phi, f_dens);
        const double via_q = proj_->proj_coeff()[j][node];
        a.max_three_way = std::max(a.max_three_way, std::abs(via_f - via_q));
      }
    }
    audit_ = a;
  }

  GridField make_l_psi(int node) const {
    const Grid& g = *grid_;
    const int xi = node / g.n2(), xj = node % g.n2();
    const double q_at = q_inst_->cdf_table()[node];
    std::vector<double> v(g.size());
    for (int i = 0; i < g.n1(); ++i)
      for (int j = 0; j < g.n2(); ++j) {
        const int k = g.index(i, j);
        v[k] = ((i <= xi && j <= xj) ? 1.0 : 0.0) - q_at;
        v[k] *= l_field_[k];
      }
    return GridField(grid_, std::move(v));
  }

  ModelInstancePtr q_inst_, f_inst_;
  GridPtr grid_;
  ProjectionPlanPtr proj_;
  NormalizedScores a_scores_;
  GridField l_field_;
  double k_const_ = 0.0;
  bool k_degenerate_ = false;
  std::vector<bool> u_degenerate_;
  std::vector<double> u_denom_;
  std::vector<GridField> c_fields_, d_fields_, e_fields_;
  GridField e0_;
  Eigen::MatrixXd gram_;
  std::vector<GridField> gamma_fields_;
  RotationAudit audit_;
};

using RotationPlanPtr = std::shared_ptr<const RotationPlan>;

inline RotationPlanPtr build_rotation_plan(const ModelInstancePtr& q_inst,
                                           const ModelInstancePtr& f_inst,
                                           const GridPtr& grid,
                                           const ProjectionPlanPtr& proj_plan) {
  return std::make_shared<const RotationPlan>(q_inst, f_inst, grid, proj_plan);
}

/// K-2 rotated empirical process of data drawn on F's side:
/// (1/sqrt(n)) sum_i phitilde_x(t_i) per node x, where
/// phitilde_x = U K (l psi_x) - sum_j a_j <b_j, psi_x>_Q.
///
/// psi, l and the score fields are evaluated at the exact data points; the
/// chain difference fields (which have no closed form) are interpolated
/// bilinearly from the grid.
inline ProcessField rotated_process(const std::vector<Point>& data, const RotationPlan& plan) {
  if (data.empty()) throw InputError("rotated_process: empty data");
  const Grid& g = *plan.grid();
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!g.rect().contains(data[i]))
      throw OutOfSupport("rotated_process: data point " + std::to_string(i + 1) +
                         " outside support");

  const int p = plan.p();
  const double n = static_cast<double>(data.size());
  const double inv_sqrt_n = 1.0 / std::sqrt(n);

  std::vector<double> l_vals(data.size());
  double sum_l = 0.0;
  std::vector<double> sum_e(p, 0.0), sum_a(p, 0.0);
  std::vector<double> a(p);
  for (std::size_t i = 0; i < data.size(); ++i) {
    l_vals[i] = plan.l_at(data[i]);
    sum_l += l_vals[i];
    plan.a_scores().eval(data[i], a.data());
    for (int j = 0; j < p; ++j) {
      sum_a[j] += a[j];
      sum_e[j] += plan.e_fields()[j].interpolate(data[i]);
    }
  }
  const double sum_e0 = n - sum_l;

  // sum_i l(t_i) 1{t_i <= x} via one weighted prefix pass.
  std::vector<double> l_prefix = detail::dominance_weights(g, data, l_vals);

  const auto& q_cdf = plan.q_instance()->cdf_table().values();
  std::vector<double> v(g.size());
  for (int k = 0; k < g.size(); ++k) {
    double acc = l_prefix[k] - q_cdf[k] * sum_l;
    acc += plan.gamma_field(0)[k] * sum_e0;
    for (int j = 0; j < p; ++j) {
      acc += plan.gamma_field(j + 1)[k] * sum_e[j];
      acc -= plan.projection_plan()->proj_coeff()[j][k] * sum_a[j];
    }
    v[k] = acc * inv_sqrt_n;
  }
  return {GridField(plan.grid(), std::move(v)), static_cast<int>(data.size()),
          ProcessKind::kRotatedF};
}

}  // namespace k2gof
