#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "k2gof/errors.hpp"
#include "k2gof/grid.hpp"
#include "k2gof/model.hpp"
#include "k2gof/rng.hpp"

namespace k2gof {

struct FisherMatrix {
  Eigen::MatrixXd gamma;
  double condition_number = 0.0;
};

struct FitResult {
  ParamVector params;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

/// Fisher information at grid level: Gamma_jk = <u_j, u_k>_Q with the
/// instance's own scores and density.
inline FisherMatrix fisher_information(const ModelInstance& inst, const GridPtr& grid) {
  if (!inst.grid()->same_layout(*grid))
    throw GridMismatch("fisher_information: instance built on a different grid");
  const int p = inst.spec().p;
  const int n = grid->size();
  Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(p, p);
  std::vector<double> u(p);
  for (int k = 0; k < n; ++k) {
    inst.score(grid->node(k), u.data());
    const double qw = inst.density_field()[k] * grid->cell_weight();
    for (int j = 0; j < p; ++j)
      for (int l = j; l < p; ++l) gamma(j, l) += u[j] * u[l] * qw;
  }
  for (int j = 0; j < p; ++j)
    for (int l = 0; l < j; ++l) gamma(j, l) = gamma(l, j);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma);
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  if (!(lmax > 0.0) || lmin < 1e-10 * lmax)
    throw SingularInformation("fisher_information: near-singular information for " +
                              inst.spec().name);
  return {gamma, lmax / lmin};
}

/// Symmetric inverse square root: returns S with S * Gamma * S = I.
/// Eigendecomposition route with eigenvalue clamping at 1e-12.
inline Eigen::MatrixXd inverse_sqrt(const FisherMatrix& fisher) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fisher.gamma);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double lmax = ev.maxCoeff();
  if (!(lmax > 0.0) || ev.minCoeff() < 1e-10 * lmax)
    throw SingularInformation("inverse_sqrt: matrix is not safely positive definite");
  Eigen::VectorXd inv(ev.size());
  for (int j = 0; j < ev.size(); ++j) inv[j] = 1.0 / std::sqrt(std::max(ev[j], 1e-12));
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

/// Normalized score functions b = Gamma^{-1/2} u: orthonormal and mean-zero
/// under the model at grid level. Evaluable both as grid fields and at raw
/// data points.
class NormalizedScores {
 public:
  NormalizedScores(ModelInstancePtr inst, Eigen::MatrixXd inv_sqrt_gamma)
      : inst_(std::move(inst)), s_(std::move(inv_sqrt_gamma)) {
    const int p = inst_->spec().p;
    const GridPtr& grid = inst_->grid();
    const int n = grid->size();
    std::vector<std::vector<double>> vals(p, std::vector<double>(n));
    std::vector<double> u(p), b(p);
    for (int k = 0; k < n; ++k) {
      inst_->score(grid->node(k), u.data());
      rotate(u.data(), b.data());
      for (int j = 0; j < p; ++j) vals[j][k] = b[j];
    }
    fields_.reserve(p);
    for (int j = 0; j < p; ++j) fields_.emplace_back(grid, std::move(vals[j]));
  }

  int p() const { return static_cast<int>(fields_.size()); }
  const std::vector<GridField>& fields() const { return fields_; }
  const GridField& field(int j) const { return fields_[j]; }
  const Eigen::MatrixXd& inv_sqrt_gamma() const { return s_; }
  const ModelInstancePtr& instance() const { return inst_; }

  /// b(t) at an exact data point (not snapped to the grid).
  void eval(const Point& t, double* out) const {
    const int p_ = p();
    double ubuf[16];
    std::vector<double> uv;
    double* u = ubuf;
    if (p_ > 16) {
      uv.resize(p_);
      u = uv.data();
    }
    inst_->score(t, u);
    rotate(u, out);
  }

 private:
  void rotate(const double* u, double* out) const {
    const int p_ = static_cast<int>(s_.rows());
    for (int j = 0; j < p_; ++j) {
      double acc = 0.0;
      for (int l = 0; l < p_; ++l) acc += s_(j, l) * u[l];
      out[j] = acc;
    }
  }

  ModelInstancePtr inst_;
  Eigen::MatrixXd s_;
  std::vector<GridField> fields_;
};

inline NormalizedScores normalized_scores(const ModelInstancePtr& inst, const GridPtr& grid) {
  return NormalizedScores(inst, inverse_sqrt(fisher_information(*inst, grid)));
}

// ---------------------------------------------------------------------------
// Maximum likelihood via Nelder-Mead on unconstrained coordinates.
// ---------------------------------------------------------------------------

namespace detail {

/// Log likelihood of the truncated, grid-normalized density.
inline double log_likelihood(const ModelSpec& spec, const std::vector<double>& params,
                             const std::vector<Point>& data, const Grid& grid) {
  const int n = grid.size();
  double gmax = -std::numeric_limits<double>::infinity();
  static thread_local std::vector<double> logd;
  logd.resize(n);
  for (int k = 0; k < n; ++k) {
    logd[k] = spec.log_density_unnormalized(params, grid.node(k));
    if (logd[k] > gmax) gmax = logd[k];
  }
  if (!std::isfinite(gmax)) return -std::numeric_limits<double>::infinity();
  double mass = 0.0;
  for (int k = 0; k < n; ++k) mass += std::exp(logd[k] - gmax);
  const double log_norm = gmax + std::log(mass * grid.cell_weight());
  double ll = 0.0;
  for (const Point& t : data) ll += spec.log_density_unnormalized(params, t);
  ll -= static_cast<double>(data.size()) * log_norm;
  return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
}

struct SimplexResult {
  std::vector<double> x;
  double f = std::numeric_limits<double>::infinity();
  bool converged = false;
  int evals = 0;
};

/// Classic Nelder-Mead minimizer. Stops when the simplex diameter in the
/// search coordinates drops below `tol` or the evaluation budget runs out.
template <class F>
SimplexResult nelder_mead(F&& f, std::vector<double> x0, double step, double tol,
                          int max_evals) {
  const int d = static_cast<int>(x0.size());
  SimplexResult out;
  std::vector<std::vector<double>> v(d + 1, x0);
  std::vector<double> fv(d + 1);
  for (int j = 0; j < d; ++j) v[j + 1][j] += step * std::max(1.0, std::abs(x0[j]));
  for (int i = 0; i <= d; ++i) fv[i] = f(v[i]);
  out.evals = d + 1;

  std::vector<int> order(d + 1);
  std::vector<double> centroid(d), xr(d), xe(d), xc(d);
  while (out.evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    const int best = order[0], worst = order[d], second = order[d - 1];

    double diam = 0.0;
    for (int i = 0; i <= d; ++i)
      for (int j = 0; j < d; ++j)
        diam = std::max(diam, std::abs(v[i][j] - v[best][j]));
    if (diam < tol) {
      out.converged = true;
      break;
    }

    for (int j = 0; j < d; ++j) {
      double c = 0.0;
      for (int i = 0; i <= d; ++i)
        if (i != worst) c += v[i][j];
      centroid[j] = c / d;
    }

    for (int j = 0; j < d; ++j) xr[j] = centroid[j] + (centroid[j] - v[worst][j]);
    const double fr = f(xr);
    ++out.evals;
    if (fr < fv[best]) {
      for (int j = 0; j < d; ++j) xe[j] = centroid[j] + 2.0 * (centroid[j] - v[worst][j]);
      const double fe = f(xe);
      ++out.evals;
      if (fe < fr) {
        v[worst] = xe;
        fv[worst] = fe;
      } else {
        v[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      v[worst] = xr;
      fv[worst] = fr;
    } else {
      const bool outside = fr < fv[worst];
      if (outside)
        for (int j = 0; j < d; ++j) xc[j] = centroid[j] + 0.5 * (xr[j] - centroid[j]);
      else
        for (int j = 0; j < d; ++j) xc[j] = centroid[j] + 0.5 * (v[worst][j] - centroid[j]);
      const double fc = f(xc);
      ++out.evals;
      if (fc < (outside ? fr : fv[worst])) {
        v[worst] = xc;
        fv[worst] = fc;
      } else {
        for (int i = 0; i <= d; ++i) {
          if (i == best) continue;
          for (int j = 0; j < d; ++j) v[i][j] = v[best][j] + 0.5 * (v[i][j] - v[best][j]);
          fv[i] = f(v[i]);
          ++out.evals;
        }
      }
    }
  }

  int best = 0;
  for (int i = 1; i <= d; ++i)
    if (fv[i] < fv[best]) best = i;
  out.x = v[best];
  out.f = fv[best];
  return out;
}

}  // namespace detail

/// Maximum likelihood fit: initial guess plus 4 jittered restarts, best kept.
/// Seed-deterministic (the restart jitter stream is fixed). Never throws on
/// failure to converge; reports best-so-far with converged = false.
inline FitResult mle_fit(const ModelSpec& spec, const std::vector<Point>& data,
                         const GridPtr& grid) {
  if (data.size() < 10) throw InputError("mle_fit: need at least 10 data points");
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!spec.support.contains(data[i]))
      throw OutOfSupport("mle_fit: data point " + std::to_string(i + 1) + " outside support");

  const int p = spec.p;
  const ParamVector start_params =
      spec.initial_from_data ? spec.initial_from_data(data) : spec.initial_guess;
  std::vector<double> t0(p);
  for (int j = 0; j < p; ++j)
    t0[j] = spec.param_domains[j].to_unconstrained(start_params.values[j]);

  auto objective = [&](const std::vector<double>& t) {
    std::vector<double> th(p);
    for (int j = 0; j < p; ++j) th[j] = spec.param_domains[j].from_unconstrained(t[j]);
    const double ll = detail::log_likelihood(spec, th, data, *grid);
    return std::isfinite(ll) ? -ll : 1e300;
  };

  constexpr int kRestarts = 4;
  constexpr int kMaxEvalsPerStart = 2000;
  constexpr double kTol = 1e-6;

  detail::SimplexResult best;
  int total_evals = 0;
  bool any_converged = false;
  RngStream jitter(0x9E3779B97F4A7C15ull, 0);
  for (int s = 0; s <= kRestarts; ++s) {
    std::vector<double> start = t0;
    if (s > 0)
      for (int j = 0; j < p; ++j)
        start[j] += jitter.uniform(-0.5, 0.5) * std::max(1.0, std::abs(t0[j]));
    auto r = detail::nelder_mead(objective, start, 0.25, kTol, kMaxEvalsPerStart);
    total_evals += r.evals;
    any_converged = any_converged || r.converged;
    if (r.f < best.f) best = r;
  }

  FitResult out;
  out.params.values.resize(p);
  out.params.labels = spec.initial_guess.labels;
  for (int j = 0; j < p; ++j)
    out.params.values[j] = spec.param_domains[j].from_unconstrained(best.x[j]);
  out.log_likelihood = -best.f;
  out.iterations = total_evals;

  // Converged means the simplex collapsed and the finite-difference
  // gradient of the log likelihood is small: |grad| < 1e-4 * n.
  double grad_norm = 0.0;
  if (any_converged) {
    std::vector<double> th = out.params.values;
    for (int j = 0; j < p; ++j) {
      const double h = detail::finite_difference_step(th[j]);
      const double save = th[j];
      th[j] = save + h;
      const double up = detail::log_likelihood(spec, th, data, *grid);
      th[j] = save - h;
      const double dn = detail::log_likelihood(spec, th, data, *grid);
      th[j] = save;
      const double g = (up - dn) / (2.0 * h);
      grad_norm += g * g;
    }
    grad_norm = std::sqrt(grad_norm);
  }
  out.converged = any_converged && grad_norm < 1e-4 * static_cast<double>(data.size());
  return out;
}

}  // namespace k2gof
