#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "k2gof/errors.hpp"
#include "k2gof/grid.hpp"
#include "k2gof/process.hpp"

namespace k2gof {

struct StatTriple {
  double d = 0.0;       // sup |v|
  double omega2 = 0.0;  // integral of v^2 q
  double a2 = 0.0;      // integral of v^2 w q, w = [Q(1-Q)]^{-1}
  ProcessKind kind = ProcessKind::kProjectedQ;
};

/// Kolmogorov-Smirnov style statistic: sup over nodes of |v|.
inline double stat_sup(const ProcessField& v) {
  double m = 0.0;
  for (double x : v.field.values()) m = std::max(m, std::abs(x));
  return m;
}

/// Cramer-von Mises style statistic: integral of v^2 against the reference
/// density.
inline double stat_cvm(const ProcessField& v, const GridField& q_density) {
  check_same_grid(v.field, q_density);
  double s = 0.0;
  const auto& vv = v.field.values();
  const auto& qv = q_density.values();
  for (std::size_t k = 0; k < vv.size(); ++k) s += vv[k] * vv[k] * qv[k];
  return s * v.field.grid()->cell_weight();
}

/// Anderson-Darling style statistic with weight [Q(1-Q)]^{-1}. Q is clamped
/// into [eps, 1-eps]; a node where the clamp binds and v^2 < 1e-20
/// contributes nothing (at grid level Q = 1 exactly at the maximal node,
/// where the process also vanishes).
inline double stat_ad(const ProcessField& v, const GridField& q_density,
                      const GridField& q_cdf, double eps = 1e-10) {
  check_same_grid(v.field, q_density);
  check_same_grid(v.field, q_cdf);
  double s = 0.0;
  const auto& vv = v.field.values();
  const auto& qv = q_density.values();
  const auto& cv = q_cdf.values();
  for (std::size_t k = 0; k < vv.size(); ++k) {
    const double v2 = vv[k] * vv[k];
    const double raw = cv[k];
    if ((raw < eps || raw > 1.0 - eps) && v2 < 1e-20) continue;
    const double c = std::min(std::max(raw, eps), 1.0 - eps);
    s += v2 * qv[k] / (c * (1.0 - c));
  }
  return s * v.field.grid()->cell_weight();
}

inline StatTriple compute_stats(const ProcessField& v, const GridField& q_density,
                                const GridField& q_cdf) {
  return {stat_sup(v), stat_cvm(v, q_density), stat_ad(v, q_density, q_cdf), v.kind};
}

// ---------------------------------------------------------------------------
// Two-sample Kolmogorov-Smirnov, used by the overlap and
// distribution-freeness checks.
// ---------------------------------------------------------------------------

struct KsTwoSampleResult {
  double statistic = 0.0;  // sup |ecdf_a - ecdf_b|
  double p_value = 1.0;    // asymptotic Kolmogorov tail
};

/// Asymptotic Kolmogorov survival function P(K > x).
inline double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::min(1.0, std::max(0.0, 2.0 * s));
}

inline KsTwoSampleResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t na = a.size(), nb = b.size();
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < na && j < nb) {
    const double x = std::min(a[i], b[j]);
    while (i < na && a[i] <= x) ++i;
    while (j < nb && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = static_cast<double>(na) * nb / (na + nb);
  return {d, kolmogorov_survival(std::sqrt(ne) * d)};
}

}  // namespace k2gof
