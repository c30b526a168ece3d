#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "k2gof/errors.hpp"

namespace k2gof {

using Point = std::array<double, 2>;

/// Closed rectangular search region. General-dimension by construction,
/// though the grid machinery below works on d = 2.
struct SupportRect {
  std::vector<double> lower;
  std::vector<double> upper;

  SupportRect() = default;
  SupportRect(std::vector<double> lo, std::vector<double> hi)
      : lower(std::move(lo)), upper(std::move(hi)) {
    validate();
  }

  std::size_t dim() const { return lower.size(); }

  void validate() const {
    if (lower.size() != upper.size() || lower.empty())
      throw std::invalid_argument("SupportRect: lower/upper dimension mismatch");
    for (std::size_t k = 0; k < lower.size(); ++k) {
      if (!(lower[k] < upper[k]))
        throw std::invalid_argument("SupportRect: lower must be < upper");
      if (!std::isfinite(lower[k]) || !std::isfinite(upper[k]))
        throw std::invalid_argument("SupportRect: bounds must be finite");
    }
  }

  // Boundary points count as in-support (closed rectangle).
  bool contains(const Point& x) const {
    for (std::size_t k = 0; k < 2; ++k)
      if (x[k] < lower[k] || x[k] > upper[k]) return false;
    return true;
  }

  bool operator==(const SupportRect& o) const {
    return lower == o.lower && upper == o.upper;
  }
};

/// Tensor midpoint grid over a 2-D rectangle. Node (i, j) sits at the
/// center of cell (i, j); all quadrature below is the midpoint Darboux sum.
class Grid {
 public:
  Grid(SupportRect rect, int n1, int n2) : rect_(std::move(rect)), n1_(n1), n2_(n2) {
    rect_.validate();
    if (rect_.dim() != 2) throw std::invalid_argument("Grid: requires d = 2");
    if (n1 < 2 || n2 < 2) throw std::invalid_argument("Grid: need at least 2 cells per axis");
    h1_ = (rect_.upper[0] - rect_.lower[0]) / n1;
    h2_ = (rect_.upper[1] - rect_.lower[1]) / n2;
    cell_w_ = h1_ * h2_;
    x1_.resize(n1);
    x2_.resize(n2);
    for (int i = 0; i < n1; ++i) x1_[i] = rect_.lower[0] + (i + 0.5) * h1_;
    for (int j = 0; j < n2; ++j) x2_[j] = rect_.lower[1] + (j + 0.5) * h2_;
  }

  const SupportRect& rect() const { return rect_; }
  int n1() const { return n1_; }
  int n2() const { return n2_; }
  int size() const { return n1_ * n2_; }
  double h1() const { return h1_; }
  double h2() const { return h2_; }
  double cell_weight() const { return cell_w_; }

  double x1(int i) const { return x1_[i]; }
  double x2(int j) const { return x2_[j]; }
  int index(int i, int j) const { return i * n2_ + j; }
  Point node(int k) const { return {x1_[k / n2_], x2_[k % n2_]}; }

  /// Cell containing a point, clamped into range; boundary points map to
  /// the adjacent interior cell.
  std::pair<int, int> cell_of(const Point& t) const {
    int i = static_cast<int>(std::floor((t[0] - rect_.lower[0]) / h1_));
    int j = static_cast<int>(std::floor((t[1] - rect_.lower[1]) / h2_));
    i = i < 0 ? 0 : (i >= n1_ ? n1_ - 1 : i);
    j = j < 0 ? 0 : (j >= n2_ ? n2_ - 1 : j);
    return {i, j};
  }

  bool same_layout(const Grid& o) const {
    return n1_ == o.n1_ && n2_ == o.n2_ && rect_ == o.rect_;
  }

 private:
  SupportRect rect_;
  int n1_, n2_;
  double h1_, h2_, cell_w_;
  std::vector<double> x1_, x2_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr build_grid(const SupportRect& rect, int n1, int n2) {
  return std::make_shared<const Grid>(rect, n1, n2);
}

/// One scalar value per grid node.
class GridField {
 public:
  GridField() = default;
  GridField(GridPtr grid, std::vector<double> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (static_cast<int>(values_.size()) != grid_->size())
      throw std::invalid_argument("GridField: value count != node count");
  }

  static GridField zeros(const GridPtr& grid) {
    return GridField(grid, std::vector<double>(grid->size(), 0.0));
  }

  static GridField constant(const GridPtr& grid, double c) {
    return GridField(grid, std::vector<double>(grid->size(), c));
  }

  static GridField from_fn(const GridPtr& grid,
                           const std::function<double(double, double)>& f) {
    std::vector<double> v(grid->size());
    for (int i = 0; i < grid->n1(); ++i)
      for (int j = 0; j < grid->n2(); ++j)
        v[grid->index(i, j)] = f(grid->x1(i), grid->x2(j));
    return GridField(grid, std::move(v));
  }

  const GridPtr& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  double operator[](int k) const { return values_[k]; }
  double& operator[](int k) { return values_[k]; }
  double at(int i, int j) const { return values_[grid_->index(i, j)]; }

  /// Bilinear interpolation between node values, clamped at the outer
  /// node ring (constant extrapolation over the boundary half-cells).
  double interpolate(const Point& t) const {
    const Grid& g = *grid_;
    double s1 = (t[0] - g.rect().lower[0]) / g.h1() - 0.5;
    double s2 = (t[1] - g.rect().lower[1]) / g.h2() - 0.5;
    int i0 = static_cast<int>(std::floor(s1));
    int j0 = static_cast<int>(std::floor(s2));
    i0 = i0 < 0 ? 0 : (i0 > g.n1() - 2 ? g.n1() - 2 : i0);
    j0 = j0 < 0 ? 0 : (j0 > g.n2() - 2 ? g.n2() - 2 : j0);
    double f1 = s1 - i0;
    double f2 = s2 - j0;
    f1 = f1 < 0.0 ? 0.0 : (f1 > 1.0 ? 1.0 : f1);
    f2 = f2 < 0.0 ? 0.0 : (f2 > 1.0 ? 1.0 : f2);
    const double v00 = at(i0, j0), v01 = at(i0, j0 + 1);
    const double v10 = at(i0 + 1, j0), v11 = at(i0 + 1, j0 + 1);
    return (1.0 - f1) * ((1.0 - f2) * v00 + f2 * v01) +
           f1 * ((1.0 - f2) * v10 + f2 * v11);
  }

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

inline void check_same_grid(const GridField& a, const GridField& b) {
  if (!a.grid() || !b.grid() || !a.grid()->same_layout(*b.grid()))
    throw GridMismatch("fields live on different grids");
}

/// Darboux sum of a field over the region.
inline double integrate(const GridField& h) {
  double s = 0.0;
  for (double v : h.values()) s += v;
  return s * h.grid()->cell_weight();
}

/// <g, h>_density = integral of g * h * density.
inline double inner_product(const GridField& g, const GridField& h,
                            const GridField& density) {
  check_same_grid(g, h);
  check_same_grid(g, density);
  double s = 0.0;
  const auto& gv = g.values();
  const auto& hv = h.values();
  const auto& qv = density.values();
  for (std::size_t k = 0; k < gv.size(); ++k) s += gv[k] * hv[k] * qv[k];
  return s * g.grid()->cell_weight();
}

/// 2-D inclusive prefix sum in index space: out(i,j) = sum over cells
/// (i',j') with i' <= i and j' <= j.
inline void prefix_sum_2d(const Grid& g, std::vector<double>& v) {
  const int n1 = g.n1(), n2 = g.n2();
  for (int i = 0; i < n1; ++i)
    for (int j = 1; j < n2; ++j) v[i * n2 + j] += v[i * n2 + j - 1];
  for (int i = 1; i < n1; ++i)
    for (int j = 0; j < n2; ++j) v[i * n2 + j] += v[(i - 1) * n2 + j];
}

/// Partial (cumulative) integral: at node x, the Darboux sum of h * density
/// over all cells t <= x componentwise, the node's own cell included.
inline GridField partial_integral(const GridField& h, const GridField& density) {
  check_same_grid(h, density);
  const Grid& g = *h.grid();
  std::vector<double> v(g.size());
  const double w = g.cell_weight();
  for (int k = 0; k < g.size(); ++k) v[k] = h[k] * density[k] * w;
  prefix_sum_2d(g, v);
  return GridField(h.grid(), std::move(v));
}

}  // namespace k2gof
