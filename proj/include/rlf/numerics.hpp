#pragma once

// Grids on centered balls, ball quadrature, adaptive 1-D quadrature and
// monotone inversion. Everything here is a pure function of its inputs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rlf/error.hpp"

namespace rlf {

inline constexpr int kMaxDim = 3;

/// A point of R^d stored in a fixed 3-slot array; unused slots stay zero.
using Point = std::array<double, kMaxDim>;
using LatticeIndex = std::array<int, kMaxDim>;

inline Point operator+(const Point& a, const Point& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Point operator-(const Point& a, const Point& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Point operator*(double s, const Point& a) { return {s * a[0], s * a[1], s * a[2]}; }

inline double norm(const Point& p) { return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]); }
inline double distance(const Point& a, const Point& b) { return norm(a - b); }

/// Volume of the d-dimensional ball of radius r (d <= 3).
inline double ball_measure(int d, double r) {
  detail::require(r >= 0.0, "ball_measure: radius must be non-negative");
  switch (d) {
    case 1:
      return 2.0 * r;
    case 2:
      return std::numbers::pi * r * r;
    case 3:
      return 4.0 * std::numbers::pi / 3.0 * r * r * r;
    default:
      throw InvalidArgument("ball_measure: dimension must be 1, 2 or 3");
  }
}

/// All lattice points h*i (i integer) inside the closed ball B(R) of R^d.
///
/// Points are ordered lexicographically in their lattice index with the
/// last axis varying fastest. A dense index box makes lattice lookups O(1).
class PointGrid {
 public:
  PointGrid() = default;

  int dimension() const { return dim_; }
  double radius() const { return radius_; }
  double spacing() const { return spacing_; }
  double cell_volume() const { return std::pow(spacing_, dim_); }
  std::size_t size() const { return points_.size(); }
  std::span<const Point> points() const { return points_; }
  const Point& operator[](std::size_t i) const { return points_[i]; }
  const LatticeIndex& lattice_index(std::size_t i) const { return lattice_[i]; }
  int half_extent() const { return extent_; }

  /// Index of the grid point with the given lattice coordinates, if present.
  std::optional<std::size_t> find(const LatticeIndex& idx) const {
    std::size_t flat = 0;
    for (int k = 0; k < dim_; ++k) {
      if (idx[k] < -extent_ || idx[k] > extent_) return std::nullopt;
      flat = flat * side() + static_cast<std::size_t>(idx[k] + extent_);
    }
    for (int k = dim_; k < kMaxDim; ++k) {
      if (idx[k] != 0) return std::nullopt;
    }
    const std::int64_t v = box_[flat];
    if (v < 0) return std::nullopt;
    return static_cast<std::size_t>(v);
  }

  /// True when B(c, r) lies inside the sampled ball (up to rounding).
  bool contains_ball(const Point& c, double r) const {
    return norm(c) + r <= radius_ + 1e-9 * spacing_;
  }

  /// Calls fn(index) for every grid point y with |y - c| <= r.
  template <class Fn>
  void for_each_in_ball(const Point& c, double r, Fn&& fn) const {
    const double slack = 1e-9 * spacing_;
    LatticeIndex lo{0, 0, 0};
    LatticeIndex hi{0, 0, 0};
    for (int k = 0; k < dim_; ++k) {
      lo[k] = std::max(-extent_, static_cast<int>(std::ceil((c[k] - r) / spacing_ - 1e-9)));
      hi[k] = std::min(extent_, static_cast<int>(std::floor((c[k] + r) / spacing_ + 1e-9)));
      if (lo[k] > hi[k]) return;
    }
    const double r_eff = r + slack;
    LatticeIndex idx = lo;
    while (true) {
      if (auto i = find(idx)) {
        if (distance(points_[*i], c) <= r_eff) fn(*i);
      }
      int k = dim_ - 1;
      while (k >= 0) {
        if (++idx[k] <= hi[k]) break;
        idx[k] = lo[k];
        --k;
      }
      if (k < 0) break;
    }
  }

  /// Grid point closest to x (x is first pulled into the sampled ball).
  std::size_t nearest(const Point& x) const {
    Point y = x;
    const double r = norm(y);
    if (r > radius_) y = (radius_ / r) * y;
    LatticeIndex idx{0, 0, 0};
    for (int k = 0; k < dim_; ++k) {
      idx[k] = std::clamp(static_cast<int>(std::lround(y[k] / spacing_)), -extent_, extent_);
    }
    if (auto i = find(idx)) return *i;
    // Rounding pushed the index just outside the ball: shrink toward 0.
    for (int shrink = 1; shrink <= extent_ + 1; ++shrink) {
      LatticeIndex s = idx;
      for (int k = 0; k < dim_; ++k) {
        if (s[k] > 0) s[k] = std::max(0, s[k] - shrink);
        if (s[k] < 0) s[k] = std::min(0, s[k] + shrink);
      }
      if (auto i = find(s)) return *i;
    }
    return 0;
  }

 private:
  friend PointGrid make_grid(int d, double radius, double spacing);

  std::size_t side() const { return static_cast<std::size_t>(2 * extent_ + 1); }

  int dim_ = 1;
  double radius_ = 0.0;
  double spacing_ = 0.0;
  int extent_ = 0;
  std::vector<Point> points_;
  std::vector<LatticeIndex> lattice_;
  std::vector<std::int64_t> box_;
};

inline PointGrid make_grid(int d, double radius, double spacing) {
  detail::require(d >= 1 && d <= kMaxDim, "make_grid: dimension must be 1, 2 or 3");
  detail::require(radius > 0.0, "make_grid: radius must be positive");
  detail::require(spacing > 0.0, "make_grid: spacing must be positive");
  if (spacing >= radius) {
    throw InvalidArgument("make_grid: degenerate grid (spacing >= radius)");
  }
  PointGrid g;
  g.dim_ = d;
  g.radius_ = radius;
  g.spacing_ = spacing;
  g.extent_ = static_cast<int>(std::floor(radius / spacing + 1e-9));
  std::size_t total = 1;
  for (int k = 0; k < d; ++k) total *= g.side();
  g.box_.assign(total, -1);

  const double r_eff = radius * (1.0 + 1e-12);
  LatticeIndex idx{0, 0, 0};
  d = std::min(d, kMaxDim);  // already checked; spelled out for the optimiser
  for (int k = 0; k < d; ++k) idx[k] = -g.extent_;
  for (std::size_t flat = 0; flat < total; ++flat) {
    Point p{0.0, 0.0, 0.0};
    for (int k = 0; k < d; ++k) p[k] = idx[k] * spacing;
    if (norm(p) <= r_eff) {
      g.box_[flat] = static_cast<std::int64_t>(g.points_.size());
      g.points_.push_back(p);
      g.lattice_.push_back(idx);
    }
    for (int k = d - 1; k >= 0; --k) {
      if (++idx[k] <= g.extent_) break;
      idx[k] = -g.extent_;
    }
  }
  return g;
}

/// Mean of the samples at grid points inside B(center, r).
inline double ball_average(const PointGrid& grid, std::span<const double> samples,
                           const Point& center, double r) {
  detail::require(r > 0.0, "ball_average: radius must be positive");
  detail::require(samples.size() == grid.size(), "ball_average: sample count mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  grid.for_each_in_ball(center, r, [&](std::size_t i) {
    sum += samples[i];
    ++count;
  });
  if (count == 0) throw EmptyBall("ball_average: no grid point inside the ball");
  return sum / static_cast<double>(count);
}

/// Riemann sum of f over the grid: sum f(x_i) h^d.
template <class Fn>
double grid_integral(const PointGrid& grid, Fn&& f) {
  double sum = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) sum += f(grid[i]);
  return sum * grid.cell_volume();
}

/// Samples living on a PointGrid, evaluable anywhere by multilinear
/// interpolation. Off-grid corners fall back to the nearest grid point.
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(PointGrid grid, std::vector<double> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    detail::require(values_.size() == grid_.size(), "GridFunction: sample count mismatch");
  }

  const PointGrid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }

  double operator()(const Point& x) const {
    const int d = grid_.dimension();
    const double h = grid_.spacing();
    LatticeIndex base{0, 0, 0};
    Point frac{0.0, 0.0, 0.0};
    for (int k = 0; k < d; ++k) {
      const double u = x[k] / h;
      base[k] = static_cast<int>(std::floor(u));
      frac[k] = u - base[k];
    }
    double acc = 0.0;
    const int corners = 1 << d;
    for (int c = 0; c < corners; ++c) {
      LatticeIndex idx = base;
      double w = 1.0;
      for (int k = 0; k < d; ++k) {
        const bool up = (c >> k) & 1;
        idx[k] += up ? 1 : 0;
        w *= up ? frac[k] : 1.0 - frac[k];
      }
      auto i = grid_.find(idx);
      if (!i) return values_[grid_.nearest(x)];
      acc += w * values_[*i];
    }
    return acc;
  }

 private:
  PointGrid grid_;
  std::vector<double> values_;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t nodes = 1;
};

inline constexpr std::size_t kQuadratureNodeBudget = 1'000'000;

/// Adaptive Simpson quadrature of f over [a, b].
///
/// Each panel is accepted once the two-half Simpson estimate agrees with the
/// whole-panel estimate to 15*tol_panel; tolerances halve on bisection. The
/// returned error is the sum of accepted panel estimates.
template <class Fn>
QuadratureResult integrate_1d(Fn&& f, double a, double b, double tol,
                              std::size_t node_budget = kQuadratureNodeBudget) {
  detail::require(a <= b, "integrate_1d: requires a <= b");
  detail::require(tol > 0.0, "integrate_1d: tolerance must be positive");
  QuadratureResult out;
  if (a == b) return out;

  struct Panel {
    double a, b, fa, fm, fb, whole, tol;
    int depth;
  };
  constexpr int kInitialPanels = 8;
  constexpr int kMaxDepth = 60;
  std::vector<Panel> stack;
  stack.reserve(256);

  const double width = (b - a) / kInitialPanels;
  std::vector<double> xs(2 * kInitialPanels + 1);
  std::vector<double> fs(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = (i + 1 == xs.size()) ? b : a + 0.5 * width * static_cast<double>(i);
    fs[i] = f(xs[i]);
  }
  out.nodes = xs.size();
  for (int p = kInitialPanels - 1; p >= 0; --p) {
    const std::size_t l = 2 * static_cast<std::size_t>(p);
    const double whole = (xs[l + 2] - xs[l]) / 6.0 * (fs[l] + 4.0 * fs[l + 1] + fs[l + 2]);
    stack.push_back({xs[l], xs[l + 2], fs[l], fs[l + 1], fs[l + 2], whole, tol / kInitialPanels, 0});
  }

  double value = 0.0;
  double error = 0.0;
  while (!stack.empty()) {
    const Panel p = stack.back();
    stack.pop_back();
    const double m = 0.5 * (p.a + p.b);
    const double lm = 0.5 * (p.a + m);
    const double rm = 0.5 * (m + p.b);
    const double flm = f(lm);
    const double frm = f(rm);
    out.nodes += 2;
    if (out.nodes > node_budget) {
      throw BudgetExceeded("integrate_1d: node budget of " + std::to_string(node_budget) +
                           " exceeded");
    }
    const double left = (m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
    const double right = (p.b - m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
    const double diff = left + right - p.whole;
    if (std::abs(diff) <= 15.0 * p.tol || p.depth >= kMaxDepth || !(lm > p.a && rm < p.b)) {
      value += left + right + diff / 15.0;
      error += std::abs(diff) / 15.0;
    } else {
      stack.push_back({m, p.b, p.fm, frm, p.fb, right, 0.5 * p.tol, p.depth + 1});
      stack.push_back({p.a, m, p.fa, flm, p.fm, left, 0.5 * p.tol, p.depth + 1});
    }
  }
  out.value = value;
  out.error = error;
  return out;
}

/// Bisection for x in [lo, hi] with |f(x) - target| <= tol, f increasing.
template <class Fn>
double invert_monotone(Fn&& f, double target, double lo, double hi, double tol) {
  detail::require(lo <= hi, "invert_monotone: requires lo <= hi");
  detail::require(tol > 0.0, "invert_monotone: tolerance must be positive");
  const double flo = f(lo);
  const double fhi = f(hi);
  if (target < flo - tol || target > fhi + tol) {
    throw BracketError("invert_monotone: target outside [f(lo), f(hi)]");
  }
  if (std::abs(flo - target) <= tol) return lo;
  if (std::abs(fhi - target) <= tol) return hi;
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (std::abs(fm - target) <= tol) return mid;
    if (fm < target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi))) {
      break;
    }
  }
  return mid;
}

}  // namespace rlf
