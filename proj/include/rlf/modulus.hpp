#pragma once

// Moduli of continuity rho, the functional
//     psi_delta(xi) = int_0^xi ds / (rho(s) + delta),
// its inverse, a fast tabulated form, and the Osgood divergence diagnostic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rlf/error.hpp"
#include "rlf/numerics.hpp"

namespace rlf {

enum class ModulusKind { linear, log, loglog, table };

/// A strictly increasing continuous rho with rho(0) = 0.
///
/// The log kind is s*log(1/s) on [0, e^-2] continued by s + e^-2; the loglog
/// kind is s*log(1/s)*log(log(1/s)) on [0, e^-e] continued linearly with the
/// matching slope (e - 2). Table moduli interpolate their samples as a power
/// law between neighbours, extrapolate that way toward 0, and continue
/// linearly past the last sample.
class Modulus {
 public:
  static Modulus linear() { return Modulus(ModulusKind::linear, 0.0); }
  static Modulus log() { return Modulus(ModulusKind::log, std::exp(-2.0)); }
  static Modulus loglog() { return Modulus(ModulusKind::loglog, std::exp(-std::numbers::e)); }

  static Modulus table(std::vector<double> s, std::vector<double> rho) {
    detail::require(s.size() >= 2 && s.size() == rho.size(),
                    "Modulus::table: need at least two (s, rho) samples");
    for (std::size_t i = 0; i < s.size(); ++i) {
      detail::require(s[i] > 0.0 && rho[i] > 0.0, "Modulus::table: samples must be positive");
      if (i > 0) {
        detail::require(s[i] > s[i - 1] && rho[i] > rho[i - 1],
                        "Modulus::table: samples must be strictly increasing");
      }
    }
    Modulus m(ModulusKind::table, s.back());
    m.table_s_ = std::move(s);
    m.table_rho_ = std::move(rho);
    for (std::size_t i = 0; i + 1 < m.table_s_.size(); ++i) {
      m.table_pow_.push_back(std::log(m.table_rho_[i + 1] / m.table_rho_[i]) /
                             std::log(m.table_s_[i + 1] / m.table_s_[i]));
    }
    return m;
  }

  /// Samples f at the given points; convenience for power-law test moduli.
  template <class Fn>
  static Modulus sampled(Fn&& f, std::vector<double> s) {
    std::vector<double> r;
    r.reserve(s.size());
    for (double v : s) r.push_back(f(v));
    return table(std::move(s), std::move(r));
  }

  static Modulus from_name(std::string_view name) {
    if (name == "linear") return linear();
    if (name == "log") return log();
    if (name == "loglog") return loglog();
    throw InvalidArgument("unknown modulus kind '" + std::string(name) +
                          "' (expected linear | log | loglog | custom-table)");
  }

  ModulusKind kind() const { return kind_; }
  double breakpoint() const { return breakpoint_; }

  std::string name() const {
    switch (kind_) {
      case ModulusKind::linear:
        return "linear";
      case ModulusKind::log:
        return "log";
      case ModulusKind::loglog:
        return "loglog";
      case ModulusKind::table:
        return "custom-table";
    }
    return "?";
  }

  double operator()(double s) const {
    if (s <= 0.0) return 0.0;
    switch (kind_) {
      case ModulusKind::linear:
        return s;
      case ModulusKind::log:
        return s <= breakpoint_ ? s * std::log(1.0 / s) : s + breakpoint_;
      case ModulusKind::loglog: {
        if (s <= breakpoint_) {
          const double l = std::log(1.0 / s);
          return s * l * std::log(l);
        }
        return breakpoint_ * std::numbers::e + (std::numbers::e - 2.0) * (s - breakpoint_);
      }
      case ModulusKind::table:
        return table_value(s);
    }
    return 0.0;
  }

  /// rho'(s) for s > 0 (right derivative at kinks).
  double derivative(double s) const {
    switch (kind_) {
      case ModulusKind::linear:
        return 1.0;
      case ModulusKind::log:
        return s < breakpoint_ ? std::log(1.0 / s) - 1.0 : 1.0;
      case ModulusKind::loglog: {
        if (s < breakpoint_) {
          const double l = std::log(1.0 / s);
          return l * std::log(l) - std::log(l) - 1.0;
        }
        return std::numbers::e - 2.0;
      }
      case ModulusKind::table: {
        if (s >= table_s_.back()) return table_pow_.back() * table_rho_.back() / table_s_.back();
        const std::size_t i = segment(s);
        return table_pow_[i] * table_value(s) / s;
      }
    }
    return 0.0;
  }

 private:
  Modulus(ModulusKind kind, double breakpoint) : kind_(kind), breakpoint_(breakpoint) {}

  std::size_t segment(double s) const {
    const auto it = std::upper_bound(table_s_.begin(), table_s_.end(), s);
    const std::size_t hi = static_cast<std::size_t>(it - table_s_.begin());
    return std::min(hi == 0 ? 0 : hi - 1, table_pow_.size() - 1);
  }

  double table_value(double s) const {
    if (s >= table_s_.back()) {
      const double slope = table_pow_.back() * table_rho_.back() / table_s_.back();
      return table_rho_.back() + slope * (s - table_s_.back());
    }
    const std::size_t i = segment(s);
    return table_rho_[i] * std::pow(s / table_s_[i], table_pow_[i]);
  }

  ModulusKind kind_;
  double breakpoint_;
  std::vector<double> table_s_;
  std::vector<double> table_rho_;
  std::vector<double> table_pow_;
};

/// rho(s), rejecting negative arguments.
inline double eval_rho(const Modulus& m, double s) {
  detail::require(s >= 0.0, "eval_rho: s must be non-negative");
  return m(s);
}

namespace detail {

/// Integrates f over [a, b] split at a + w0*(2^k - 1) and at `extra`, which
/// keeps panels aligned with the scale of a near-origin peak.
template <class Fn>
QuadratureResult integrate_graded(Fn&& f, double a, double b, double w0, double tol,
                                  double extra = -1.0) {
  std::vector<double> edges{a};
  double span = w0;
  while (a + span < b) {
    edges.push_back(a + span);
    span = 2.0 * span + w0;
  }
  edges.push_back(b);
  if (extra > a && extra < b) {
    edges.push_back(extra);
    std::sort(edges.begin(), edges.end());
  }
  QuadratureResult total;
  total.nodes = 0;
  const double share = tol / static_cast<double>(edges.size() - 1);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (edges[i + 1] <= edges[i]) continue;
    const QuadratureResult q = integrate_1d(f, edges[i], edges[i + 1], share);
    total.value += q.value;
    total.error += q.error;
    total.nodes += q.nodes;
  }
  total.nodes = std::max<std::size_t>(total.nodes, 1);
  return total;
}

}  // namespace detail

inline constexpr double kPsiTolerance = 1e-8;
inline constexpr double kPsiInverseTolerance = 1e-10;

/// psi_delta for a fixed modulus; immutable after construction.
struct PsiFunctional {
  Modulus modulus = Modulus::linear();
  double delta = 1.0;
  double tol = kPsiTolerance;

  PsiFunctional() = default;
  PsiFunctional(Modulus m, double delta_, double tol_ = kPsiTolerance)
      : modulus(std::move(m)), delta(delta_), tol(tol_) {
    detail::require(delta > 0.0, "PsiFunctional: delta must be positive");
    detail::require(tol > 0.0, "PsiFunctional: tolerance must be positive");
  }

  double integrand(double s) const { return 1.0 / (modulus(s) + delta); }

  /// int_a^b ds / (rho(s) + delta) with the full tolerance.
  QuadratureResult integral(double a, double b) const {
    if (b <= a) return {};
    const double w0 = std::min(b - a, std::max(delta / 64.0, (b - a) * 1e-12));
    const double extra = modulus.breakpoint();
    return detail::integrate_graded([this](double s) { return integrand(s); }, a, b, w0, tol,
                                    extra);
  }

  double operator()(double xi) const { return integral(0.0, xi).value; }
};

inline double psi(const PsiFunctional& p, double xi) {
  detail::require(xi >= 0.0, "psi: xi must be non-negative");
  return p(xi);
}

/// xi with psi_delta(xi) = t. The bracket starts at t*delta (psi <= xi/delta)
/// and doubles until it encloses t.
inline double psi_inverse(const PsiFunctional& p, double t, double tol = kPsiInverseTolerance,
                          int growth_budget = 1100) {
  detail::require(t >= 0.0, "psi_inverse: t must be non-negative");
  if (t == 0.0) return 0.0;
  double lo = t * p.delta;
  double psi_lo = p(lo);
  if (std::abs(psi_lo - t) <= tol) return lo;
  double hi = lo;
  double psi_hi = psi_lo;
  int grown = 0;
  while (psi_hi < t) {
    if (++grown > growth_budget) {
      throw BudgetExceeded("psi_inverse: bracket growth budget exceeded");
    }
    const double next = 2.0 * hi;
    if (!(next < 1e300) || !std::isfinite(psi_hi)) {
      throw BudgetExceeded("psi_inverse: bracket overflowed before enclosing the target");
    }
    lo = hi;
    psi_lo = psi_hi;
    psi_hi += p.integral(hi, next).value;
    hi = next;
  }
  const double base = lo;
  const double base_value = psi_lo;
  return invert_monotone(
      [&](double x) { return base_value + p.integral(base, x).value; }, t, lo, hi, tol);
}

/// Cubic-Hermite tabulation of psi_delta on [0, xi_max] for hot loops.
///
/// Nodes are 0 followed by a geometric mesh (per_decade nodes per decade)
/// from min(delta, xi_max)*1e-6; panel integrals use 10-point Gauss-Legendre
/// and the Hermite slopes are the exact derivative 1/(rho + delta).
class PsiTable {
 public:
  PsiTable(const Modulus& m, double delta, double xi_max, int per_decade = 128)
      : psi_(m, delta), xi_max_(xi_max) {
    detail::require(xi_max > 0.0, "PsiTable: xi_max must be positive");
    detail::require(per_decade >= 8, "PsiTable: per_decade too small");
    xi_min_ = std::min(delta, xi_max) * 1e-6;
    log_ratio_ = std::log(10.0) / per_decade;
    nodes_.push_back(0.0);
    for (int k = 0;; ++k) {
      const double x = xi_min_ * std::exp(log_ratio_ * k);
      if (x >= xi_max_) break;
      nodes_.push_back(x);
    }
    nodes_.push_back(xi_max_);
    values_.assign(nodes_.size(), 0.0);
    slopes_.assign(nodes_.size(), 0.0);
    slopes_[0] = psi_.integrand(0.0);
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
      values_[i] = values_[i - 1] + gauss_legendre(nodes_[i - 1], nodes_[i]);
      slopes_[i] = psi_.integrand(nodes_[i]);
    }
  }

  double delta() const { return psi_.delta; }
  double xi_max() const { return xi_max_; }
  const PsiFunctional& functional() const { return psi_; }

  double operator()(double xi) const {
    if (xi <= 0.0) return 0.0;
    if (xi >= xi_max_) {
      if (xi == xi_max_) return values_.back();
      return values_.back() + psi_.integral(xi_max_, xi).value;
    }
    std::size_t i = 0;
    if (xi > xi_min_) {
      i = 1 + static_cast<std::size_t>(std::log(xi / xi_min_) / log_ratio_);
      i = std::min(i, nodes_.size() - 2);
      while (i > 0 && nodes_[i] > xi) --i;
      while (i + 2 < nodes_.size() && nodes_[i + 1] < xi) ++i;
    }
    const double x0 = nodes_[i];
    const double x1 = nodes_[i + 1];
    const double w = x1 - x0;
    const double u = (xi - x0) / w;
    const double u2 = u * u;
    const double u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * values_[i] + (u3 - 2 * u2 + u) * w * slopes_[i] +
           (-2 * u3 + 3 * u2) * values_[i + 1] + (u3 - u2) * w * slopes_[i + 1];
  }

 private:
  double gauss_legendre(double a, double b) const {
    static constexpr double kX[5] = {0.1488743389816312, 0.4333953941292472, 0.6794095682990244,
                                     0.8650633666889845, 0.9739065285171717};
    static constexpr double kW[5] = {0.2955242247147529, 0.2692667193099963, 0.2190863625159820,
                                     0.1494513491505806, 0.0666713443086881};
    const double c = 0.5 * (a + b);
    const double r = 0.5 * (b - a);
    double s = 0.0;
    for (int k = 0; k < 5; ++k) {
      s += kW[k] * (psi_.integrand(c - r * kX[k]) + psi_.integrand(c + r * kX[k]));
    }
    return s * r;
  }

  PsiFunctional psi_;
  double xi_max_;
  double xi_min_ = 0.0;
  double log_ratio_ = 0.0;
  std::vector<double> nodes_;
  std::vector<double> values_;
  std::vector<double> slopes_;
};

struct OsgoodTable {
  std::vector<double> eps;
  std::vector<double> values;  ///< int_eps^cutoff ds / rho(s)
  double cutoff = 0.0;
  double growth = 0.0;         ///< values.back() / values.front()
  bool osgood = false;
};

inline constexpr double kOsgoodGrowthFactor = 3.0;

/// Tabulates int_eps^cutoff ds/rho(s) along a decreasing eps list. The
/// verdict is a heuristic: "Osgood" when the last value exceeds the first
/// by growth_factor.
inline OsgoodTable check_osgood(const Modulus& m, std::vector<double> eps, double cutoff,
                                double growth_factor = kOsgoodGrowthFactor) {
  detail::require(!eps.empty(), "check_osgood: empty eps list");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    detail::require(eps[i] > 0.0 && eps[i] < cutoff, "check_osgood: eps must lie in (0, cutoff)");
    if (i > 0) detail::require(eps[i] < eps[i - 1], "check_osgood: eps list must decrease");
  }
  OsgoodTable out;
  out.cutoff = cutoff;
  for (double e : eps) {
    const auto q = detail::integrate_graded([&](double s) { return 1.0 / m(s); }, e, cutoff, e,
                                            1e-10, m.breakpoint());
    out.values.push_back(q.value);
  }
  out.eps = std::move(eps);
  out.growth = out.values.front() > 0.0 ? out.values.back() / out.values.front()
                                        : std::numeric_limits<double>::infinity();
  out.osgood = out.growth >= growth_factor;
  return out;
}

}  // namespace rlf
