#pragma once

// Vector fields with their (H)-witnesses and divergence data, the bump
// mollifier, local maximal functions and witness calibration.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

#include "rlf/error.hpp"
#include "rlf/modulus.hpp"
#include "rlf/numerics.hpp"
#include "rlf/report.hpp"
#include "rlf/series.hpp"

namespace rlf {

using ScalarFn = std::function<double(double, const Point&)>;
using VectorFn = std::function<Point(double, const Point&)>;

enum class WitnessProvenance { analytic_constant, maximal_function, mollified, calibrated };

inline std::string to_string(WitnessProvenance p) {
  switch (p) {
    case WitnessProvenance::analytic_constant:
      return "analytic-constant";
    case WitnessProvenance::maximal_function:
      return "maximal-function-based";
    case WitnessProvenance::mollified:
      return "mollified";
    case WitnessProvenance::calibrated:
      return "calibrated";
  }
  return "?";
}

/// The function g of the pairwise bound
///   |b_t(x) - b_t(y)| <= (g_t(x) + g_t(y)) rho(|x - y|).
struct Witness {
  ScalarFn value;
  WitnessProvenance provenance = WitnessProvenance::analytic_constant;
  Modulus modulus = Modulus::linear();
  std::optional<double> constant;  ///< set when g is constant in (t, x)

  double operator()(double t, const Point& x) const { return value(t, x); }

  static Witness constant_value(double c, Modulus m, WitnessProvenance p) {
    Witness w;
    w.value = [c](double, const Point&) { return c; };
    w.provenance = p;
    w.modulus = std::move(m);
    w.constant = c;
    return w;
  }
};

struct VectorField {
  std::string id;
  int dim = 1;
  VectorFn eval;
  double sup_norm = 0.0;
  std::optional<Witness> witness;
  ScalarFn divergence;                  ///< empty when unavailable
  double divergence_negative_sup = 0.0; ///< sup_x [div b_t]^-, all t
  ScalarFn gradient_norm;               ///< |grad b| off the singular set, if known
  std::vector<Point> singular_points;
  bool autonomous = true;
  int level = 0;                        ///< mollification level, 0 when unmollified
  int terms = 0;                        ///< series truncation K, 0 when unused
  std::function<VectorField(int)> mollifier;  ///< specialised b * chi_n

  Point operator()(double t, const Point& x) const { return eval(t, x); }

  /// exp(int_0^T ||[div b_t]^-||_inf dt).
  double compressibility_bound(double T) const {
    return std::exp(T * divergence_negative_sup);
  }
};

/// Catalog parameters; each id reads the subset it needs.
struct FieldParams {
  int dim = 1;
  Point velocity{1.0, 0.0, 0.0};  ///< constant
  std::array<double, 9> matrix{-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0};  ///< linear, row-major
  double working_radius = 4.0;    ///< linear: exact inside, cut off past radius + 1
  int terms = kDefaultSeriesTerms;
  double alpha = 0.3;             ///< sobolev-singular exponent
  double cap = 2.0;               ///< sobolev-singular value cap
  double witness_radius = 10.0;   ///< calibration grid radius
  double witness_spacing = 0.01;
  double maximal_radius = 1.0;    ///< R in M_R |grad b|
  std::size_t calibration_pairs = 10000;
  std::size_t osgood_pairs = 20000;
  double witness_margin = 1.05;   ///< safety factor on sampled constants
  std::uint64_t seed = 1;
};

inline const std::vector<std::string>& catalog_ids() {
  static const std::vector<std::string> ids{"constant", "linear", "osgood-sum", "sobolev-singular",
                                            "combined"};
  return ids;
}

// ---------------------------------------------------------------------------
// Mollifier

/// Tensor-product midpoint rule for the bump scaled to radius 1/n.
class MollifierKernel {
 public:
  static constexpr int kDefaultNodes = 49;

  MollifierKernel(int level, int dim, int nodes = kDefaultNodes)
      : level_(level), dim_(dim), nodes_(nodes) {
    detail::require(level >= 1, "MollifierKernel: level must be >= 1");
    detail::require(dim >= 1 && dim <= kMaxDim, "MollifierKernel: dimension must be 1, 2 or 3");
    detail::require(nodes >= 3, "MollifierKernel: need at least 3 nodes per axis");
    const BumpProfile bump(dim);
    const double du = 2.0 / nodes;
    const double cell = std::pow(du, dim);
    const int total = static_cast<int>(std::pow(nodes, dim));
    raw_mass_ = 0.0;
    for (int flat = 0; flat < total; ++flat) {
      Point u{0.0, 0.0, 0.0};
      int rest = flat;
      for (int k = dim - 1; k >= 0; --k) {
        u[k] = -1.0 + (rest % nodes + 0.5) * du;
        rest /= nodes;
      }
      const double w = bump.density_r2(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]) * cell;
      if (w <= 0.0) continue;
      offsets_.push_back((1.0 / level) * u);
      weights_.push_back(w);
      raw_mass_ += w;
    }
    for (double& w : weights_) w /= raw_mass_;
  }

  int level() const { return level_; }
  int dimension() const { return dim_; }
  int nodes_per_axis() const { return nodes_; }
  double support_radius() const { return 1.0 / level_; }
  /// Quadrature mass before renormalisation.
  double raw_mass() const { return raw_mass_; }
  std::span<const Point> offsets() const { return offsets_; }
  std::span<const double> weights() const { return weights_; }

  /// sum_j w_j f(x - z_j).
  template <class Fn>
  auto apply(Fn&& f, const Point& x) const {
    using R = decltype(f(x));
    R acc{};
    for (std::size_t j = 0; j < offsets_.size(); ++j) {
      const R v = f(x - offsets_[j]);
      if constexpr (std::is_same_v<R, Point>) {
        acc = acc + weights_[j] * v;
      } else {
        acc += weights_[j] * v;
      }
    }
    return acc;
  }

 private:
  int level_;
  int dim_;
  int nodes_;
  double raw_mass_ = 0.0;
  std::vector<Point> offsets_;
  std::vector<double> weights_;
};

namespace detail {

inline Witness convolve_witness(const Witness& g, std::shared_ptr<const MollifierKernel> k) {
  if (g.constant) {
    return Witness::constant_value(*g.constant, g.modulus, WitnessProvenance::mollified);
  }
  Witness w;
  w.provenance = WitnessProvenance::mollified;
  w.modulus = g.modulus;
  w.value = [gv = g.value, k](double t, const Point& x) {
    return k->apply([&](const Point& y) { return gv(t, y); }, x);
  };
  return w;
}

/// b * chi_n by the kernel's tensor quadrature; divergence data carried over.
inline VectorField convolve_field(const VectorField& b, int n, int nodes) {
  auto k = std::make_shared<const MollifierKernel>(n, b.dim, nodes);
  VectorField out;
  out.id = b.id;
  out.dim = b.dim;
  out.sup_norm = b.sup_norm;
  out.autonomous = b.autonomous;
  out.level = n;
  out.terms = b.terms;
  out.eval = [ev = b.eval, k](double t, const Point& x) {
    return k->apply([&](const Point& y) { return ev(t, y); }, x);
  };
  if (b.witness) out.witness = convolve_witness(*b.witness, k);
  if (b.divergence) {
    out.divergence = [dv = b.divergence, k](double t, const Point& x) {
      return k->apply([&](const Point& y) { return dv(t, y); }, x);
    };
  }
  // ||[div b^n]^-||_inf <= ||[div b]^-||_inf
  out.divergence_negative_sup = b.divergence_negative_sup;
  return out;
}

inline double frobenius(const std::array<double, 9>& a, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) s += a[3 * i + j] * a[3 * i + j];
  }
  return std::sqrt(s);
}

inline Point mat_vec(const std::array<double, 9>& a, const Point& x, int d) {
  Point y{0.0, 0.0, 0.0};
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) y[i] += a[3 * i + j] * x[j];
  }
  return y;
}

// C-infinity step: 1 for u >= 1, 0 for u <= 0.
inline double smooth_step(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / u);
  const double b = std::exp(-1.0 / (1.0 - u));
  return a / (a + b);
}

inline double smooth_step_derivative(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  const double a = std::exp(-1.0 / u);
  const double b = std::exp(-1.0 / (1.0 - u));
  const double da = a / (u * u);
  const double db = -b / ((1.0 - u) * (1.0 - u));
  return (da * (a + b) - a * (da + db)) / ((a + b) * (a + b));
}

/// Sampled constant of the series field, cached per K.
inline double osgood_constant_cached(int K, std::size_t pairs, std::uint64_t seed) {
  static std::mutex mu;
  static std::map<std::tuple<int, std::size_t, std::uint64_t>, double> cache;
  const auto key = std::make_tuple(K, pairs, seed);
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const double c = measure_osgood_constant(K, pairs, seed).value;
  std::lock_guard<std::mutex> lock(mu);
  cache[key] = c;
  return c;
}

}  // namespace detail

/// b^n = b * chi_n. Fields with a specialised convolution (the series
/// fields) use it; everything else goes through the tensor quadrature.
inline VectorField mollify(const VectorField& b, const MollifierKernel& kernel) {
  detail::require(kernel.dimension() == b.dim, "mollify: kernel dimension mismatch");
  if (b.mollifier) return b.mollifier(kernel.level());
  return detail::convolve_field(b, kernel.level(), kernel.nodes_per_axis());
}

inline VectorField mollify(const VectorField& b, int level) {
  return mollify(b, MollifierKernel(level, b.dim));
}

// ---------------------------------------------------------------------------
// Maximal functions

struct MaximalFunctionGrid {
  PointGrid grid;
  double radius_cap = 0.0;
  std::vector<double> radii;
  std::vector<double> values;
  std::vector<std::uint8_t> boundary;  ///< ball at some radius left the sampled ball

  GridFunction as_function() const { return GridFunction(grid, values); }
};

/// Radii R 2^-j, j = 0, 1, ... while >= min_radius.
inline std::vector<double> dyadic_radii(double R, double min_radius) {
  detail::require(R > 0.0 && min_radius > 0.0, "dyadic_radii: radii must be positive");
  detail::require(min_radius <= R, "dyadic_radii: min radius exceeds R");
  std::vector<double> r;
  for (double x = R; x >= min_radius * (1 - 1e-12); x *= 0.5) r.push_back(x);
  return r;
}

/// M_R f on the grid: the max of restricted ball averages of |f| over the
/// radii (default: dyadic down to the spacing).
inline MaximalFunctionGrid maximal_function(const PointGrid& grid, std::span<const double> f,
                                            double R, std::vector<double> radii = {}) {
  detail::require(f.size() == grid.size(), "maximal_function: sample count mismatch");
  if (radii.empty()) radii = dyadic_radii(R, grid.spacing());
  for (double r : radii) {
    detail::require(r >= grid.spacing() * (1 - 1e-12) && r <= R * (1 + 1e-12),
                    "maximal_function: radii must lie in [h, R]");
  }
  MaximalFunctionGrid out;
  out.grid = grid;
  out.radius_cap = R;
  out.radii = radii;
  out.values.assign(grid.size(), 0.0);
  out.boundary.assign(grid.size(), 0);

  if (grid.dimension() == 1) {
    // Points are sorted along the line: prefix sums give O(1) averages.
    std::vector<double> prefix(grid.size() + 1, 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) prefix[i + 1] = prefix[i] + std::abs(f[i]);
    const double h = grid.spacing();
    const long last = static_cast<long>(grid.size()) - 1;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double best = 0.0;
      for (double r : radii) {
        const long span = static_cast<long>(std::floor(r / h + 1e-9));
        const long lo = std::max(0L, static_cast<long>(i) - span);
        const long hi = std::min(last, static_cast<long>(i) + span);
        const double avg = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
        best = std::max(best, avg);
        if (!grid.contains_ball(grid[i], r)) out.boundary[i] = 1;
      }
      out.values[i] = best;
    }
    return out;
  }

  for (std::size_t i = 0; i < grid.size(); ++i) {
    double best = 0.0;
    for (double r : radii) {
      double sum = 0.0;
      std::size_t count = 0;
      grid.for_each_in_ball(grid[i], r, [&](std::size_t j) {
        sum += std::abs(f[j]);
        ++count;
      });
      best = std::max(best, sum / static_cast<double>(count));
      if (!grid.contains_ball(grid[i], r)) out.boundary[i] = 1;
    }
    out.values[i] = best;
  }
  return out;
}

struct WeakTypeRow {
  double alpha = 0.0;
  double superlevel_measure = 0.0;  ///< L^d{x in B(R) : M_lambda f > alpha}
  double ratio = 0.0;               ///< measure * alpha / int |f|
};

struct WeakTypeResult {
  std::vector<WeakTypeRow> rows;
  double integral = 0.0;            ///< int_{B(R + lambda)} |f|
  double measured_constant = 0.0;   ///< sup over alpha of the ratio
  EstimateReport report;
};

/// Superlevel sets of M_lambda f over B(R) against (1/alpha) int |f|.
///
/// The report compares the measured constant with the Vitali covering
/// constant 3^d, which bounds the centred maximal operator's weak-(1,1)
/// norm in every dimension.
inline WeakTypeResult weak_type_check(const PointGrid& grid, std::span<const double> f, double R,
                                      double lambda, const std::vector<double>& alphas) {
  detail::require(!alphas.empty(), "weak_type_check: empty alpha list");
  for (double a : alphas) detail::require(a > 0.0, "weak_type_check: alpha must be positive");
  detail::require(grid.radius() >= (R + lambda) * (1 - 1e-12),
                  "weak_type_check: grid must cover B(R + lambda)");
  const MaximalFunctionGrid M = maximal_function(grid, f, lambda);
  WeakTypeResult out;
  const double cell = grid.cell_volume();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (norm(grid[i]) <= (R + lambda) * (1 + 1e-12)) out.integral += std::abs(f[i]) * cell;
  }
  for (double a : alphas) {
    WeakTypeRow row;
    row.alpha = a;
    std::size_t count = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (norm(grid[i]) <= R * (1 + 1e-12) && M.values[i] > a) ++count;
    }
    row.superlevel_measure = static_cast<double>(count) * cell;
    row.ratio = out.integral > 0.0 ? row.superlevel_measure * a / out.integral : 0.0;
    out.measured_constant = std::max(out.measured_constant, row.ratio);
    out.rows.push_back(row);
  }
  EstimateReport& r = out.report;
  r.id = "lemma23";
  r.lhs = out.measured_constant;
  r.rhs = std::pow(3.0, grid.dimension());
  r.set("C_d_measured", out.measured_constant)
      .set("integral_abs_f", out.integral)
      .set("R", R)
      .set("lambda", lambda);
  r.meta("h", grid.spacing()).meta("d", grid.dimension());
  for (const auto& row : out.rows) {
    r.set("ratio@alpha=" + detail::real(row.alpha).dump(), row.ratio);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Witness calibration and pairwise checks

struct Calibration {
  double constant = 0.0;
  std::size_t pairs_used = 0;
  std::size_t pairs_skipped = 0;
  MaximalFunctionGrid maximal;
  Witness witness;
};

namespace detail {

inline bool near_singular(const VectorField& b, const Point& x, double zone) {
  for (const Point& s : b.singular_points) {
    if (distance(x, s) < zone) return true;
  }
  return false;
}

}  // namespace detail

/// Empirical C with |b(x) - b(y)| <= C |x - y| (M|grad b|(x) + M|grad b|(y)).
///
/// `grad` holds |grad b| at the grid points and M = M_R|grad b| is read back
/// through its multilinear interpolant, the same function the witness uses.
/// Base points are uniform in the grid's ball; partners are uniform there
/// for even pairs and at log-uniform separations in [h/1000, R] for odd
/// ones. Pairs within 2h of a singular point are excluded; 0/0 pairs count
/// as ratio 0, c/0 pairs are skipped. The attached witness is C * M.
inline Calibration calibrate_witness_constant(const VectorField& b, const PointGrid& grid,
                                              std::span<const double> grad, double R,
                                              std::size_t pairs, std::uint64_t seed = 1) {
  detail::require(pairs >= 1000, "calibrate_witness_constant: need at least 1000 pairs");
  detail::require(grad.size() == grid.size(), "calibrate_witness_constant: sample mismatch");
  Calibration out;
  out.maximal = maximal_function(grid, grad, R);
  auto M = std::make_shared<const GridFunction>(out.maximal.as_function());
  const double zone = 2.0 * grid.spacing();
  const double radius = grid.radius();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto in_ball = [&]() {
    Point x{0.0, 0.0, 0.0};
    do {
      for (int k = 0; k < b.dim; ++k) x[k] = radius * unit(rng);
    } while (norm(x) > radius);
    return x;
  };
  const double lmin = std::log(1e-3 * grid.spacing());
  const double lmax = std::log(std::max(R, grid.spacing()));
  for (std::size_t p = 0; p < pairs; ++p) {
    const Point x = in_ball();
    Point y;
    if (p % 2 == 0) {
      y = in_ball();
    } else {
      do {
        Point dir{0.0, 0.0, 0.0};
        double len = 0.0;
        while (len < 1e-12) {
          for (int k = 0; k < b.dim; ++k) dir[k] = gauss(rng);
          len = norm(dir);
        }
        const double sep = std::exp(lmin + (lmax - lmin) * u01(rng));
        y = x + (sep / len) * dir;
      } while (norm(y) > radius);
    }
    if (detail::near_singular(b, x, zone) || detail::near_singular(b, y, zone)) {
      ++out.pairs_skipped;
      continue;
    }
    const double num = norm(b(0.0, x) - b(0.0, y));
    const double den = distance(x, y) * ((*M)(x) + (*M)(y));
    if (den <= 0.0) {
      if (num > 0.0) {
        ++out.pairs_skipped;
        continue;
      }
      ++out.pairs_used;
      continue;
    }
    out.constant = std::max(out.constant, num / den);
    ++out.pairs_used;
  }
  if (out.pairs_used == 0) {
    throw CalibrationFailed("calibrate_witness_constant: every sampled pair was skipped");
  }
  const double C = out.constant;
  out.witness.value = [M, C](double, const Point& x) { return C * (*M)(x); };
  out.witness.provenance = WitnessProvenance::calibrated;
  out.witness.modulus = Modulus::linear();
  return out;
}

struct PairRatio {
  double max_ratio = 0.0;
  std::size_t pairs_used = 0;
  Point x{};
  Point y{};
};

/// max over sampled pairs of |b(x) - b(y)| / ((g(x) + g(y)) rho(|x - y|)),
/// x uniform in B(radius), separations log-uniform in [min_sep, radius].
inline PairRatio measure_h_ratio(const VectorField& b, double t, double radius, std::size_t pairs,
                                 std::uint64_t seed = 3, double exclusion = 0.0,
                                 double min_sep = 1e-6) {
  detail::require(b.witness.has_value(), "measure_h_ratio: field has no witness");
  const Witness& g = *b.witness;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  PairRatio out;
  const double lmin = std::log(min_sep);
  const double lmax = std::log(radius);
  for (std::size_t p = 0; p < pairs; ++p) {
    Point x{0.0, 0.0, 0.0};
    do {
      for (int k = 0; k < b.dim; ++k) x[k] = radius * unit(rng);
    } while (norm(x) > radius);
    Point dir{0.0, 0.0, 0.0};
    double len = 0.0;
    while (len < 1e-12) {
      for (int k = 0; k < b.dim; ++k) dir[k] = gauss(rng);
      len = norm(dir);
    }
    const double sep = std::exp(lmin + (lmax - lmin) * u01(rng));
    const Point y = x + (sep / len) * dir;
    if (exclusion > 0.0 &&
        (detail::near_singular(b, x, exclusion) || detail::near_singular(b, y, exclusion))) {
      continue;
    }
    const double num = norm(b(t, x) - b(t, y));
    const double den = (g(t, x) + g(t, y)) * g.modulus(distance(x, y));
    ++out.pairs_used;
    if (den <= 0.0) {
      if (num > 0.0) {
        out.max_ratio = std::numeric_limits<double>::infinity();
        out.x = x;
        out.y = y;
      }
      continue;
    }
    if (num / den > out.max_ratio) {
      out.max_ratio = num / den;
      out.x = x;
      out.y = y;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Divergence data and L1 norms

struct DivergenceTable {
  std::vector<double> times;
  std::vector<double> negative_sup;  ///< sup over the grid of max(0, -div b_t)
  bool analytic = false;
};

/// Per-time sup of [div b_t]^-. The catalog constant is used when
/// `prefer_analytic`; otherwise the evaluator (or a central difference with
/// step fd_step when none exists) is sampled on the grid.
inline DivergenceTable divergence_negative_part(const VectorField& b, const PointGrid& grid,
                                                const std::vector<double>& times,
                                                bool prefer_analytic = true,
                                                double fd_step = 1e-5) {
  DivergenceTable out;
  out.times = times;
  out.analytic = prefer_analytic;
  for (double t : times) {
    if (prefer_analytic) {
      out.negative_sup.push_back(b.divergence_negative_sup);
      continue;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Point& x = grid[i];
      double div = 0.0;
      if (b.divergence) {
        div = b.divergence(t, x);
      } else {
        for (int k = 0; k < b.dim; ++k) {
          Point xp = x;
          Point xm = x;
          xp[k] += fd_step;
          xm[k] -= fd_step;
          div += (b(t, xp)[k] - b(t, xm)[k]) / (2 * fd_step);
        }
      }
      worst = std::max(worst, -div);
    }
    out.negative_sup.push_back(worst);
  }
  return out;
}

/// int_0^T int_{B(radius)} f(t, x) dx dt by grid quadrature in space and,
/// for time-dependent integrands, a midpoint rule with `time_slices` slices.
template <class Fn>
double space_time_integral(Fn&& f, bool autonomous, double T, const PointGrid& grid,
                           int time_slices = 16) {
  if (autonomous) return T * grid_integral(grid, [&](const Point& x) { return f(0.0, x); });
  double sum = 0.0;
  for (int s = 0; s < time_slices; ++s) {
    const double t = (s + 0.5) * T / time_slices;
    sum += grid_integral(grid, [&](const Point& x) { return f(t, x); });
  }
  return sum * T / time_slices;
}

/// ||b - c||_{L1([0,T] x B(radius))}.
inline double field_l1_distance(const VectorField& b, const VectorField& c, double T,
                                const PointGrid& grid) {
  return space_time_integral(
      [&](double t, const Point& x) { return norm(b(t, x) - c(t, x)); },
      b.autonomous && c.autonomous, T, grid);
}

/// ||g||_{L1([0,T] x B(radius))}.
inline double witness_l1_norm(const Witness& g, double T, const PointGrid& grid,
                              bool autonomous = true) {
  if (g.constant) {
    return T * std::abs(*g.constant) * static_cast<double>(grid.size()) * grid.cell_volume();
  }
  return space_time_integral([&](double t, const Point& x) { return std::abs(g(t, x)); },
                             autonomous, T, grid);
}

// ---------------------------------------------------------------------------
// Catalog

namespace detail {

inline VectorField constant_field(const FieldParams& p) {
  VectorField b;
  b.id = "constant";
  b.dim = p.dim;
  Point v{0.0, 0.0, 0.0};
  for (int k = 0; k < p.dim; ++k) v[k] = p.velocity[k];
  b.eval = [v](double, const Point&) { return v; };
  b.sup_norm = norm(v);
  b.witness = Witness::constant_value(0.0, Modulus::linear(), WitnessProvenance::analytic_constant);
  b.divergence = [](double, const Point&) { return 0.0; };
  b.gradient_norm = [](double, const Point&) { return 0.0; };
  b.mollifier = [b](int n) {
    VectorField out = b;
    out.level = n;
    out.mollifier = nullptr;
    if (out.witness) out.witness->provenance = WitnessProvenance::mollified;
    return out;
  };
  return b;
}

inline VectorField linear_field(const FieldParams& p) {
  detail::require(p.working_radius > 0.0, "linear field: working radius must be positive");
  const int d = p.dim;
  const auto A = p.matrix;
  const double W = p.working_radius;
  const double normA = frobenius(A, d);
  // phi(r) = 1 on [0, W], 0 past W + 1; Lambda = sup (phi + r |phi'|).
  double lambda = 1.0;
  for (int i = 0; i <= 4000; ++i) {
    const double r = W + i / 4000.0;
    lambda = std::max(lambda, smooth_step(W + 1 - r) + r * smooth_step_derivative(W + 1 - r));
  }
  double trace = 0.0;
  for (int i = 0; i < d; ++i) trace += A[3 * i + i];

  VectorField b;
  b.id = "linear";
  b.dim = d;
  b.eval = [A, d, W](double, const Point& x) {
    const double phi = smooth_step(W + 1 - norm(x));
    return phi * mat_vec(A, x, d);
  };
  b.sup_norm = normA * (W + 1);
  Witness w;
  w.value = [normA, lambda, W](double, const Point& x) {
    return norm(x) <= W ? 0.5 * normA : normA * lambda;
  };
  w.provenance = WitnessProvenance::analytic_constant;
  w.modulus = Modulus::linear();
  b.witness = w;
  b.divergence = [A, d, W, trace](double, const Point& x) {
    const double r = norm(x);
    const double u = W + 1 - r;
    double div = trace * smooth_step(u);
    if (r > 0.0) {
      const Point Ax = mat_vec(A, x, d);
      double xAx = 0.0;
      for (int k = 0; k < d; ++k) xAx += x[k] * Ax[k];
      div -= smooth_step_derivative(u) * xAx / r;
    }
    return div;
  };
  // Dynamics live inside B(W), where div b = tr A.
  b.divergence_negative_sup = std::max(0.0, -trace);
  b.gradient_norm = [A, d, W](double, const Point& x) {
    const double r = norm(x);
    const double u = W + 1 - r;
    const double phi = smooth_step(u);
    if (r >= W + 1) return 0.0;
    if (r <= W) return frobenius(A, d);
    const double dphi = -smooth_step_derivative(u);
    const Point Ax = mat_vec(A, x, d);
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        const double J = A[3 * i + j] * phi + Ax[i] * dphi * x[j] / r;
        s += J * J;
      }
    }
    return std::sqrt(s);
  };
  return b;
}

inline VectorField osgood_sum_field(const FieldParams& p) {
  const int d = p.dim;
  const int K = p.terms;
  detail::require(K >= 1, "osgood-sum: K must be positive");
  const double c2 = osgood_constant_cached(K, p.osgood_pairs, p.seed);
  // |b(x) - b(y)| <= sqrt(d) C2 rho(|x - y|) componentwise
  const double g = 0.5 * std::sqrt(static_cast<double>(d)) * p.witness_margin * c2;
  double harmonic = 0.0;
  for (int k = K; k >= 1; --k) harmonic += 1.0 / k;

  VectorField b;
  b.id = "osgood-sum";
  b.dim = d;
  b.terms = K;
  b.eval = [K, d](double, const Point& x) {
    Point y{0.0, 0.0, 0.0};
    for (int k = 0; k < d; ++k) y[k] = series_v(K, x[k]);
    return y;
  };
  b.sup_norm = std::sqrt(static_cast<double>(d)) * std::numbers::pi * std::numbers::pi / 6.0;
  b.witness = Witness::constant_value(g, Modulus::log(), WitnessProvenance::analytic_constant);
  b.divergence = [K, d](double, const Point& x) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += series_v_prime(K, x[k]);
    return s;
  };
  // inf V_K' = -H_K, approached just left of 0
  b.divergence_negative_sup = d * harmonic;
  b.mollifier = [b, K, d, g](int n) {
    auto table = mollified_series(K, n, d);
    VectorField out = b;
    out.level = n;
    out.mollifier = nullptr;
    out.eval = [table, d](double, const Point& x) {
      Point y{0.0, 0.0, 0.0};
      for (int k = 0; k < d; ++k) y[k] = table->value(x[k]);
      return y;
    };
    out.divergence = [table, d](double, const Point& x) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += table->derivative(x[k]);
      return s;
    };
    double min_slope = 0.0;
    for (int i = 0; i <= 200000; ++i) {
      min_slope = std::min(min_slope, table->derivative(std::numbers::pi * i / 200000.0));
    }
    out.divergence_negative_sup = std::min(b.divergence_negative_sup, -d * min_slope);
    out.witness = Witness::constant_value(g, Modulus::log(), WitnessProvenance::mollified);
    return out;
  };
  return b;
}

inline void validate_singular(const FieldParams& p) {
  if (!(p.alpha > 0.0 && p.alpha < p.dim)) {
    throw InvalidArgument("sobolev-singular: alpha must lie in (0, d), got " +
                          std::to_string(p.alpha));
  }
  detail::require(p.cap > 0.0, "sobolev-singular: cap must be positive");
}

inline VectorField singular_field_uncalibrated(const FieldParams& p) {
  validate_singular(p);
  const double a = p.alpha;
  const double cap = p.cap;
  const double rc = std::pow(cap, -1.0 / a);  // |x|^-a = cap
  VectorField b;
  b.id = "sobolev-singular";
  b.dim = p.dim;
  b.eval = [a, cap, rc](double, const Point& x) {
    const double r = norm(x);
    const double v = r > rc ? std::pow(r, -a) : cap;
    return Point{v, 0.0, 0.0};
  };
  b.sup_norm = cap;
  b.divergence = [a, rc](double, const Point& x) {
    const double r = norm(x);
    return r > rc ? -a * std::pow(r, -a - 2.0) * x[0] : 0.0;
  };
  b.divergence_negative_sup = a * std::pow(cap, (a + 1.0) / a);
  b.gradient_norm = [a, rc](double, const Point& x) {
    const double r = norm(x);
    return r > rc ? a * std::pow(r, -a - 1.0) : 0.0;
  };
  b.singular_points = {Point{0.0, 0.0, 0.0}};
  return b;
}

inline Calibration calibrate_field(const VectorField& b, const FieldParams& p) {
  const PointGrid grid = make_grid(p.dim, p.witness_radius, p.witness_spacing);
  std::vector<double> grad(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) grad[i] = b.gradient_norm(0.0, grid[i]);
  return calibrate_witness_constant(b, grid, grad, p.maximal_radius, p.calibration_pairs, p.seed);
}

inline VectorField sobolev_singular_field(const FieldParams& p) {
  VectorField b = singular_field_uncalibrated(p);
  const Calibration cal = calibrate_field(b, p);
  const double scale = p.witness_margin;
  Witness w = cal.witness;
  w.value = [g = cal.witness.value, scale](double t, const Point& x) { return scale * g(t, x); };
  b.witness = w;
  return b;
}

inline VectorField combined_field(const FieldParams& p) {
  const VectorField b1 = sobolev_singular_field(p);
  const VectorField b2 = osgood_sum_field(p);
  const int d = p.dim;
  const double c2 = osgood_constant_cached(p.terms, p.osgood_pairs, p.seed);
  // (g(x) + g(y)) rho = C (1 + g1(x) + g1(y)) rho >= |b1(x)-b1(y)| + |b2(x)-b2(y)|,
  // using rho(s) >= s for the log kind.
  const double C = std::max(std::sqrt(static_cast<double>(d)) * p.witness_margin * c2, 1.0);

  VectorField b;
  b.id = "combined";
  b.dim = d;
  b.terms = p.terms;
  b.eval = [e1 = b1.eval, e2 = b2.eval](double t, const Point& x) { return e1(t, x) + e2(t, x); };
  b.sup_norm = b1.sup_norm + b2.sup_norm;
  Witness w;
  w.value = [g1 = b1.witness->value, C](double t, const Point& x) {
    return C * (0.5 + g1(t, x));
  };
  w.provenance = WitnessProvenance::calibrated;
  w.modulus = Modulus::log();
  b.witness = w;
  b.divergence = [d1 = b1.divergence, d2 = b2.divergence](double t, const Point& x) {
    return d1(t, x) + d2(t, x);
  };
  b.divergence_negative_sup = b1.divergence_negative_sup + b2.divergence_negative_sup;
  b.singular_points = b1.singular_points;
  b.mollifier = [b1, b2, C, d, b](int n) {
    const VectorField m1 = convolve_field(b1, n, MollifierKernel::kDefaultNodes);
    const VectorField m2 = b2.mollifier(n);
    VectorField out;
    out.id = "combined";
    out.dim = d;
    out.level = n;
    out.terms = b.terms;
    out.eval = [e1 = m1.eval, e2 = m2.eval](double t, const Point& x) {
      return e1(t, x) + e2(t, x);
    };
    out.sup_norm = b.sup_norm;
    Witness w;
    w.value = [g1 = m1.witness->value, C](double t, const Point& x) {
      return C * (0.5 + g1(t, x));
    };
    w.provenance = WitnessProvenance::mollified;
    w.modulus = Modulus::log();
    out.witness = w;
    out.divergence = [d1 = m1.divergence, d2 = m2.divergence](double t, const Point& x) {
      return d1(t, x) + d2(t, x);
    };
    out.divergence_negative_sup = m1.divergence_negative_sup + m2.divergence_negative_sup;
    return out;
  };
  return b;
}

}  // namespace detail

/// Builds a catalog field. Throws InvalidArgument for unknown ids or bad
/// parameters.
inline VectorField catalog_field(const std::string& id, const FieldParams& p = {}) {
  detail::require(p.dim >= 1 && p.dim <= kMaxDim, "catalog_field: dimension must be 1, 2 or 3");
  if (id == "constant") return detail::constant_field(p);
  if (id == "linear") return detail::linear_field(p);
  if (id == "osgood-sum") return detail::osgood_sum_field(p);
  if (id == "sobolev-singular") return detail::sobolev_singular_field(p);
  if (id == "combined") return detail::combined_field(p);
  std::string list;
  for (const auto& s : catalog_ids()) list += (list.empty() ? "" : ", ") + s;
  throw InvalidArgument("unknown field id '" + id + "' (catalog: " + list + ")");
}

}  // namespace rlf
