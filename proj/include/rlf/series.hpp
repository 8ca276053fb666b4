#pragma once

// The lacunary-type series V_K(x) = sum_{k<=K} |sin kx| / k^2, its termwise
// derivative, the bump kernel profile and a spectral evaluator for V_K
// convolved with the 1-D marginal of the scaled bump.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <tuple>
#include <vector>

#include "rlf/error.hpp"
#include "rlf/modulus.hpp"
#include "rlf/numerics.hpp"

namespace rlf {

inline constexpr int kDefaultSeriesTerms = 1000;

/// Uniform truncation bound: sum_{k>K} 1/k^2 <= 1/K.
inline double series_tail_bound(int K) { return 1.0 / K; }

/// Partial sum sum_{k<=K} 1/k^2.
inline double series_basel(int K) {
  double s = 0.0;
  for (int k = K; k >= 1; --k) s += 1.0 / (static_cast<double>(k) * k);
  return s;
}

namespace detail {

// Visits (k, sin kx, cos kx) for k = 1..K with an angle-addition recurrence,
// reseeded from libm every 64 terms to keep the phase error at rounding level.
template <class Fn>
void sweep_harmonics(int K, double x, Fn&& fn) {
  const double c1 = std::cos(x);
  const double s1 = std::sin(x);
  double c = c1;
  double s = s1;
  for (int k = 1; k <= K; ++k) {
    if ((k & 63) == 0) {
      c = std::cos(k * x);
      s = std::sin(k * x);
    }
    fn(k, s, c);
    const double cn = c * c1 - s * s1;
    s = s * c1 + c * s1;
    c = cn;
  }
}

}  // namespace detail

inline double series_v(int K, double x) {
  detail::require(K >= 1, "series_v: K must be positive");
  double sum = 0.0;
  detail::sweep_harmonics(K, x, [&](int k, double s, double) {
    sum += std::abs(s) / (static_cast<double>(k) * k);
  });
  return sum;
}

/// Termwise derivative sum_k cos(kx) sgn(sin kx) / k; sgn(0) = 0, so the
/// value at the finitely many kinks is the average of the one-sided limits
/// only for x = 0 mod pi.
inline double series_v_prime(int K, double x) {
  detail::require(K >= 1, "series_v_prime: K must be positive");
  double sum = 0.0;
  detail::sweep_harmonics(K, x, [&](int k, double s, double c) {
    if (s > 0.0) sum += c / k;
    if (s < 0.0) sum -= c / k;
  });
  return sum;
}

/// Result of the Hoelder-log constant measurement for V_K.
struct OsgoodConstant {
  double value = 0.0;  ///< max |V(t) - V(s)| / rho(|t - s|) over the pairs
  double t = 0.0;
  double s = 0.0;
  std::size_t pairs = 0;
};

/// Measures C with |V_K(t) - V_K(s)| <= C rho(|t - s|) for the log modulus.
///
/// Half the pairs are anchored at 0, where V_K is least regular; the rest
/// have a uniform base point in [0, pi] (one period). Separations are
/// log-uniform in [1e-7, pi].
inline OsgoodConstant measure_osgood_constant(int K, std::size_t pairs, std::uint64_t seed = 7) {
  detail::require(pairs >= 2, "measure_osgood_constant: need at least two pairs");
  const Modulus rho = Modulus::log();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  OsgoodConstant out;
  out.pairs = pairs;
  const double lmin = std::log(1e-7);
  const double lmax = std::log(std::numbers::pi);
  for (std::size_t i = 0; i < pairs; ++i) {
    const double sep = std::exp(lmin + (lmax - lmin) * unit(rng));
    const double base = (i % 2 == 0) ? 0.0 : std::numbers::pi * unit(rng);
    const double t = base + sep;
    const double ratio = std::abs(series_v(K, t) - series_v(K, base)) / rho(sep);
    if (ratio > out.value) {
      out.value = ratio;
      out.t = t;
      out.s = base;
    }
  }
  return out;
}

/// Radial bump exp(-1/(1 - |x|^2)) on the unit ball of R^d.
class BumpProfile {
 public:
  explicit BumpProfile(int d) : dim_(d) {
    detail::require(d >= 1 && d <= kMaxDim, "BumpProfile: dimension must be 1, 2 or 3");
    // c_d = 1 / (|S^{d-1}| int_0^1 e^{-1/(1-r^2)} r^{d-1} dr)
    const double sphere = d == 1 ? 2.0 : (d == 2 ? 2 * std::numbers::pi : 4 * std::numbers::pi);
    const auto q = integrate_1d(
        [d](double r) { return r < 1.0 ? std::exp(-1.0 / (1.0 - r * r)) * std::pow(r, d - 1) : 0.0; },
        0.0, 1.0, 1e-15);
    normalizer_ = 1.0 / (sphere * q.value);
  }

  int dimension() const { return dim_; }
  double normalizer() const { return normalizer_; }

  /// Normalised density at squared radius r2 (unit support).
  double density_r2(double r2) const {
    return r2 < 1.0 ? normalizer_ * std::exp(-1.0 / (1.0 - r2)) : 0.0;
  }

 private:
  int dim_;
  double normalizer_ = 1.0;
};

/// Cosine transform of the 1-D marginal of the unit-support d-dimensional
/// bump: chi_hat(w) = int p(s) cos(ws) ds. The marginal is sampled at 4096
/// midpoints (its inner integral by a 256-node midpoint rule when d > 1) and
/// normalised to unit mass; the midpoint rule is spectrally accurate for
/// these flat-ended profiles far past the frequencies used here.
class BumpMarginal {
 public:
  static constexpr int kNodes = 4096;

  explicit BumpMarginal(int d) : dim_(d), nodes_(kNodes), weights_(kNodes) {
    detail::require(d >= 1 && d <= kMaxDim, "BumpMarginal: dimension must be 1, 2 or 3");
    const double ds = 1.0 / kNodes;
    double mass = 0.0;
    for (int j = 0; j < kNodes; ++j) {
      const double s = (j + 0.5) * ds;
      nodes_[j] = s;
      weights_[j] = unnormalised(s);
      mass += 2.0 * weights_[j] * ds;
    }
    for (double& w : weights_) w *= ds / mass;
  }

  int dimension() const { return dim_; }

  double transform(double w) const {
    double sum = 0.0;
    for (int j = 0; j < kNodes; ++j) sum += weights_[j] * std::cos(w * nodes_[j]);
    return 2.0 * sum;
  }

  /// chi_hat(m * step) for m = 1..count (angle-addition recurrence).
  std::vector<double> transform_ladder(double step, int count) const {
    std::vector<double> out(static_cast<std::size_t>(count), 0.0);
    for (int j = 0; j < kNodes; ++j) {
      const double th = step * nodes_[j];
      const double c1 = std::cos(th);
      const double s1 = std::sin(th);
      double c = c1;
      double s = s1;
      const double w = 2.0 * weights_[j];
      for (int m = 1; m <= count; ++m) {
        if ((m & 63) == 0) {
          c = std::cos(m * th);
          s = std::sin(m * th);
        }
        out[m - 1] += w * c;
        const double cn = c * c1 - s * s1;
        s = s * c1 + c * s1;
        c = cn;
      }
    }
    return out;
  }

 private:
  double unnormalised(double s) const {
    const double a2 = 1.0 - s * s;
    if (a2 <= 0.0) return 0.0;
    if (dim_ == 1) return std::exp(-1.0 / a2);
    const double a = std::sqrt(a2);
    constexpr int kInner = 256;
    double sum = 0.0;
    for (int i = 0; i < kInner; ++i) {
      const double u = (i + 0.5) * a / kInner;
      const double v = a2 - u * u;
      if (v <= 0.0) continue;
      // d = 2: int_{-a}^{a} du; d = 3: 2 pi int_0^a u du
      sum += std::exp(-1.0 / v) * (dim_ == 2 ? 2.0 : 2.0 * std::numbers::pi * u);
    }
    return sum * a / kInner;
  }

  int dim_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// V_K convolved with the 1-D marginal of the bump scaled to radius 1/n.
///
/// From |sin y| = 2/pi - (4/pi) sum_j cos(2jy) / (4j^2 - 1),
///   V_K * chi_n (x) = (2/pi) S_K - (4/pi) sum_m A_m chi_hat(2m/n) cos(2mx),
///   A_m = sum_{k | m, k <= K} 1 / (k^2 (4 (m/k)^2 - 1)).
/// chi_hat(w) is below 1e-16 for w > 1400, so m stops at 700n. The sum is
/// tabulated with its derivative on [0, pi/2] and read back by cubic Hermite
/// interpolation, using evenness, pi-periodicity and V(pi - x) = V(x).
class MollifiedSeries {
 public:
  MollifiedSeries(int K, int n, int d, int nodes_per_level = 512)
      : K_(K), n_(n), d_(d) {
    detail::require(K >= 1, "MollifiedSeries: K must be positive");
    detail::require(n >= 1, "MollifiedSeries: level n must be positive");
    const int M = 700 * n;
    const BumpMarginal marginal(d);
    const std::vector<double> chi = marginal.transform_ladder(2.0 / n, M);
    std::vector<double> coef(static_cast<std::size_t>(M) + 1, 0.0);
    for (int k = 1; k <= K && k <= M; ++k) {
      const double kk = static_cast<double>(k) * k;
      for (int j = 1; j * k <= M; ++j) {
        coef[static_cast<std::size_t>(j * k)] += 1.0 / (kk * (4.0 * j * j - 1.0));
      }
    }
    for (int m = 1; m <= M; ++m) coef[m] *= chi[m - 1];
    const double mean = 2.0 / std::numbers::pi * series_basel(K);

    const int N = nodes_per_level * n;
    step_ = 0.5 * std::numbers::pi / N;
    values_.assign(static_cast<std::size_t>(N) + 1, 0.0);
    slopes_.assign(static_cast<std::size_t>(N) + 1, 0.0);
    for (int i = 0; i <= N; ++i) {
      const double x = i * step_;
      double v = 0.0;
      double dv = 0.0;
      const double th = 2.0 * x;
      const double c1 = std::cos(th);
      const double s1 = std::sin(th);
      double c = c1;
      double s = s1;
      for (int m = 1; m <= M; ++m) {
        if ((m & 63) == 0) {
          c = std::cos(m * th);
          s = std::sin(m * th);
        }
        v += coef[m] * c;
        dv += 2.0 * m * coef[m] * s;
        const double cn = c * c1 - s * s1;
        s = s * c1 + c * s1;
        c = cn;
      }
      values_[i] = mean - 4.0 / std::numbers::pi * v;
      slopes_[i] = 4.0 / std::numbers::pi * dv;
    }
  }

  int terms() const { return K_; }
  int level() const { return n_; }
  int dimension() const { return d_; }

  double value(double x) const { return eval(x, false); }
  double derivative(double x) const { return eval(x, true); }

 private:
  double eval(double x, bool want_derivative) const {
    double sign = 1.0;
    double y = x;
    if (y < 0.0) {
      y = -y;
      sign = -sign;
    }
    y = std::fmod(y, std::numbers::pi);
    if (y > 0.5 * std::numbers::pi) {
      y = std::numbers::pi - y;
      sign = -sign;
    }
    const std::size_t last = values_.size() - 1;
    std::size_t i = std::min(static_cast<std::size_t>(y / step_), last - 1);
    const double u = (y - i * step_) / step_;
    const double h = step_;
    const double f0 = values_[i], f1 = values_[i + 1];
    const double d0 = slopes_[i] * h, d1 = slopes_[i + 1] * h;
    if (!want_derivative) {
      const double u2 = u * u, u3 = u2 * u;
      return (2 * u3 - 3 * u2 + 1) * f0 + (u3 - 2 * u2 + u) * d0 + (-2 * u3 + 3 * u2) * f1 +
             (u3 - u2) * d1;
    }
    const double u2 = u * u;
    const double dh = (6 * u2 - 6 * u) * f0 + (3 * u2 - 4 * u + 1) * d0 + (-6 * u2 + 6 * u) * f1 +
                      (3 * u2 - 2 * u) * d1;
    return sign * dh / h;
  }

  int K_, n_, d_;
  double step_ = 0.0;
  std::vector<double> values_;
  std::vector<double> slopes_;
};

/// Process-wide cache of mollified series tables keyed by (K, n, d).
inline std::shared_ptr<const MollifiedSeries> mollified_series(int K, int n, int d) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int>, std::shared_ptr<const MollifiedSeries>> cache;
  const auto key = std::make_tuple(K, n, d);
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto table = std::make_shared<const MollifiedSeries>(K, n, d);
  std::lock_guard<std::mutex> lock(mu);
  return cache.emplace(key, std::move(table)).first->second;
}

}  // namespace rlf
