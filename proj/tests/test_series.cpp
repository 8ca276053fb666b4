#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "rlf/series.hpp"

using namespace rlf;

namespace {

// Direct 1-D convolution of V_K with the scaled bump, n_nodes midpoints.
double convolve_direct(int K, int n, double x, int n_nodes) {
  const BumpProfile bump(1);
  const double r = 1.0 / n;
  double sum = 0.0;
  double mass = 0.0;
  for (int i = 0; i < n_nodes; ++i) {
    const double z = -r + (i + 0.5) * 2 * r / n_nodes;
    const double w = bump.density_r2((z / r) * (z / r));
    sum += w * series_v(K, x - z);
    mass += w;
  }
  return sum / mass;
}

}  // namespace

TEST(Series, HalfPiIsOddBasel) {
  const int K = 1000;
  double odd = 0.0;
  for (int k = 1; k <= K; k += 2) odd += 1.0 / (double(k) * k);
  EXPECT_NEAR(series_v(K, std::numbers::pi / 2), odd, 1e-12);
  EXPECT_NEAR(series_v(K, std::numbers::pi / 2), std::numbers::pi * std::numbers::pi / 8,
              series_tail_bound(K));
}

TEST(Series, BoundedByBasel) {
  const double cap = std::numbers::pi * std::numbers::pi / 6;
  for (int i = 0; i < 20000; ++i) {
    const double x = -7.0 + 14.0 * i / 20000.0;
    const double v = series_v(200, x);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, cap);
  }
}

TEST(Series, DerivativeMatchesDifferenceQuotient) {
  for (double x : {0.3, 1.1, 2.0, -0.7}) {
    const double h = 1e-7;
    const double fd = (series_v(50, x + h) - series_v(50, x - h)) / (2 * h);
    EXPECT_NEAR(series_v_prime(50, x), fd, 1e-5);
  }
}

TEST(BumpMarginal, UnitMassAndSymmetry) {
  for (int d = 1; d <= 3; ++d) {
    const BumpMarginal m(d);
    EXPECT_NEAR(m.transform(0.0), 1.0, 1e-14);
    const auto ladder = m.transform_ladder(0.5, 300);
    for (int k = 1; k <= 300; k += 37) EXPECT_NEAR(ladder[k - 1], m.transform(0.5 * k), 1e-13);
    EXPECT_LT(std::abs(m.transform(1400.0)), 1e-15);
  }
}

TEST(BumpProfile, NormalisedInOneDimension) {
  const BumpProfile b(1);
  EXPECT_NEAR(b.normalizer(), 2.2522836210435817, 1e-10);
}

TEST(MollifiedSeries, MatchesDirectConvolution) {
  const int K = 1000;
  const auto table = mollified_series(K, 8, 1);
  for (double x : {0.0, 0.5, 1.0}) {
    const double oracle = convolve_direct(K, 8, x, 100000);
    EXPECT_NEAR(table->value(x), oracle, 1e-9) << "x=" << x;
    // |b^n - b| <= C2 rho(1/n)
    EXPECT_LE(std::abs(table->value(x) - series_v(K, x)), 2.0 * Modulus::log()(1.0 / 8));
  }
}

TEST(MollifiedSeries, SymmetriesAndDerivative) {
  const auto t = mollified_series(200, 16, 1);
  for (double x : {0.1, 0.9, 1.4, 2.5, 3.0}) {
    EXPECT_NEAR(t->value(x), t->value(-x), 1e-14);
    EXPECT_NEAR(t->value(x), t->value(x + std::numbers::pi), 1e-12);
    const double h = 1e-6;
    EXPECT_NEAR(t->derivative(x), (t->value(x + h) - t->value(x - h)) / (2 * h), 1e-5);
  }
}

TEST(MollifiedSeries, HigherDimensionalMarginalIsNarrower) {
  const auto t1 = mollified_series(100, 4, 1);
  const auto t2 = mollified_series(100, 4, 2);
  // A narrower marginal smooths less, so the value at the cusp is lower.
  EXPECT_LT(t2->value(0.0), t1->value(0.0));
  EXPECT_GT(t2->value(0.0), series_v(100, 0.0));
}

TEST(OsgoodConstant, FiniteAndStableAcrossK) {
  const double c2 = measure_osgood_constant(100, 20000).value;
  const double c3 = measure_osgood_constant(1000, 20000).value;
  EXPECT_TRUE(std::isfinite(c2));
  EXPECT_GT(c2, 0.0);
  EXPECT_LT(std::abs(c3 - c2), 0.25 * c2);
}
