#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "rlf/numerics.hpp"

using namespace rlf;

TEST(MakeGrid, OneDimensionalHalfSpacing) {
  const PointGrid g = make_grid(1, 1.0, 0.5);
  ASSERT_EQ(g.size(), 5u);
  const double expected[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(g[i][0], expected[i]);
  EXPECT_DOUBLE_EQ(g.cell_volume(), 0.5);
}

TEST(MakeGrid, TwoDimensionalUnitSpacing) {
  const PointGrid g = make_grid(2, 1.0, 1.0 - 1e-15);
  EXPECT_EQ(g.size(), 5u);
  EXPECT_THROW(make_grid(2, 1.0, 1.0), InvalidArgument);
}

TEST(MakeGrid, PointCountAndDeterminism) {
  EXPECT_EQ(make_grid(1, 1.0, 0.01).size(), 201u);
  const PointGrid a = make_grid(2, 1.3, 0.07);
  const PointGrid b = make_grid(2, 1.3, 0.07);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i], b[i]);
    EXPECT_LE(norm(a[i]), 1.3 * (1 + 1e-12));
  }
  EXPECT_THROW(make_grid(4, 1.0, 0.1), InvalidArgument);
  EXPECT_THROW(make_grid(1, 1.0, 2.0), InvalidArgument);
}

TEST(MakeGrid, LatticeLookup) {
  const PointGrid g = make_grid(2, 1.0, 0.1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto j = g.find(g.lattice_index(i));
    ASSERT_TRUE(j.has_value());
    EXPECT_EQ(*j, i);
    EXPECT_EQ(g.nearest(g[i]), i);
  }
  EXPECT_FALSE(g.find({10, 10, 0}).has_value());
}

TEST(BallMeasure, Constants) {
  EXPECT_DOUBLE_EQ(ball_measure(1, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(ball_measure(2, 1.0), std::numbers::pi);
  EXPECT_DOUBLE_EQ(ball_measure(3, 1.0), 4.0 * std::numbers::pi / 3.0);
  EXPECT_DOUBLE_EQ(ball_measure(1, 0.0), 0.0);
}

TEST(BallAverage, ConstantAndOdd) {
  const PointGrid g = make_grid(1, 1.0, 0.01);
  std::vector<double> c(g.size(), 3.5);
  EXPECT_DOUBLE_EQ(ball_average(g, c, {0.2, 0, 0}, 0.3), 3.5);
  std::vector<double> x(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) x[i] = g[i][0];
  EXPECT_NEAR(ball_average(g, x, {0, 0, 0}, 1.0), 0.0, 1e-14);
}

TEST(BallAverage, SquareConvergesToThird) {
  double prev = 1.0;
  for (double h : {0.02, 0.01, 0.005, 0.0025}) {
    const PointGrid g = make_grid(1, 1.0, h);
    std::vector<double> f(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) f[i] = g[i][0] * g[i][0];
    const double err = std::abs(ball_average(g, f, {0, 0, 0}, 1.0) - 1.0 / 3.0);
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(BallAverage, FirstOrderForLipschitz) {
  // f(x) = |x| on B((0.31, 0.17), 0.5) in the plane; the exact average comes
  // from a fine polar midpoint rule.
  const Point c{0.31, 0.17, 0.0};
  const double r = 0.5;
  double exact = 0.0;
  const int nr = 2000;
  const int nt = 4000;
  for (int i = 0; i < nr; ++i) {
    const double rho = (i + 0.5) * r / nr;
    for (int j = 0; j < nt; ++j) {
      const double th = (j + 0.5) * 2 * std::numbers::pi / nt;
      exact += std::hypot(c[0] + rho * std::cos(th), c[1] + rho * std::sin(th)) * rho;
    }
  }
  exact *= (r / nr) * (2 * std::numbers::pi / nt) / (std::numbers::pi * r * r);

  std::vector<double> errs;
  const std::vector<double> hs{0.04, 0.02, 0.01};
  for (double h : hs) {
    const PointGrid g = make_grid(2, 1.0, h);
    std::vector<double> f(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) f[i] = norm(g[i]);
    errs.push_back(std::abs(ball_average(g, f, c, r) - exact));
  }
  for (std::size_t k = 0; k < hs.size(); ++k) EXPECT_LE(errs[k], hs[k]) << "h=" << hs[k];
  EXPECT_LT(errs.back(), errs.front());
}

TEST(BallAverage, EmptyBallThrows) {
  const PointGrid g = make_grid(1, 1.0, 0.5);
  std::vector<double> f(g.size(), 1.0);
  EXPECT_THROW(ball_average(g, f, {0.25, 0, 0}, 0.1), EmptyBall);
  EXPECT_THROW(ball_average(g, f, {0, 0, 0}, 0.0), InvalidArgument);
}

TEST(GridFunction, MultilinearExactOnAffine) {
  const PointGrid g = make_grid(2, 1.0, 0.1);
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v[i] = 2 * g[i][0] - g[i][1] + 0.5;
  const GridFunction f(g, v);
  EXPECT_NEAR(f({0.123, -0.456, 0}), 2 * 0.123 + 0.456 + 0.5, 1e-12);
}

TEST(Integrate1d, Elementary) {
  EXPECT_NEAR(integrate_1d([](double) { return 1.0; }, 0, 1, 1e-10).value, 1.0, 1e-12);
  const auto q = integrate_1d([](double s) { return 1.0 / (s + 1.0); }, 0, std::numbers::e - 1,
                              1e-10);
  EXPECT_NEAR(q.value, 1.0, 1e-10);
  EXPECT_GE(q.error, 0.0);
  EXPECT_GE(q.nodes, 1u);
}

TEST(Integrate1d, CubicsExact) {
  const auto f = [](double s) { return 4 * s * s * s - 3 * s * s + 2 * s - 7; };
  const auto F = [](double s) { return s * s * s * s - s * s * s + s * s - 7 * s; };
  EXPECT_NEAR(integrate_1d(f, -1.3, 2.1, 1e-8).value, F(2.1) - F(-1.3), 1e-8);
}

TEST(Integrate1d, MatchesTrapezoidOracle) {
  const auto f = [](double s) { return 1.0 / (s > 0 ? s * std::log(1.0 / s) + 1e-3 : 1e-3); };
  const double tol = 1e-8;
  const auto q = integrate_1d(f, 0.0, 0.1, tol);
  // 10^7-node composite trapezoid
  const long n = 10'000'000;
  const double h = 0.1 / n;
  double s = 0.5 * (f(0.0) + f(0.1));
  for (long i = 1; i < n; ++i) s += f(i * h);
  EXPECT_NEAR(q.value, s * h, 2 * tol);
}

TEST(Integrate1d, BudgetAndPreconditions) {
  const auto wild = [](double s) { return std::sin(1.0 / (s + 1e-9)); };
  EXPECT_THROW(integrate_1d(wild, 0.0, 1.0, 1e-14, 2000), BudgetExceeded);
  EXPECT_THROW(integrate_1d(wild, 1.0, 0.0, 1e-6), InvalidArgument);
  EXPECT_THROW(integrate_1d(wild, 0.0, 1.0, 0.0), InvalidArgument);
}

TEST(InvertMonotone, Examples) {
  EXPECT_NEAR(invert_monotone([](double x) { return x; }, 0.5, 0, 1, 1e-12), 0.5, 1e-12);
  const double x = invert_monotone([](double x) { return std::log(x + 1); }, 1.0, 0, 10, 1e-12);
  EXPECT_NEAR(x, std::numbers::e - 1, 1e-11);
  EXPECT_THROW(invert_monotone([](double x) { return x; }, 2.0, 0, 1, 1e-12), BracketError);
}
