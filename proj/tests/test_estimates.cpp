#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rlf/estimates.hpp"

using namespace rlf;

namespace {

VectorField constant(double v, int level = 0) {
  FieldParams p;
  p.dim = 1;
  p.velocity = {v, 0, 0};
  VectorField b = catalog_field("constant", p);
  b.level = level;
  return b;
}

VectorField contraction() {
  FieldParams p;
  p.dim = 1;
  return catalog_field("linear", p);
}

double grid_measure(const PointGrid& g, double R) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < g.size(); ++i) n += norm(g[i]) <= R + 1e-12;
  return static_cast<double>(n) * g.cell_volume();
}

// Monte Carlo estimate of the lens ratio at |x - y| = 1, r = 1.
double lens_monte_carlo(int d, std::size_t samples) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::size_t in_x = 0;
  std::size_t in_both = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    Point p{0, 0, 0};
    for (int k = 0; k < d; ++k) p[k] = u(rng);
    if (norm(p) > 1.0) continue;
    ++in_x;
    Point q = p;
    q[0] -= 1.0;
    if (norm(q) <= 1.0) ++in_both;
  }
  return static_cast<double>(in_x) / static_cast<double>(in_both);
}

}  // namespace

TEST(Lens, ClosedForms) {
  EXPECT_EQ(lens_constant(1), 2.0);
  EXPECT_NEAR(lens_constant(2), lens_monte_carlo(2, 2'000'000), 0.01 * lens_constant(2));
  EXPECT_NEAR(lens_constant(3), lens_monte_carlo(3, 2'000'000), 0.01 * lens_constant(3));
  EXPECT_THROW(lens_constant(4), InvalidArgument);
}

TEST(Stability, IdenticalEnsemblesGiveZero) {
  const VectorField b = contraction();
  const PointGrid g = make_grid(1, 1.0, 0.05);
  const auto A = integrate_ensemble(b, g, 1.0, 1e-2);
  const auto r = stability_report(b, A, b, A, Modulus::log(), 0.1, 1.0);
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_TRUE(r.pass());
  EXPECT_EQ(r.id, "thm31");
}

TEST(Stability, ConstantPairClosedForm) {
  const double d0 = 0.5;
  const double delta = 0.5;
  const double R = 1.0;
  const double T = 1.0;
  const VectorField a = constant(0.0);
  const VectorField b = constant(d0);
  const PointGrid g = make_grid(1, R, 0.01);
  const auto A = integrate_ensemble(a, g, T, 0.01);
  const auto B = integrate_ensemble(b, g, T, 0.01);
  const auto r = stability_report(a, A, b, B, Modulus::linear(), delta, R);
  EXPECT_NEAR(r.lhs, grid_measure(g, R) * std::log(T * d0 / delta + 1.0), 1e-8);
  const double Rbar = R + T * d0;
  EXPECT_NEAR(r.rhs, (1.0 / delta) * T * d0 * grid_measure(make_grid(1, Rbar, 0.01), Rbar), 1e-10);
  EXPECT_NEAR(*r.constant("R_bar"), Rbar, 1e-15);
  EXPECT_TRUE(r.pass());
}

TEST(Stability, PairingFlag) {
  FieldParams p;
  p.dim = 1;
  const VectorField b = contraction();
  const VectorField c = catalog_field("osgood-sum", p);
  const PointGrid g = make_grid(1, 1.0, 0.1);
  const auto A = integrate_ensemble(b, g, 0.5, 1e-2);
  const auto B = integrate_ensemble(mollify(c, 4), g, 0.5, 1e-2);
  const auto first = stability_report(b, A, mollify(c, 4), B, Modulus::log(), 0.1, 1.0);
  StabilityOptions opt;
  opt.pairing = WitnessPairing::max;
  const auto wide = stability_report(b, A, mollify(c, 4), B, Modulus::log(), 0.1, 1.0, opt);
  EXPECT_GE(*wide.constant("g_L1"), *first.constant("g_L1"));
  EXPECT_EQ(first.lhs, wide.lhs);
  bool cross = false;
  for (const auto& [k, v] : first.notes) cross = cross || k == "cross_modulus";
  EXPECT_TRUE(cross);  // linear witness, log psi
  EXPECT_THROW(witness_pairing_from_name("second"), InvalidArgument);
}

TEST(Cauchy, NeedsThreeLevels) {
  const VectorField b = constant(0.0);
  const PointGrid g = make_grid(1, 1.0, 0.1);
  const auto E = integrate_ensemble(b, g, 1.0, 0.1);
  EXPECT_THROW(cauchy_diagnostic(b, {b, b}, {E, E}, Modulus::log(), 0.05, 1.0), InvalidArgument);
}

TEST(Cauchy, ConstantLevelsAreZero) {
  const PointGrid g = make_grid(1, 1.0, 0.1);
  std::vector<VectorField> levels;
  std::vector<TrajectoryEnsemble> ens;
  for (int n : {4, 8, 16}) {
    levels.push_back(constant(1.0, n));
    ens.push_back(integrate_ensemble(levels.back(), g, 1.0, 0.1));
  }
  const auto res = cauchy_diagnostic(constant(1.0), levels, ens, Modulus::log(), 0.05, 1.0);
  ASSERT_EQ(res.rows.size(), 3u);
  for (const auto& row : res.rows) EXPECT_EQ(row.D, 0.0);
  for (const auto& r : res.reports) EXPECT_TRUE(r.pass());
}

TEST(Cauchy, OffsetLevelsClosedForm) {
  const PointGrid g = make_grid(1, 1.0, 0.01);
  std::vector<VectorField> levels;
  std::vector<TrajectoryEnsemble> ens;
  for (int n : {4, 8, 16, 32}) {
    levels.push_back(constant(1.0 / n, n));
    ens.push_back(integrate_ensemble(levels.back(), g, 1.0, 0.1));
  }
  const auto res = cauchy_diagnostic(constant(0.25), levels, ens, Modulus::log(), 0.05, 1.0);
  ASSERT_EQ(res.rows.size(), 6u);
  for (const auto& row : res.rows) {
    EXPECT_NEAR(row.D, std::abs(1.0 / row.n - 1.0 / row.m) * grid_measure(g, 1.0), 1e-12);
  }
  const auto dbl = res.doubling();
  ASSERT_EQ(dbl.size(), 3u);
  EXPECT_GT(dbl[0].D, dbl[1].D);
  EXPECT_GT(dbl[1].D, dbl[2].D);
}

TEST(Uniqueness, StepRefinement) {
  const VectorField b = mollify(catalog_field("osgood-sum", {}), 8);
  const PointGrid g = make_grid(1, 1.0, 0.05);
  const auto A = integrate_ensemble(b, g, 1.0, 1e-2);
  const auto B = integrate_ensemble(b, g, 1.0, 1e-3, 10);
  const auto r = uniqueness_report(A, B, 1.0);
  EXPECT_TRUE(r.pass()) << r.lhs;
  EXPECT_EQ(r.slack, 0.0);
  EXPECT_THROW(uniqueness_report(A, integrate_ensemble(b, g, 1.0, 1e-3), 1.0), MeshMismatch);
}

TEST(RegularityQ, InitialTimeAtMostOne) {
  const PointGrid g = make_grid(1, 3.0, 0.01);
  const auto E = integrate_ensemble(contraction(), g, 1.0, 0.1);
  for (double r : {2.0, 0.5, 0.05}) {
    for (std::size_t i : {0ul, 150ul, 300ul, 450ul}) {
      EXPECT_LE(regularity_Q(E, Modulus::log(), i, r, 0), 1.0 + 1e-9);
    }
  }
}

TEST(RegularityQ, IdentityFlowIsStationary) {
  const PointGrid g = make_grid(1, 3.0, 0.05);
  const auto E = integrate_ensemble(constant(0.0), g, 1.0, 0.25);
  for (int k = 1; k < E.samples(); ++k) {
    EXPECT_DOUBLE_EQ(regularity_Q(E, Modulus::log(), 60, 0.5, k),
                     regularity_Q(E, Modulus::log(), 60, 0.5, 0));
  }
}

TEST(RegularityQ, ContractionMatchesQuadratureOracle) {
  const PointGrid g = make_grid(1, 3.0, 0.02);
  const auto E = integrate_ensemble(contraction(), g, 1.0, 1e-2, 50);
  const std::size_t x = g.nearest({0.3, 0, 0});
  const double r = 0.4;
  const PsiFunctional psi(Modulus::log(), r);
  for (int k = 0; k < E.samples(); ++k) {
    const double t = E.mesh.time(k);
    double sum = 0.0;
    int count = 0;
    for (std::size_t y = 0; y < g.size(); ++y) {
      if (std::abs(g[y][0] - g[x][0]) > r + 1e-12) continue;
      sum += psi(std::exp(-t) * std::abs(g[x][0] - g[y][0]));
      ++count;
    }
    EXPECT_NEAR(regularity_Q(E, Modulus::log(), x, r, k), sum / count, 1e-7);
  }
}

TEST(Subadditivity, PsiOnFlowDistances) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (double r : {1.0, 0.1, 0.01}) {
    const PsiFunctional psi(Modulus::log(), r);
    for (int s = 0; s < 200; ++s) {
      const double a = u(rng);
      const double b = u(rng);
      EXPECT_LE(psi(a + b), psi(a) + psi(b) + 1e-8);
    }
  }
}

TEST(RegularitySet, IdentityFlowKeepsWholeBall) {
  const PointGrid g = make_grid(1, 3.0, 0.02);
  const auto E = integrate_ensemble(constant(0.0), g, 1.0, 0.25);
  RegularityOptions opt;
  opt.pairs = 500;
  const auto res = regularity_set(constant(0.0), E, Modulus::log(), 1.0, 0.2, opt);
  EXPECT_EQ(res.deficit, 0.0);
  EXPECT_EQ(res.size(), res.points.size());
  EXPECT_DOUBLE_EQ(res.threshold, 3.0);
  EXPECT_TRUE(res.set_report.pass());
  EXPECT_TRUE(res.modulus_report.pass());
  EXPECT_LE(res.chain_excess, 0.0);
}

TEST(RegularitySet, ContractionPasses) {
  const VectorField b = contraction();
  const PointGrid g = make_grid(1, 3.0, 0.02);
  const auto E = integrate_ensemble(b, g, 1.0, 1e-2, 5);
  RegularityOptions opt;
  opt.pairs = 1000;
  const auto res = regularity_set(b, E, Modulus::log(), 1.0, 0.2, opt);
  EXPECT_TRUE(res.set_report.pass());
  EXPECT_TRUE(res.modulus_report.pass());
  EXPECT_LE(res.chain_excess, 1e-9);
  EXPECT_GT(res.C_d, 0.0);
  EXPECT_THROW(regularity_set(b, E, Modulus::log(), 1.0, 5.0, opt), InvalidArgument);
}

TEST(RegularitySet, NeedsThreeRadii) {
  const PointGrid g = make_grid(1, 2.0, 0.05);
  const auto E = integrate_ensemble(constant(0.0), g, 1.0, 0.5);
  EXPECT_THROW(regularity_set(constant(0.0), E, Modulus::log(), 1.0, 0.2), InvalidArgument);
}

TEST(LinearModulus, ExponentialForm) {
  EXPECT_LT(linear_modulus_bound_gap({0.01, 0.1, 1.0, 2.0}, {0.1, 1.0, 5.0, 20.0, 100.0, 300.0}),
            1e-6);
}

TEST(Compactness, IdentityFlowBelowBallMeasure) {
  const PointGrid g = make_grid(1, 1.5, 0.01);
  const auto E = integrate_ensemble(constant(0.0), g, 1.0, 0.5);
  const auto rep = compactness_a(constant(0.0), E, Modulus::log(), 0.25, 1.0);
  EXPECT_LE(rep.lhs, grid_measure(g, 1.0));
  EXPECT_TRUE(rep.pass());
}

TEST(Compactness, TranslationInvariance) {
  const PointGrid g = make_grid(1, 1.5, 0.02);
  const auto E0 = integrate_ensemble(constant(0.0), g, 1.0, 0.5);
  const auto E1 = integrate_ensemble(constant(1.0), g, 1.0, 0.5);
  const auto a0 = compactness_a(constant(0.0), E0, Modulus::log(), 0.125, 1.0);
  const auto a1 = compactness_a(constant(1.0), E1, Modulus::log(), 0.125, 1.0);
  EXPECT_NEAR(a0.lhs, a1.lhs, 1e-12);
}

TEST(Compactness, RadiusRange) {
  const PointGrid g = make_grid(1, 1.5, 0.05);
  const auto E = integrate_ensemble(constant(0.0), g, 1.0, 0.5);
  EXPECT_THROW(compactness_a(constant(0.0), E, Modulus::log(), 0.5, 1.0), InvalidArgument);
  EXPECT_THROW(compactness_a(constant(0.0), E, Modulus::log(), 0.0, 1.0), InvalidArgument);
}

TEST(Translation, IdentityFlowClosedForm) {
  const double R = 1.0;
  const double r = 0.25;
  const double h = 0.01;
  const PointGrid g = make_grid(1, 1.5, h);
  const auto E = integrate_ensemble(constant(0.0), g, 1.0, 0.5);
  const std::vector<VectorField> levels{constant(0.0)};
  const auto c = translation_constants(levels, 1.0, R, h);
  const auto rep = translation_functional(levels[0], E, c, Modulus::log(), r, R);
  // lattice oracle: mean of |z| over z in {-k..k} h, times L(B(r)) and the grid measure of B(R)
  const int k = 25;
  const double mean_z = h * k * (k + 1) / (2.0 * k + 1);
  EXPECT_NEAR(rep.lhs, mean_z * 2 * r * grid_measure(g, R), 1e-12);
  EXPECT_NEAR(rep.lhs, 2 * R * r * r, 0.03 * 2 * R * r * r);
  EXPECT_TRUE(rep.pass());

  const auto E1 = integrate_ensemble(constant(0.7), g, 1.0, 0.5);
  const auto rep1 = translation_functional(constant(0.7), E1, c, Modulus::log(), r, R);
  EXPECT_NEAR(rep1.lhs, rep.lhs, 1e-12);
}

TEST(Translation, GTableDecreases) {
  const std::vector<VectorField> levels{contraction()};
  const auto c = translation_constants(levels, 1.0, 1.0, 0.02);
  const auto table = translation_g_table(c, Modulus::log(), 1.0);
  ASSERT_EQ(table.size(), 5u);
  for (std::size_t i = 1; i < table.size(); ++i) EXPECT_LT(table[i].second, table[i - 1].second);
  const auto lin = translation_g_table(c, Modulus::linear(), 1.0);
  // linear rho: g(r) = R~ C / log(R~/r + 1) also decreases, faster than log rho
  EXPECT_LT(lin.back().second / lin.front().second, table.back().second / table.front().second);
}
