#pragma once

// Both sides of the stability, Cauchy, regularity and compactness
// inequalities, measured on trajectory ensembles.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rlf/error.hpp"
#include "rlf/fields.hpp"
#include "rlf/flow.hpp"
#include "rlf/modulus.hpp"
#include "rlf/numerics.hpp"
#include "rlf/report.hpp"

namespace rlf {

/// Which witness enters the stability right-hand side.
enum class WitnessPairing {
  first,  ///< g of the first field, as stated
  max,    ///< the larger of the two witness norms
};

inline WitnessPairing witness_pairing_from_name(const std::string& s) {
  if (s == "first") return WitnessPairing::first;
  if (s == "max") return WitnessPairing::max;
  throw InvalidArgument("unknown witness pairing '" + s + "' (expected first or max)");
}

inline std::string to_string(WitnessPairing p) { return p == WitnessPairing::first ? "first" : "max"; }

/// L^d(B(x,r)) / L^d(B(x,r) cap B(y,r)) at |x - y| = r.
inline double lens_constant(int d) {
  switch (d) {
    case 1:
      return 2.0;
    case 2:
      return std::numbers::pi / (2.0 * std::numbers::pi / 3.0 - std::sqrt(3.0) / 2.0);
    case 3:
      return 16.0 / 5.0;
    default:
      throw InvalidArgument("lens_constant: dimension must be 1, 2 or 3");
  }
}

namespace detail {

inline bool in_ball(const Point& x, double R) { return norm(x) <= R * (1 + 1e-12); }

/// |sum over B(R) at spacing h - sum over the even sublattice at 2h|, a
/// cheap quadrature error proxy.
inline double coarse_difference(const PointGrid& grid, const std::vector<double>& v, double R) {
  const double h = grid.spacing();
  const int d = grid.dimension();
  double fine = 0.0;
  double coarse = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!in_ball(grid[i], R)) continue;
    fine += v[i];
    const auto& idx = grid.lattice_index(i);
    bool even = true;
    for (int k = 0; k < d; ++k) even = even && (idx[k] % 2 == 0);
    if (even) coarse += v[i];
  }
  return std::abs(fine * std::pow(h, d) - coarse * std::pow(2 * h, d));
}

inline void stamp(EstimateReport& r, const TrajectoryEnsemble& E) {
  r.meta("h", E.grid.spacing())
      .meta("tau", E.mesh.tau)
      .meta("K", E.terms)
      .meta("d", E.dimension())
      .meta("T", E.mesh.T)
      .meta("stride", E.mesh.stride);
}

inline void tag_modulus(EstimateReport& r, const Modulus& rho, const VectorField& b) {
  r.note("modulus", rho.name());
  if (b.witness && b.witness->modulus.name() != rho.name()) {
    r.note("cross_modulus", "psi built from " + rho.name() + ", witness under " +
                                b.witness->modulus.name());
  }
}

inline const Witness& require_witness(const VectorField& b) {
  if (!b.witness) throw InvalidArgument("field '" + b.id + "' has no witness");
  return *b.witness;
}

/// Grid sum over B(R) of per-point values.
inline double ball_sum(const PointGrid& grid, const std::vector<double>& v, double R) {
  double s = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (in_ball(grid[i], R)) s += v[i];
  }
  return s * grid.cell_volume();
}

/// Upper bound for any pairwise distance within the ensemble, padded.
inline double ensemble_reach(const TrajectoryEnsemble& E) {
  double m = 0.0;
  for (std::size_t i = 0; i < E.points(); ++i) {
    for (int k = 0; k < E.samples(); ++k) m = std::max(m, norm(E.at(i, k)));
  }
  return 2.0 * m + 1.0;
}

inline double witness_norm(const VectorField& b, double T, int d, double radius, double h) {
  return witness_l1_norm(require_witness(b), T, make_grid(d, radius, h), b.autonomous);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stability

struct StabilityOptions {
  WitnessPairing pairing = WitnessPairing::first;
  double slack = kDefaultSlack;
  double integrator_error = 0.0;  ///< sup-distance error bound from the integrator
};

/// int_{B(R)} psi_delta(||X - X~||_{inf,T}) against
/// (L + L~)||g||_{L1} + (L~/delta)||b - b~||_{L1} over [0,T] x B(R-bar).
inline EstimateReport stability_report(const VectorField& b, const TrajectoryEnsemble& A,
                                       const VectorField& bt, const TrajectoryEnsemble& B,
                                       const Modulus& rho, double delta, double R,
                                       const StabilityOptions& opt = {}) {
  detail::require(delta > 0.0, "stability_report: delta must be positive");
  detail::require_witness(b);
  if (opt.pairing == WitnessPairing::max) detail::require_witness(bt);
  const std::vector<double> dist = sup_distance(A, B);
  const PsiFunctional psi_d(rho, delta);
  std::vector<double> integrand(dist.size(), 0.0);
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (detail::in_ball(A.grid[i], R)) integrand[i] = psi_d(dist[i]);
  }
  const double T = A.mesh.T;
  const int d = A.dimension();
  const double h = A.grid.spacing();
  const double Rbar = R + T * std::max(b.sup_norm, bt.sup_norm);
  const double L = b.compressibility_bound(T);
  const double Lt = bt.compressibility_bound(T);
  const PointGrid outer = make_grid(d, Rbar, h);
  double g_norm = witness_l1_norm(*b.witness, T, outer, b.autonomous);
  if (opt.pairing == WitnessPairing::max) {
    g_norm = std::max(g_norm, witness_l1_norm(*bt.witness, T, outer, bt.autonomous));
  }
  const double diff = field_l1_distance(b, bt, T, outer);

  EstimateReport r;
  r.id = "thm31";
  r.field = b.id == bt.id ? b.id : b.id + "|" + bt.id;
  r.n = b.level;
  r.m = bt.level;
  r.lhs = detail::ball_sum(A.grid, integrand, R);
  r.rhs = (L + Lt) * g_norm + Lt / delta * diff;
  r.slack = opt.slack;
  const double quad = detail::coarse_difference(A.grid, integrand, R);
  // psi_delta is 1/delta-Lipschitz
  const double integrator = opt.integrator_error / delta * ball_measure(d, R);
  const double truncation =
      b.terms != bt.terms && b.terms > 0 && bt.terms > 0
          ? 2.0 * T / std::min(b.terms, bt.terms) / delta * ball_measure(d, R)
          : 0.0;
  r.budget = quad + integrator + truncation;
  r.set("L", L)
      .set("L_tilde", Lt)
      .set("delta", delta)
      .set("R", R)
      .set("R_bar", Rbar)
      .set("g_L1", g_norm)
      .set("b_diff_L1", diff)
      .set("budget_quadrature", quad)
      .set("budget_integrator", integrator)
      .set("budget_truncation", truncation);
  detail::stamp(r, A);
  r.note("pairing", to_string(opt.pairing));
  detail::tag_modulus(r, rho, b);
  return r;
}

// ---------------------------------------------------------------------------
// Cauchy construction

struct CauchyRow {
  int n = 0;
  int m = 0;
  double delta = 0.0;  ///< ||b^n - b^m||_{L1([0,T] x B(R-bar))}
  double D = 0.0;      ///< int_{B(R)} ||X^n - X^m||_{inf,T}
  double bound = 0.0;
};

struct CauchyResult {
  std::vector<CauchyRow> rows;
  std::vector<EstimateReport> reports;
  double C = 0.0;

  /// D_{n,2n} in increasing n.
  std::vector<CauchyRow> doubling() const {
    std::vector<CauchyRow> out;
    for (const auto& row : rows) {
      if (row.m == 2 * row.n) out.push_back(row);
    }
    return out;
  }
};

/// For every pair of levels: D_{n,m} against
///   eta L(B(R)) + 2 R-bar C / psi_{delta_{n,m}}(eta),
/// with C = 2L||g||_{L1([0,T] x B(R-bar + 1))} + L from the unmollified b.
inline CauchyResult cauchy_diagnostic(const VectorField& b, const std::vector<VectorField>& levels,
                                      const std::vector<TrajectoryEnsemble>& ensembles,
                                      const Modulus& rho, double eta, double R,
                                      double slack = kDefaultSlack) {
  if (levels.size() < 3) throw InvalidArgument("cauchy_diagnostic: needs at least 3 levels");
  detail::require(levels.size() == ensembles.size(), "cauchy_diagnostic: one ensemble per level");
  detail::require(eta > 0.0, "cauchy_diagnostic: eta must be positive");
  const TrajectoryEnsemble& E0 = ensembles.front();
  const double T = E0.mesh.T;
  const int d = E0.dimension();
  const double h = E0.grid.spacing();
  double sup = b.sup_norm;
  for (const auto& f : levels) sup = std::max(sup, f.sup_norm);
  const double Rbar = R + T * sup;
  const double L = b.compressibility_bound(T);
  const double g_norm = detail::witness_norm(b, T, d, Rbar + 1.0, h);
  const PointGrid outer = make_grid(d, Rbar, h);

  CauchyResult out;
  out.C = 2.0 * L * g_norm + L;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    for (std::size_t j = i + 1; j < levels.size(); ++j) {
      CauchyRow row;
      row.n = levels[i].level;
      row.m = levels[j].level;
      row.delta = field_l1_distance(levels[i], levels[j], T, outer);
      const std::vector<double> dist = sup_distance(ensembles[i], ensembles[j]);
      row.D = detail::ball_sum(E0.grid, dist, R);
      // psi_0 diverges for an Osgood modulus, leaving only eta L(B(R))
      const double psi_eta = row.delta > 0.0 ? PsiFunctional(rho, row.delta)(eta)
                                             : std::numeric_limits<double>::infinity();
      row.bound = eta * ball_measure(d, R) + 2.0 * Rbar * out.C / psi_eta;

      EstimateReport r;
      r.id = "cauchy";
      r.field = b.id;
      r.n = row.n;
      r.m = row.m;
      r.lhs = row.D;
      r.rhs = row.bound;
      r.slack = slack;
      r.budget = detail::coarse_difference(E0.grid, dist, R);
      r.set("delta_nm", row.delta)
          .set("eta", eta)
          .set("psi_delta_eta", psi_eta)
          .set("C", out.C)
          .set("L", L)
          .set("g_L1", g_norm)
          .set("R", R)
          .set("R_bar", Rbar);
      detail::stamp(r, ensembles[i]);
      detail::tag_modulus(r, rho, b);
      out.rows.push_back(row);
      out.reports.push_back(std::move(r));
    }
  }
  return out;
}

/// Same field and level, steps tau and tau/10 sampled on the same times:
/// int_{B(R)} ||X - X^||_{inf,T} against 1e-4 L(B(R)).
inline EstimateReport uniqueness_report(const TrajectoryEnsemble& A, const TrajectoryEnsemble& B,
                                        double R) {
  detail::require(A.field_id == B.field_id && A.level == B.level,
                  "uniqueness_report: ensembles must come from the same field and level");
  const std::vector<double> dist = sup_distance(A, B);
  EstimateReport r;
  r.id = "uniqueness";
  r.field = A.field_id;
  r.n = A.level;
  r.m = B.level;
  r.lhs = detail::ball_sum(A.grid, dist, R);
  r.rhs = 1e-4 * ball_measure(A.dimension(), R);
  r.slack = 0.0;
  r.set("tau_a", A.mesh.tau).set("tau_b", B.mesh.tau).set("R", R);
  detail::stamp(r, A);
  return r;
}

// ---------------------------------------------------------------------------
// Regularity

/// Ball average over grid points y in B(x, r) of psi_r(|X_t(x) - X_t(y)|),
/// at stored sample k, with psi_r supplied as a table.
inline double regularity_Q(const TrajectoryEnsemble& E, const PsiTable& psi_r, std::size_t x,
                           int k) {
  const double r = psi_r.delta();
  const Point Xx = E.at(x, k);
  double sum = 0.0;
  std::size_t count = 0;
  E.grid.for_each_in_ball(E.grid[x], r, [&](std::size_t y) {
    sum += psi_r(distance(Xx, E.at(y, k)));
    ++count;
  });
  if (count == 0) throw EmptyBall("regularity_Q: empty ball");
  return sum / static_cast<double>(count);
}

inline double regularity_Q(const TrajectoryEnsemble& E, const Modulus& rho, std::size_t x, double r,
                           int k) {
  detail::require(r > 0.0, "regularity_Q: radius must be positive");
  return regularity_Q(E, PsiTable(rho, r, detail::ensemble_reach(E)), x, k);
}

struct RegularityOptions {
  int depth = 6;                  ///< radii 2R 2^-j, j = 0..depth
  std::size_t pairs = 10000;
  int time_samples = 21;          ///< sample times used for the pair check
  std::uint64_t seed = 11;
  double slack = kDefaultSlack;
};

struct RegularitySet {
  std::vector<std::size_t> points;     ///< grid indices in B(R)
  std::vector<std::uint8_t> member;    ///< per entry of `points`
  std::vector<double> sup_Q;           ///< per entry of `points`
  std::vector<double> phi;             ///< per grid point
  std::vector<double> maximal_phi;     ///< per grid point
  std::vector<double> radii;
  double epsilon = 0.0;
  double C_d = 0.0;
  double C_bar = 0.0;
  double threshold = 0.0;              ///< C-bar / epsilon
  double deficit = 0.0;                ///< L(B(R) \ E) on the grid
  double lens = 0.0;
  double chain_excess = 0.0;           ///< max(sup Q - 1 - Phi - M Phi, 0)
  bool modulus_bound_vacuous = false;  ///< psi^-1 of the threshold overflows
  EstimateReport set_report;           ///< deficit <= epsilon
  EstimateReport modulus_report;       ///< psi_r(|X_t x - X_t y|) <= 2 C~_d C-bar / eps

  std::size_t size() const {
    return static_cast<std::size_t>(std::count(member.begin(), member.end(), std::uint8_t{1}));
  }
};

/// Builds E = {x in B(R) : sup_t sup_r Q <= C-bar/eps} with
/// C-bar = 3(1 + C_d) L ||g||_{L1([0,T] x B(3R + T||b||))}, C_d measured on
/// Phi, then checks the pairwise modulus bound on sampled pairs of E.
///
/// The pair check is done in psi space, psi_r(|X_t x - X_t y|) <= c; psi_r
/// is increasing, so this is the same statement as |X_t x - X_t y| <=
/// psi_r^-1(c) and stays meaningful when psi_r^-1(c) overflows.
inline RegularitySet regularity_set(const VectorField& b, const TrajectoryEnsemble& E,
                                    const Modulus& rho, double R, double eps,
                                    const RegularityOptions& opt = {}) {
  const int d = E.dimension();
  const double T = E.mesh.T;
  const double h = E.grid.spacing();
  detail::require(eps > 0.0 && eps < ball_measure(d, R),
                  "regularity_set: epsilon must lie in (0, L(B(R)))");
  detail::require(E.grid.radius() >= 3.0 * R * (1 - 1e-12),
                  "regularity_set: ensemble grid must cover B(3R)");
  detail::require(opt.depth >= 0 && opt.time_samples >= 2, "regularity_set: bad options");
  const Witness& g = detail::require_witness(b);

  RegularitySet out;
  out.epsilon = eps;
  out.lens = lens_constant(d);
  const int S = E.samples();
  const double dt = E.mesh.tau * E.mesh.stride;

  out.phi.assign(E.points(), 0.0);
  for (std::size_t i = 0; i < E.points(); ++i) {
    double s = 0.0;
    for (int k = 0; k < S; ++k) {
      const double w = (k == 0 || k == S - 1) ? 0.5 : 1.0;
      s += w * std::abs(g(E.mesh.time(k), E.at(i, k)));
    }
    out.phi[i] = s * dt;
  }
  const MaximalFunctionGrid M = maximal_function(E.grid, out.phi, 2.0 * R);
  out.maximal_phi = M.values;

  double top = 0.0;
  for (std::size_t i = 0; i < E.points(); ++i) {
    if (detail::in_ball(E.grid[i], R)) top = std::max(top, out.maximal_phi[i]);
  }
  if (top > 0.0) {
    std::vector<double> alphas;
    for (int k = 0; k <= 6; ++k) alphas.push_back(top * std::ldexp(1.0, -k));
    out.C_d = weak_type_check(E.grid, out.phi, R, 2.0 * R, alphas).measured_constant;
  }
  const double L = b.compressibility_bound(T);
  const double g_norm = detail::witness_norm(b, T, d, 3.0 * R + T * b.sup_norm, h);
  // Dropping the 1 in Q <= 1 + Phi + M Phi needs eta = eps / C-bar <= 1/3;
  // C-bar is raised to 3 eps when it falls below.
  out.C_bar = std::max(3.0 * (1.0 + out.C_d) * L * g_norm, 3.0 * eps);
  out.threshold = out.C_bar / eps;

  for (int j = 0; j <= opt.depth; ++j) out.radii.push_back(2.0 * R * std::ldexp(1.0, -j));
  const double reach = detail::ensemble_reach(E);
  std::vector<PsiTable> tables;
  for (double r : out.radii) tables.emplace_back(rho, r, reach);

  for (std::size_t i = 0; i < E.points(); ++i) {
    if (!detail::in_ball(E.grid[i], R)) continue;
    double q = 0.0;
    for (const auto& table : tables) {
      for (int k = 0; k < S; ++k) q = std::max(q, regularity_Q(E, table, i, k));
    }
    out.points.push_back(i);
    out.sup_Q.push_back(q);
    out.member.push_back(q <= out.threshold ? 1 : 0);
    out.chain_excess =
        std::max(out.chain_excess, q - 1.0 - out.phi[i] - out.maximal_phi[i]);
  }
  out.deficit = static_cast<double>(out.points.size() - out.size()) * E.grid.cell_volume();

  EstimateReport& sr = out.set_report;
  sr.id = "thm41-set";
  sr.field = b.id;
  sr.n = b.level;
  sr.m = b.level;
  sr.lhs = out.deficit;
  sr.rhs = eps;
  sr.slack = opt.slack;
  sr.set("epsilon", eps)
      .set("C_d_measured", out.C_d)
      .set("C_bar", out.C_bar)
      .set("threshold", out.threshold)
      .set("L", L)
      .set("g_L1", g_norm)
      .set("R", R)
      .set("max_sup_Q", out.sup_Q.empty() ? 0.0
                                          : *std::max_element(out.sup_Q.begin(), out.sup_Q.end()))
      .set("chain_excess", out.chain_excess)
      .set("set_size", static_cast<double>(out.size()));
  detail::stamp(sr, E);
  detail::tag_modulus(sr, rho, b);

  // pair check
  const double c = 2.0 * out.lens * out.C_bar / eps;
  std::vector<std::size_t> members;
  for (std::size_t a = 0; a < out.points.size(); ++a) {
    if (out.member[a]) members.push_back(out.points[a]);
  }
  std::vector<int> times;
  for (int j = 0; j < opt.time_samples; ++j) {
    const int k = static_cast<int>(std::lround(static_cast<double>(j) * (S - 1) /
                                               (opt.time_samples - 1)));
    if (times.empty() || times.back() != k) times.push_back(k);
  }

  EstimateReport& mr = out.modulus_report;
  mr.id = "thm41";
  mr.field = b.id;
  mr.n = b.level;
  mr.m = b.level;
  mr.rhs = c;
  mr.slack = opt.slack;
  if (members.size() < 2) {
    mr.lhs = std::numeric_limits<double>::infinity();
    mr.note("empty_set", "fewer than two points in E");
  } else {
    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    double worst = 0.0;
    double smallest_r = std::numeric_limits<double>::infinity();
    struct Pair {
      double r;
      double dist;
    };
    std::vector<Pair> sampled;
    sampled.reserve(opt.pairs);
    while (sampled.size() < opt.pairs) {
      const std::size_t x = members[pick(rng)];
      const std::size_t y = members[pick(rng)];
      if (x == y) continue;
      const double r = distance(E.grid[x], E.grid[y]);
      double dist = 0.0;
      for (int k : times) dist = std::max(dist, distance(E.at(x, k), E.at(y, k)));
      sampled.push_back({r, dist});
      smallest_r = std::min(smallest_r, r);
    }
    // psi_r is monotone in its argument, so the max over sampled times is enough
    for (const auto& p : sampled) worst = std::max(worst, PsiFunctional(rho, p.r)(p.dist));
    mr.lhs = worst;

    // psi_r^-1(c) grows with r, so overflow at the smallest radius means
    // overflow for every pair.
    double worst_ratio = 0.0;
    try {
      psi_inverse(PsiFunctional(rho, smallest_r), c);
      std::map<double, double> cache;
      for (const auto& p : sampled) {
        auto it = cache.find(p.r);
        if (it == cache.end()) it = cache.emplace(p.r, psi_inverse(PsiFunctional(rho, p.r), c)).first;
        worst_ratio = std::max(worst_ratio, p.dist / it->second);
      }
      mr.set("max_distance_over_bound", worst_ratio);
    } catch (const BudgetExceeded&) {
      out.modulus_bound_vacuous = true;
      mr.note("vacuous", "psi^-1 of the threshold overflows a double; checked in psi space");
    }
    mr.set("pairs", static_cast<double>(sampled.size()));
  }
  mr.set("lens_constant", out.lens)
      .set("C_bar", out.C_bar)
      .set("epsilon", eps)
      .set("time_samples", static_cast<double>(times.size()));
  detail::stamp(mr, E);
  detail::tag_modulus(mr, rho, b);
  return out;
}

/// For rho(s) = s, psi_r^-1(c) = r(e^c - 1). Largest relative gap between
/// psi_inverse and that closed form over the given radii and levels c
/// (levels above 700 overflow both and are skipped).
inline double linear_modulus_bound_gap(const std::vector<double>& radii,
                                       const std::vector<double>& levels) {
  double worst = 0.0;
  for (double r : radii) {
    const PsiFunctional p(Modulus::linear(), r);
    for (double c : levels) {
      if (c > 700.0) continue;
      const double exact = r * std::expm1(c);
      worst = std::max(worst, std::abs(psi_inverse(p, c) - exact) / exact);
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Compactness

/// a(r, R, X) = int_{B(R)} sup_t avg_{B(x,r)} psi_r(|X_t x - X_t y|) dx against
/// L(B(R)) + 2L||g||_{L1([0,T] x B(3R/2 + 2T||b||))}.
inline EstimateReport compactness_a(const VectorField& b, const TrajectoryEnsemble& E,
                                    const Modulus& rho, double r, double R,
                                    double slack = kDefaultSlack) {
  if (!(r > 0.0 && r < R / 2.0)) throw InvalidArgument("compactness_a: need 0 < r < R/2");
  detail::require(E.grid.radius() >= (R + r) * (1 - 1e-12),
                  "compactness_a: ensemble grid must cover B(R + r)");
  detail::require_witness(b);
  const int d = E.dimension();
  const double T = E.mesh.T;
  const double Rbar = 1.5 * R + 2.0 * T * b.sup_norm;
  const PsiTable psi_r(rho, r, detail::ensemble_reach(E));
  std::vector<double> sup_q(E.points(), 0.0);
  for (std::size_t i = 0; i < E.points(); ++i) {
    if (!detail::in_ball(E.grid[i], R)) continue;
    for (int k = 0; k < E.samples(); ++k) sup_q[i] = std::max(sup_q[i], regularity_Q(E, psi_r, i, k));
  }
  const double L = b.compressibility_bound(T);
  const double g_norm = detail::witness_norm(b, T, d, Rbar, E.grid.spacing());

  EstimateReport rep;
  rep.id = "prop43";
  rep.field = b.id;
  rep.n = b.level;
  rep.m = b.level;
  rep.lhs = detail::ball_sum(E.grid, sup_q, R);
  rep.rhs = ball_measure(d, R) + 2.0 * L * g_norm;
  rep.slack = slack;
  rep.budget = detail::coarse_difference(E.grid, sup_q, R);
  rep.set("r", r).set("R", R).set("R_bar", Rbar).set("L", L).set("g_L1", g_norm);
  detail::stamp(rep, E);
  detail::tag_modulus(rep, rho, b);
  return rep;
}

// ---------------------------------------------------------------------------
// Translation estimate

/// g(r) = (R~ / psi_r(R~)) C_{d,R,T} over a family of levels, with
/// R~ = sup_n (3R/2 + 2T||b^n||) and C_{d,R,T} = L(B(R)) + 2L sup_n ||g^n||.
struct TranslationConstants {
  double R_tilde = 0.0;
  double C = 0.0;
  double L = 0.0;
  double g_sup = 0.0;
};

inline TranslationConstants translation_constants(const std::vector<VectorField>& levels, double T,
                                                  double R, double h) {
  detail::require(!levels.empty(), "translation_constants: no levels");
  const int d = levels.front().dim;
  TranslationConstants c;
  for (const auto& f : levels) {
    c.R_tilde = std::max(c.R_tilde, 1.5 * R + 2.0 * T * f.sup_norm);
    c.L = std::max(c.L, f.compressibility_bound(T));
  }
  for (const auto& f : levels) c.g_sup = std::max(c.g_sup, detail::witness_norm(f, T, d, c.R_tilde, h));
  c.C = ball_measure(d, R) + 2.0 * c.L * c.g_sup;
  return c;
}

inline double translation_g(const TranslationConstants& c, const Modulus& rho, double r) {
  return c.R_tilde / PsiFunctional(rho, r)(c.R_tilde) * c.C;
}

/// g(r) at r = R 2^-j, j = first..last.
inline std::vector<std::pair<double, double>> translation_g_table(const TranslationConstants& c,
                                                                  const Modulus& rho, double R,
                                                                  int first = 2, int last = 6) {
  std::vector<std::pair<double, double>> out;
  for (int j = first; j <= last; ++j) {
    const double r = R * std::ldexp(1.0, -j);
    out.emplace_back(r, translation_g(c, rho, r));
  }
  return out;
}

/// sup_t int_{B(r)} int_{B(R)} |X_t(x) - X_t(x + z)| dx dz for one level,
/// z running over lattice vectors so x + z is again a grid point, against
/// g(r) L(B(r)).
inline EstimateReport translation_functional(const VectorField& b, const TrajectoryEnsemble& E,
                                             const TranslationConstants& c, const Modulus& rho,
                                             double r, double R, double slack = kDefaultSlack) {
  if (!(r > 0.0 && r < R / 2.0)) throw InvalidArgument("translation_functional: need 0 < r < R/2");
  detail::require(E.grid.radius() >= (R + r) * (1 - 1e-12),
                  "translation_functional: ensemble grid must cover B(R + r)");
  const int d = E.dimension();
  const double h = E.grid.spacing();
  const double cell = E.grid.cell_volume();

  std::vector<LatticeIndex> shifts;
  E.grid.for_each_in_ball(Point{0, 0, 0}, r, [&](std::size_t j) {
    shifts.push_back(E.grid.lattice_index(j));
  });
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < E.points(); ++i) {
    if (!detail::in_ball(E.grid[i], R)) continue;
    const LatticeIndex& xi = E.grid.lattice_index(i);
    for (const auto& z : shifts) {
      LatticeIndex y = xi;
      for (int k = 0; k < d; ++k) y[k] += z[k];
      if (auto j = E.grid.find(y)) pairs.emplace_back(i, *j);
    }
  }
  double lhs = 0.0;
  double argmax_t = 0.0;
  for (int k = 0; k < E.samples(); ++k) {
    double s = 0.0;
    for (const auto& [i, j] : pairs) s += distance(E.at(i, k), E.at(j, k));
    // average over the lattice shifts times L(B(r)), so the z-measure is exact
    s *= cell * ball_measure(d, r) / static_cast<double>(shifts.size());
    if (s > lhs) {
      lhs = s;
      argmax_t = E.mesh.time(k);
    }
  }
  const double g = translation_g(c, rho, r);

  EstimateReport rep;
  rep.id = "thm44";
  rep.field = b.id;
  rep.n = b.level;
  rep.m = b.level;
  rep.lhs = lhs;
  rep.rhs = g * ball_measure(d, r);
  rep.slack = slack;
  rep.set("r", r)
      .set("R", R)
      .set("g_r", g)
      .set("R_tilde", c.R_tilde)
      .set("C_dRT", c.C)
      .set("L", c.L)
      .set("g_sup_L1", c.g_sup)
      .set("argmax_t", argmax_t)
      .set("lattice_shifts", static_cast<double>(shifts.size()));
  rep.meta("h", h);
  detail::stamp(rep, E);
  detail::tag_modulus(rep, rho, b);
  return rep;
}

}  // namespace rlf
