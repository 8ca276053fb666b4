#pragma once

// Fixed-step RK4 ensembles of dX/dt = b_t(X), flow distances, push-forward
// histograms and portable serialisation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlf/error.hpp"
#include "rlf/fields.hpp"
#include "rlf/numerics.hpp"
#include "rlf/report.hpp"

namespace rlf {

/// Uniform mesh 0 = t_0 < ... < t_M = T with step tau; positions are kept
/// every `stride` steps.
struct TimeMesh {
  double T = 1.0;
  double tau = 1e-3;
  int steps = 1000;
  int stride = 1;

  static TimeMesh uniform(double T, double tau, int stride = 1) {
    detail::require(T > 0.0 && tau > 0.0, "TimeMesh: T and tau must be positive");
    detail::require(stride >= 1, "TimeMesh: stride must be >= 1");
    const double q = T / tau;
    const double r = std::round(q);
    if (r < 1.0 || std::abs(q - r) > 1e-9 * std::max(1.0, q)) {
      throw InvalidArgument("TimeMesh: T / tau must be an integer (T=" + std::to_string(T) +
                            ", tau=" + std::to_string(tau) + ")");
    }
    TimeMesh m;
    m.T = T;
    m.tau = tau;
    m.steps = static_cast<int>(r);
    detail::require(m.steps % stride == 0, "TimeMesh: stride must divide T / tau");
    m.stride = stride;
    return m;
  }

  int samples() const { return steps / stride + 1; }
  double time(int k) const { return k == samples() - 1 ? T : k * stride * tau; }

  bool operator==(const TimeMesh& o) const {
    return T == o.T && tau == o.tau && steps == o.steps && stride == o.stride;
  }

  /// Same stored sample times, whatever the step used to reach them.
  bool same_samples(const TimeMesh& o) const {
    const double a = tau * stride;
    const double b = o.tau * o.stride;
    return T == o.T && samples() == o.samples() && std::abs(a - b) <= 1e-12 * std::max(a, b);
  }
};

/// Flow map samples X_t(x) for x on a grid and t on a mesh.
struct TrajectoryEnsemble {
  PointGrid grid;
  TimeMesh mesh;
  std::string field_id;
  int level = 0;
  int terms = 0;
  std::string method = "RK4";
  std::vector<double> positions;    ///< [point][sample][coordinate], d coordinates
  std::vector<std::uint8_t> flags;  ///< 1 when the trajectory hit a non-finite value

  int dimension() const { return grid.dimension(); }
  std::size_t points() const { return grid.size(); }
  int samples() const { return mesh.samples(); }

  Point at(std::size_t i, int k) const {
    const int d = dimension();
    const double* p = &positions[(i * static_cast<std::size_t>(samples()) + k) * d];
    Point x{0.0, 0.0, 0.0};
    for (int c = 0; c < d; ++c) x[c] = p[c];
    return x;
  }

  std::size_t flagged() const {
    return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
  }
};

namespace detail {

inline bool finite(const Point& p) {
  return std::isfinite(p[0]) && std::isfinite(p[1]) && std::isfinite(p[2]);
}

}  // namespace detail

/// Classical RK4 from every grid point. The position update uses
/// compensated summation so that the O(tau^4) error is not masked by
/// rounding at small steps. A non-finite evaluation freezes that trajectory
/// at its last finite position and flags it.
inline TrajectoryEnsemble integrate_ensemble(const VectorField& b, const PointGrid& grid,
                                             const TimeMesh& mesh) {
  detail::require(grid.dimension() == b.dim, "integrate_ensemble: dimension mismatch");
  TrajectoryEnsemble E;
  E.grid = grid;
  E.mesh = mesh;
  E.field_id = b.id;
  E.level = b.level;
  E.terms = b.terms;
  const int d = grid.dimension();
  const int S = mesh.samples();
  E.positions.assign(grid.size() * static_cast<std::size_t>(S) * d, 0.0);
  E.flags.assign(grid.size(), 0);
  const double tau = mesh.tau;

  for (std::size_t i = 0; i < grid.size(); ++i) {
    Point x = grid[i];
    Point comp{0.0, 0.0, 0.0};
    double* out = &E.positions[i * static_cast<std::size_t>(S) * d];
    for (int c = 0; c < d; ++c) out[c] = x[c];
    bool alive = true;
    int sample = 1;
    for (int step = 0; step < mesh.steps; ++step) {
      if (alive) {
        const double t = step * tau;
        const Point k1 = b(t, x);
        const Point k2 = b(t + 0.5 * tau, x + (0.5 * tau) * k1);
        const Point k3 = b(t + 0.5 * tau, x + (0.5 * tau) * k2);
        const Point k4 = b(t + tau, x + tau * k3);
        const Point inc = (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!detail::finite(inc)) {
          alive = false;
          E.flags[i] = 1;
        } else {
          for (int c = 0; c < d; ++c) {
            const double y = inc[c] - comp[c];
            const double s = x[c] + y;
            comp[c] = (s - x[c]) - y;
            x[c] = s;
          }
        }
      }
      if ((step + 1) % mesh.stride == 0) {
        double* o = out + static_cast<std::size_t>(sample) * d;
        for (int c = 0; c < d; ++c) o[c] = x[c];
        ++sample;
      }
    }
  }
  return E;
}

inline TrajectoryEnsemble integrate_ensemble(const VectorField& b, const PointGrid& grid, double T,
                                             double tau, int stride = 1) {
  return integrate_ensemble(b, grid, TimeMesh::uniform(T, tau, stride));
}

namespace detail {

inline bool same_grid(const PointGrid& a, const PointGrid& b) {
  return a.dimension() == b.dimension() && a.size() == b.size() && a.spacing() == b.spacing() &&
         a.radius() == b.radius();
}

inline void require_matched(const TrajectoryEnsemble& A, const TrajectoryEnsemble& B) {
  if (!same_grid(A.grid, B.grid) || !A.mesh.same_samples(B.mesh)) {
    throw MeshMismatch("ensembles do not share the same grid and time mesh");
  }
}

}  // namespace detail

/// sup over mesh times of |X_t(x) - Y_t(x)|, per initial point.
inline std::vector<double> sup_distance(const TrajectoryEnsemble& A, const TrajectoryEnsemble& B) {
  detail::require_matched(A, B);
  std::vector<double> out(A.points(), 0.0);
  for (std::size_t i = 0; i < A.points(); ++i) {
    double m = 0.0;
    for (int k = 0; k < A.samples(); ++k) m = std::max(m, distance(A.at(i, k), B.at(i, k)));
    out[i] = m;
  }
  return out;
}

struct CompressibilityEstimate {
  double cell_size = 0.0;
  double measured = 0.0;               ///< L-hat
  std::optional<double> analytic;      ///< exp(int ||[div b]^-||)
  Point argmax_cell{};
  double argmax_time = 0.0;
};

/// Histogram estimate of sup_t sup_cells (pushed mass) / (cell volume).
/// Cells are cubes of side `cell` offset by h/4 so lattice points never sit
/// on a cell face.
inline CompressibilityEstimate compressibility(const TrajectoryEnsemble& E, double cell,
                                               std::optional<double> analytic = std::nullopt) {
  const double h = E.grid.spacing();
  detail::require(cell >= 2.0 * h * (1 - 1e-12), "compressibility: cell size must be >= 2h");
  const int d = E.dimension();
  const double offset = 0.25 * h;
  const double mass = E.grid.cell_volume();
  const double volume = std::pow(cell, d);
  CompressibilityEstimate out;
  out.cell_size = cell;
  out.analytic = analytic;
  for (int k = 0; k < E.samples(); ++k) {
    std::map<std::array<long, 3>, std::size_t> counts;
    for (std::size_t i = 0; i < E.points(); ++i) {
      const Point x = E.at(i, k);
      std::array<long, 3> key{0, 0, 0};
      for (int c = 0; c < d; ++c) key[c] = static_cast<long>(std::floor((x[c] - offset) / cell));
      ++counts[key];
    }
    for (const auto& [key, n] : counts) {
      const double L = static_cast<double>(n) * mass / volume;
      if (L > out.measured) {
        out.measured = L;
        out.argmax_time = E.mesh.time(k);
        for (int c = 0; c < d; ++c) out.argmax_cell[c] = offset + (key[c] + 0.5) * cell;
      }
    }
  }
  return out;
}

struct ResidualCheck {
  double max_residual = 0.0;
  double constant = 0.0;  ///< max_residual / tau^5
};

/// Integral-equation residual per stored step:
///   |X_{t+tau} - X_t - int_t^{t+tau} b(X_s) ds|,
/// the integral by Simpson's rule with the midpoint state taken from the
/// cubic Hermite interpolant of the step. Needs stride 1.
inline ResidualCheck integral_residual(const TrajectoryEnsemble& E, const VectorField& b) {
  detail::require(E.mesh.stride == 1, "integral_residual: needs every step stored");
  ResidualCheck out;
  const double tau = E.mesh.tau;
  for (std::size_t i = 0; i < E.points(); ++i) {
    if (E.flags[i]) continue;
    for (int k = 0; k + 1 < E.samples(); ++k) {
      const double t = E.mesh.time(k);
      const Point x0 = E.at(i, k);
      const Point x1 = E.at(i, k + 1);
      const Point b0 = b(t, x0);
      const Point b1 = b(t + tau, x1);
      const Point xm = 0.5 * (x0 + x1) + (tau / 8.0) * (b0 - b1);
      const Point bm = b(t + 0.5 * tau, xm);
      const Point integral = (tau / 6.0) * (b0 + 4.0 * bm + b1);
      out.max_residual = std::max(out.max_residual, norm(x1 - x0 - integral));
    }
  }
  out.constant = out.max_residual / std::pow(tau, 5);
  return out;
}

// ---------------------------------------------------------------------------
// Serialisation

inline nlohmann::json ensemble_metadata(const TrajectoryEnsemble& E) {
  nlohmann::json j;
  j["field"] = E.field_id;
  j["n"] = E.level;
  j["K"] = E.terms;
  j["method"] = E.method;
  j["tau"] = E.mesh.tau;
  j["T"] = E.mesh.T;
  j["stride"] = E.mesh.stride;
  j["R"] = E.grid.radius();
  j["h"] = E.grid.spacing();
  j["d"] = E.dimension();
  j["points"] = E.points();
  j["samples"] = E.samples();
  j["flagged"] = E.flagged();
  return j;
}

/// CSV rows (point_index, time_index, x1.., flag) plus `<path>.json`.
inline void write_ensemble(const TrajectoryEnsemble& E, const std::string& csv_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw Error("write_ensemble: cannot open " + csv_path);
  const int d = E.dimension();
  csv << "point_index,time_index";
  for (int c = 0; c < d; ++c) csv << ",x" << (c + 1);
  csv << ",flag\n";
  for (std::size_t i = 0; i < E.points(); ++i) {
    for (int k = 0; k < E.samples(); ++k) {
      const Point x = E.at(i, k);
      csv << i << ',' << k;
      for (int c = 0; c < d; ++c) csv << ',' << detail::csv_real(x[c]);
      csv << ',' << static_cast<int>(E.flags[i]) << '\n';
    }
  }
  std::ofstream meta(csv_path + ".json");
  if (!meta) throw Error("write_ensemble: cannot open " + csv_path + ".json");
  meta << ensemble_metadata(E).dump(2) << '\n';
}

inline TrajectoryEnsemble read_ensemble(const std::string& csv_path) {
  std::ifstream meta_in(csv_path + ".json");
  if (!meta_in) throw Error("read_ensemble: missing sidecar " + csv_path + ".json");
  const nlohmann::json meta = nlohmann::json::parse(meta_in);
  TrajectoryEnsemble E;
  E.grid = make_grid(meta["d"].get<int>(), meta["R"].get<double>(), meta["h"].get<double>());
  E.mesh = TimeMesh::uniform(meta["T"].get<double>(), meta["tau"].get<double>(),
                             meta["stride"].get<int>());
  E.field_id = meta["field"].get<std::string>();
  E.level = meta["n"].get<int>();
  E.terms = meta["K"].get<int>();
  E.method = meta["method"].get<std::string>();
  const int d = E.dimension();
  const std::size_t S = static_cast<std::size_t>(E.samples());
  E.positions.assign(E.points() * S * d, 0.0);
  E.flags.assign(E.points(), 0);
  std::ifstream csv(csv_path);
  if (!csv) throw Error("read_ensemble: cannot open " + csv_path);
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    const std::size_t i = std::stoull(cell);
    std::getline(ss, cell, ',');
    const std::size_t k = std::stoull(cell);
    for (int c = 0; c < d; ++c) {
      std::getline(ss, cell, ',');
      E.positions[(i * S + k) * d + c] = std::stod(cell);
    }
    std::getline(ss, cell, ',');
    E.flags[i] = static_cast<std::uint8_t>(std::stoi(cell));
  }
  return E;
}

}  // namespace rlf
