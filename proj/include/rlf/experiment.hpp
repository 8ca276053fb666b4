#pragma once

// Experiment configs, suite orchestration and report / CSV / SVG output.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlf/error.hpp"
#include "rlf/estimates.hpp"
#include "rlf/fields.hpp"
#include "rlf/flow.hpp"
#include "rlf/modulus.hpp"
#include "rlf/report.hpp"

namespace rlf {

struct ExperimentConfig {
  std::string field;
  FieldParams params;
  std::optional<std::string> modulus;  ///< defaults to the witness modulus
  std::vector<int> levels{4, 8, 16, 32};
  std::vector<int> translation_levels;  ///< default: the last three levels
  double R = 1.0;
  double T = 1.0;
  double h = 0.01;
  double tau = 1e-3;
  int stride = 10;                      ///< sample stride for the wide ensembles
  std::vector<double> deltas;           ///< empty: measured ||b^n - b^m||
  std::vector<double> epsilons;         ///< empty: 0.1 L(B(R))
  double eta = 0.05;
  int depth = 6;
  std::vector<double> compactness_radii;  ///< empty: R/4, R/8, R/16
  int translation_depth = 6;              ///< r = R 2^-j, j = 2..depth
  double lambda = 0.0;                    ///< weak-type radius; 0 means 2R
  std::vector<double> alphas{1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625};
  std::size_t pairs = 10000;
  int time_samples = 21;
  WitnessPairing pairing = WitnessPairing::first;
  double slack = kDefaultSlack;
  std::uint64_t seed = 11;
  std::string out = "rlf-out";
};

inline const char* kConfigHelp = R"(Config files hold one `key = value` per line; `#` starts a comment.
Lists are comma separated.

  field              catalog id (required): constant, linear, osgood-sum,
                     sobolev-singular, combined
  dim                1, 2 or 3 (default 1)
  modulus            linear, log or loglog (default: the field's witness modulus)
  levels             mollification levels, ascending (default 4,8,16,32)
  translation_levels levels for the translation estimate (default: last three)
  R, T               ball radius and horizon (default 1, 1)
  h, tau             grid spacing and RK4 step (default 0.01, 0.001)
  stride             stored-sample stride for regularity ensembles (default 10)
  delta              stability deltas (default: measured ||b^n - b^m||_L1)
  epsilon            regularity epsilons (default 0.1 L(B(R)))
  eta                Cauchy eta (default 0.05)
  depth              dyadic depth J of the radii 2R 2^-j (default 6)
  compactness_radii  radii for a(r, R, X) (default R/4, R/8, R/16)
  translation_depth  g(r) table down to R 2^-depth (default 6)
  lambda             weak-type maximal radius (default 2R)
  alphas             weak-type levels (default 2^-k, k = 0..6)
  pairs              sampled pairs for the modulus check (default 10000)
  time_samples       sample times for the modulus check (default 21)
  pairing            stability witness pairing: first or max (default first)
  slack              multiplicative slack (default 0.05)
  seed               sampling seed (default 11)
  out                output directory (default rlf-out)

Field parameters: velocity, matrix (row-major, dim*dim entries), working_radius,
terms, alpha, cap, witness_radius, witness_spacing, maximal_radius,
calibration_pairs, osgood_pairs, witness_margin, field_seed.
)";

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

class ConfigReader {
 public:
  ConfigReader(std::string source, std::map<std::string, std::pair<int, std::string>> entries)
      : source_(std::move(source)), entries_(std::move(entries)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    auto it = entries_.find(key);
    const int line = it == entries_.end() ? 0 : it->second.first;
    throw ConfigError(source_ + ":" + std::to_string(line) + ": " + key + ": " + msg);
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& raw(const std::string& key) const { return entries_.at(key).second; }

  double real(const std::string& key) const {
    const std::string& s = raw(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || !std::isfinite(v)) fail(key, "not a finite number: '" + s + "'");
      return v;
    } catch (const std::logic_error&) {
      fail(key, "not a number: '" + s + "'");
    }
  }

  long integer(const std::string& key) const {
    const std::string& s = raw(key);
    try {
      std::size_t used = 0;
      const long v = std::stol(s, &used);
      if (used != s.size()) fail(key, "not an integer: '" + s + "'");
      return v;
    } catch (const std::logic_error&) {
      fail(key, "not an integer: '" + s + "'");
    }
  }

  std::vector<std::string> items(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(raw(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) fail(key, "empty list entry");
      out.push_back(item);
    }
    if (out.empty()) fail(key, "empty list");
    return out;
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : items(key)) {
      try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) fail(key, "not a finite number: '" + s + "'");
        out.push_back(v);
      } catch (const std::logic_error&) {
        fail(key, "not a number: '" + s + "'");
      }
    }
    return out;
  }

  std::vector<int> ints(const std::string& key) const {
    std::vector<int> out;
    for (double v : reals(key)) {
      if (v != std::floor(v) || std::abs(v) > 1e9) fail(key, "entries must be integers");
      out.push_back(static_cast<int>(v));
    }
    return out;
  }

 private:
  std::string source_;
  std::map<std::string, std::pair<int, std::string>> entries_;
};

inline const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys{
      "field", "dim", "modulus", "levels", "translation_levels", "R", "T", "h", "tau", "stride",
      "delta", "epsilon", "eta", "depth", "compactness_radii", "translation_depth", "lambda",
      "alphas", "pairs", "time_samples", "pairing", "slack", "seed", "out", "velocity", "matrix",
      "working_radius", "terms", "alpha", "cap", "witness_radius", "witness_spacing",
      "maximal_radius", "calibration_pairs", "osgood_pairs", "witness_margin", "field_seed"};
  return keys;
}

}  // namespace detail

/// Parses and validates a config from text. `source` names it in messages.
inline ExperimentConfig parse_config_text(const std::string& text,
                                          const std::string& source = "config") {
  std::map<std::string, std::pair<int, std::string>> entries;
  std::stringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(number) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!detail::config_keys().count(key)) {
      throw ConfigError(source + ":" + std::to_string(number) + ": unknown key '" + key + "'");
    }
    if (value.empty()) {
      throw ConfigError(source + ":" + std::to_string(number) + ": " + key + ": empty value");
    }
    if (entries.count(key)) {
      throw ConfigError(source + ":" + std::to_string(number) + ": duplicate key '" + key + "'");
    }
    entries[key] = {number, value};
  }

  const detail::ConfigReader rd(source, entries);
  ExperimentConfig c;
  if (!rd.has("field")) throw ConfigError(source + ": missing required key 'field'");
  c.field = rd.raw("field");
  const auto& ids = catalog_ids();
  if (std::find(ids.begin(), ids.end(), c.field) == ids.end()) {
    std::string list;
    for (const auto& s : ids) list += (list.empty() ? "" : ", ") + s;
    rd.fail("field", "unknown field id '" + c.field + "' (catalog: " + list + ")");
  }

  FieldParams& p = c.params;
  if (rd.has("dim")) {
    const long d = rd.integer("dim");
    if (d < 1 || d > kMaxDim) rd.fail("dim", "must be 1, 2 or 3");
    p.dim = static_cast<int>(d);
  }
  if (rd.has("modulus")) {
    c.modulus = rd.raw("modulus");
    try {
      Modulus::from_name(*c.modulus);
    } catch (const Error& e) {
      rd.fail("modulus", e.what());
    }
  }
  const auto positive = [&](const char* key, double& slot) {
    if (!rd.has(key)) return;
    slot = rd.real(key);
    if (!(slot > 0.0)) rd.fail(key, "must be positive");
  };
  const auto count = [&](const char* key, auto& slot, long lo) {
    if (!rd.has(key)) return;
    const long v = rd.integer(key);
    if (v < lo) rd.fail(key, "must be >= " + std::to_string(lo));
    slot = static_cast<std::remove_reference_t<decltype(slot)>>(v);
  };
  positive("R", c.R);
  positive("T", c.T);
  positive("h", c.h);
  positive("tau", c.tau);
  positive("eta", c.eta);
  count("stride", c.stride, 1);
  count("depth", c.depth, 0);
  count("translation_depth", c.translation_depth, 2);
  count("pairs", c.pairs, 1);
  count("time_samples", c.time_samples, 2);
  if (rd.has("lambda")) positive("lambda", c.lambda);
  if (rd.has("slack")) {
    c.slack = rd.real("slack");
    if (c.slack < 0.0) rd.fail("slack", "must be non-negative");
  }
  if (rd.has("seed")) c.seed = static_cast<std::uint64_t>(rd.integer("seed"));
  if (rd.has("out")) c.out = rd.raw("out");
  if (rd.has("pairing")) {
    try {
      c.pairing = witness_pairing_from_name(rd.raw("pairing"));
    } catch (const Error& e) {
      rd.fail("pairing", e.what());
    }
  }

  const auto level_list = [&](const char* key, std::vector<int>& out) {
    out = rd.ints(key);
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out[i] < 1) rd.fail(key, "levels must be positive");
      if (i > 0 && out[i] <= out[i - 1]) rd.fail(key, "levels must be strictly ascending");
    }
  };
  if (rd.has("levels")) level_list("levels", c.levels);
  if (rd.has("translation_levels")) level_list("translation_levels", c.translation_levels);
  if (c.translation_levels.empty()) {
    const std::size_t k = std::min<std::size_t>(3, c.levels.size());
    c.translation_levels.assign(c.levels.end() - static_cast<long>(k), c.levels.end());
  }
  const auto positive_list = [&](const char* key, std::vector<double>& out) {
    if (!rd.has(key)) return;
    out = rd.reals(key);
    for (double v : out) {
      if (!(v > 0.0)) rd.fail(key, "entries must be positive");
    }
  };
  positive_list("delta", c.deltas);
  positive_list("epsilon", c.epsilons);
  positive_list("compactness_radii", c.compactness_radii);
  positive_list("alphas", c.alphas);

  if (rd.has("velocity")) {
    const auto v = rd.reals("velocity");
    if (static_cast<int>(v.size()) != p.dim) rd.fail("velocity", "needs dim entries");
    p.velocity = {0, 0, 0};
    for (int k = 0; k < p.dim; ++k) p.velocity[k] = v[k];
  }
  if (rd.has("matrix")) {
    const auto v = rd.reals("matrix");
    if (static_cast<int>(v.size()) != p.dim * p.dim) rd.fail("matrix", "needs dim*dim entries");
    p.matrix.fill(0.0);
    for (int i = 0; i < p.dim; ++i) {
      for (int j = 0; j < p.dim; ++j) p.matrix[3 * i + j] = v[i * p.dim + j];
    }
  }
  positive("working_radius", p.working_radius);
  if (rd.has("terms")) count("terms", p.terms, 1);
  positive("alpha", p.alpha);
  positive("cap", p.cap);
  positive("witness_radius", p.witness_radius);
  positive("witness_spacing", p.witness_spacing);
  positive("maximal_radius", p.maximal_radius);
  count("calibration_pairs", p.calibration_pairs, 1);
  count("osgood_pairs", p.osgood_pairs, 1);
  positive("witness_margin", p.witness_margin);
  if (rd.has("field_seed")) p.seed = static_cast<std::uint64_t>(rd.integer("field_seed"));

  if (c.h >= c.R) rd.fail(rd.has("h") ? "h" : "R", "grid spacing must be below R");
  try {
    TimeMesh::uniform(c.T, c.tau, 1);
  } catch (const Error&) {
    rd.fail(rd.has("tau") ? "tau" : "T", "T / tau must be an integer");
  }
  if ((static_cast<long>(std::lround(c.T / c.tau)) % c.stride) != 0) {
    rd.fail("stride", "must divide T / tau");
  }
  for (double r : c.compactness_radii) {
    if (!(r < c.R / 2.0)) rd.fail("compactness_radii", "radii must lie in (0, R/2)");
  }
  if (c.field == "sobolev-singular" || c.field == "combined") {
    if (!(p.alpha < p.dim)) rd.fail("alpha", "must lie in (0, dim)");
  }
  return c;
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Plots

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace detail

/// Fixed-canvas SVG line plot. Axes are log10 when `log_x` / `log_y` and all
/// values on that axis are positive.
inline std::string svg_line_plot(const std::string& title, const std::string& xlabel,
                                 const std::string& ylabel, const std::vector<PlotSeries>& series,
                                 bool log_x = false, bool log_y = true) {
  const double W = 640, H = 420, left = 80, right = 160, top = 40, bottom = 60;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  bool xpos = true, ypos = true;
  for (const auto& s : series) {
    for (auto [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      xpos = xpos && x > 0;
      ypos = ypos && y > 0;
    }
  }
  log_x = log_x && xpos;
  log_y = log_y && ypos;
  const auto tx = [&](double x) { return log_x ? std::log10(x) : x; };
  const auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
  for (const auto& s : series) {
    for (auto [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      xmin = std::min(xmin, tx(x));
      xmax = std::max(xmax, tx(x));
      ymin = std::min(ymin, ty(y));
      ymax = std::max(ymax, ty(y));
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
  if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
  const double pw = W - left - right;
  const double ph = H - top - bottom;
  const auto px = [&](double x) { return left + (tx(x) - xmin) / (xmax - xmin) * pw; };
  const auto py = [&](double y) { return top + ph - (ty(y) - ymin) / (ymax - ymin) * ph; };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << detail::svg_escape(title) << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    const double fy = ymin + (ymax - ymin) * i / 4.0;
    const double vx = log_x ? std::pow(10.0, fx) : fx;
    const double vy = log_y ? std::pow(10.0, fy) : fy;
    char bx[32], by[32];
    std::snprintf(bx, sizeof bx, "%.3g", vx);
    std::snprintf(by, sizeof by, "%.3g", vy);
    o << "<text x=\"" << detail::svg_num(left + pw * i / 4.0) << "\" y=\"" << H - bottom + 18
      << "\" text-anchor=\"middle\" font-size=\"11\">" << bx << "</text>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << detail::svg_num(top + ph - ph * i / 4.0 + 4)
      << "\" text-anchor=\"end\" font-size=\"11\">" << by << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 16
    << "\" text-anchor=\"middle\" font-size=\"12\">" << detail::svg_escape(xlabel)
    << (log_x ? " (log)" : "") << "</text>\n";
  o << "<text x=\"18\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
    << "transform=\"rotate(-90 18 " << top + ph / 2 << ")\">" << detail::svg_escape(ylabel)
    << (log_y ? " (log)" : "") << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % 6];
    std::string path;
    for (auto [x, y] : series[s].points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      path += (path.empty() ? "M" : " L") + detail::svg_num(px(x)) + ' ' + detail::svg_num(py(y));
    }
    o << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n";
    for (auto [x, y] : series[s].points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      o << "<circle cx=\"" << detail::svg_num(px(x)) << "\" cy=\"" << detail::svg_num(py(y))
        << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = top + 14 + 18.0 * static_cast<double>(s);
    o << "<line x1=\"" << W - right + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - right + 32
      << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << W - right + 38 << "\" y=\"" << ly << "\" font-size=\"12\">"
      << detail::svg_escape(series[s].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("cannot write " + path.string());
}

}  // namespace detail

/// Writes lhs_rhs.svg, and cauchy_D.svg / g_of_r.svg when the reports carry
/// those tables. Returns the files written; none (with a warning) for an
/// empty list.
inline std::vector<std::string> emit_plots(const std::vector<EstimateReport>& reports,
                                           const std::filesystem::path& dir) {
  std::vector<std::string> written;
  if (reports.empty()) {
    std::cerr << "warning: no reports, no plots written\n";
    return written;
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());

  PlotSeries lhs{"LHS", {}};
  PlotSeries rhs{"RHS", {}};
  for (std::size_t i = 0; i < reports.size(); ++i) {
    lhs.points.emplace_back(static_cast<double>(i + 1), reports[i].lhs);
    rhs.points.emplace_back(static_cast<double>(i + 1), reports[i].rhs);
  }
  detail::write_text(dir / "lhs_rhs.svg",
                     svg_line_plot("measured sides per report", "report", "value", {lhs, rhs}));
  written.push_back("lhs_rhs.svg");

  PlotSeries D{"D(n, 2n)", {}};
  PlotSeries bound{"bound", {}};
  for (const auto& r : reports) {
    if (r.id == "cauchy" && r.m == 2 * r.n) {
      D.points.emplace_back(r.n, r.lhs);
      bound.points.emplace_back(r.n, r.rhs);
    }
  }
  if (!D.points.empty()) {
    detail::write_text(dir / "cauchy_D.svg",
                       svg_line_plot("Cauchy differences", "level n", "value", {D, bound}, true));
    written.push_back("cauchy_D.svg");
  }

  std::map<double, double> g;
  for (const auto& r : reports) {
    if (r.id == "thm44") {
      if (auto gr = r.constant("g_r"), rr = r.constant("r"); gr && rr) g[*rr] = *gr;
    }
  }
  if (!g.empty()) {
    PlotSeries gs{"g(r)", {g.begin(), g.end()}};
    detail::write_text(dir / "g_of_r.svg",
                       svg_line_plot("translation modulus g(r)", "r", "g(r)", {gs}, true));
    written.push_back("g_of_r.svg");
  }
  return written;
}

// ---------------------------------------------------------------------------
// Orchestration

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"stability", "cauchy", "regularity", "compactness",
                                              "weak-type", "all"};
  return names;
}

struct ExperimentResult {
  std::vector<EstimateReport> reports;
  std::vector<std::string> files;
  int exit_code = 0;
};

namespace detail {

class Pipeline {
 public:
  explicit Pipeline(const ExperimentConfig& c)
      : cfg_(c),
        base_(catalog_field(c.field, c.params)),
        rho_(c.modulus ? Modulus::from_name(*c.modulus)
                       : (base_.witness ? base_.witness->modulus : Modulus::log())) {}

  const VectorField& base() const { return base_; }
  const Modulus& rho() const { return rho_; }

  const VectorField& level(int n) {
    auto it = levels_.find(n);
    if (it == levels_.end()) it = levels_.emplace(n, mollify(base_, n)).first;
    return it->second;
  }

  /// Ensemble over B(R) with every step stored.
  const TrajectoryEnsemble& narrow(int n) { return ensemble(n, cfg_.R, 1); }

  /// Ensemble over B(3R) with the configured stride.
  const TrajectoryEnsemble& wide(int n) { return ensemble(n, 3.0 * cfg_.R, cfg_.stride); }

  void stability(std::vector<EstimateReport>& out) {
    const auto& L = cfg_.levels;
    StabilityOptions opt;
    opt.pairing = cfg_.pairing;
    opt.slack = cfg_.slack;
    for (std::size_t i = 0; i < L.size(); ++i) {
      for (std::size_t j = i + 1; j < L.size(); ++j) {
        const VectorField& a = level(L[i]);
        const VectorField& b = level(L[j]);
        std::vector<double> deltas = cfg_.deltas;
        bool measured = false;
        if (deltas.empty()) {
          const double Rbar = cfg_.R + cfg_.T * std::max(a.sup_norm, b.sup_norm);
          const double d = field_l1_distance(a, b, cfg_.T, make_grid(a.dim, Rbar, cfg_.h));
          // identical fields: any delta gives lhs = 0
          deltas = {d > 0.0 ? d : 1.0};
          measured = true;
        }
        for (double delta : deltas) {
          EstimateReport r =
              stability_report(a, narrow(L[i]), b, narrow(L[j]), rho_, delta, cfg_.R, opt);
          r.note("delta_source", measured ? "measured" : "config");
          push(out, std::move(r), "stability");
        }
      }
    }
  }

  void cauchy(std::vector<EstimateReport>& out) {
    std::vector<VectorField> fields;
    std::vector<TrajectoryEnsemble> ens;
    for (int n : cfg_.levels) {
      fields.push_back(level(n));
      ens.push_back(narrow(n));
    }
    CauchyResult res = cauchy_diagnostic(base_, fields, ens, rho_, cfg_.eta, cfg_.R, cfg_.slack);
    for (auto& r : res.reports) push(out, std::move(r), "cauchy");

    const int top = cfg_.levels.back();
    const TrajectoryEnsemble fine =
        integrate_ensemble(level(top), make_grid(base_.dim, cfg_.R, cfg_.h), cfg_.T,
                           cfg_.tau / 10.0, 10);
    push(out, uniqueness_report(narrow(top), fine, cfg_.R), "cauchy");
  }

  void regularity(std::vector<EstimateReport>& out) {
    const int top = cfg_.levels.back();
    RegularityOptions opt;
    opt.depth = cfg_.depth;
    opt.pairs = cfg_.pairs;
    opt.time_samples = cfg_.time_samples;
    opt.seed = cfg_.seed;
    opt.slack = cfg_.slack;
    std::vector<double> eps = cfg_.epsilons;
    if (eps.empty()) eps = {0.1 * ball_measure(base_.dim, cfg_.R)};
    for (double e : eps) {
      RegularitySet set = regularity_set(level(top), wide(top), rho_, cfg_.R, e, opt);
      push(out, std::move(set.set_report), "regularity");
      push(out, std::move(set.modulus_report), "regularity");
    }
  }

  void compactness(std::vector<EstimateReport>& out) {
    const int top = cfg_.levels.back();
    std::vector<double> radii = cfg_.compactness_radii;
    if (radii.empty()) radii = {cfg_.R / 4, cfg_.R / 8, cfg_.R / 16};
    for (double r : radii) {
      push(out, compactness_a(level(top), wide(top), rho_, r, cfg_.R, cfg_.slack), "compactness");
    }
    std::vector<VectorField> fields;
    for (int n : cfg_.translation_levels) fields.push_back(level(n));
    const TranslationConstants c = translation_constants(fields, cfg_.T, cfg_.R, cfg_.h);
    for (int n : cfg_.translation_levels) {
      for (int j = 2; j <= cfg_.translation_depth; ++j) {
        const double r = cfg_.R * std::ldexp(1.0, -j);
        if (r < cfg_.h) break;
        push(out, translation_functional(level(n), wide(n), c, rho_, r, cfg_.R, cfg_.slack),
             "compactness");
      }
    }
  }

  void weak_type(std::vector<EstimateReport>& out) {
    const double lambda = cfg_.lambda > 0.0 ? cfg_.lambda : 2.0 * cfg_.R;
    const PointGrid grid = make_grid(base_.dim, cfg_.R + lambda, cfg_.h);
    std::vector<double> speed(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) speed[i] = norm(base_(0.0, grid[i]));
    WeakTypeResult w = weak_type_check(grid, speed, cfg_.R, lambda, cfg_.alphas);
    w.report.field = base_.id;
    w.report.slack = cfg_.slack;
    w.report.note("function", "speed |b|");
    push(out, std::move(w.report), "weak-type");
  }

 private:
  const TrajectoryEnsemble& ensemble(int n, double radius, int stride) {
    const auto key = std::make_tuple(n, radius, stride);
    auto it = ensembles_.find(key);
    if (it == ensembles_.end()) {
      it = ensembles_
               .emplace(key, integrate_ensemble(level(n), make_grid(base_.dim, radius, cfg_.h),
                                                cfg_.T, cfg_.tau, stride))
               .first;
    }
    return it->second;
  }

  void push(std::vector<EstimateReport>& out, EstimateReport r, const std::string& suite) {
    r.suite = suite;
    if (r.field.empty()) r.field = base_.id;
    r.meta("seed", static_cast<double>(cfg_.seed));
    out.push_back(std::move(r));
  }

  ExperimentConfig cfg_;
  VectorField base_;
  Modulus rho_;
  std::map<int, VectorField> levels_;
  std::map<std::tuple<int, double, int>, TrajectoryEnsemble> ensembles_;
};

}  // namespace detail

/// Runs one suite (or all) and writes report-NNN-<id>.json, summary.csv and
/// the plots into cfg.out. Exit code 0 when every verdict passes, else 1.
/// Config problems and unwritable output raise ConfigError.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& suite) {
  const auto& names = suite_names();
  if (std::find(names.begin(), names.end(), suite) == names.end()) {
    throw ConfigError("unknown suite '" + suite + "'");
  }
  const std::filesystem::path dir(cfg.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ConfigError("cannot create output directory " + dir.string());
  }

  ExperimentResult res;
  detail::Pipeline pipe(cfg);
  const bool all = suite == "all";
  if (all || suite == "stability") pipe.stability(res.reports);
  if (all || suite == "cauchy") pipe.cauchy(res.reports);
  if (all || suite == "regularity") pipe.regularity(res.reports);
  if (all || suite == "compactness") pipe.compactness(res.reports);
  if (all || suite == "weak-type") pipe.weak_type(res.reports);

  std::string csv = std::string(kReportCsvHeader) + "\n";
  for (std::size_t i = 0; i < res.reports.size(); ++i) {
    const EstimateReport& r = res.reports[i];
    char name[64];
    std::snprintf(name, sizeof name, "report-%03zu-%s.json", i + 1, r.id.c_str());
    detail::write_text(dir / name, to_json(r).dump(2) + "\n");
    res.files.push_back(name);
    csv += to_csv_row(r) + "\n";
    if (!r.pass()) res.exit_code = 1;
  }
  detail::write_text(dir / "summary.csv", csv);
  res.files.push_back("summary.csv");
  for (auto& f : emit_plots(res.reports, dir)) res.files.push_back(f);
  return res;
}

}  // namespace rlf
