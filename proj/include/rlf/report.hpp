#pragma once

// Measured two-sided inequality reports and their JSON / CSV forms.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlf/error.hpp"

namespace rlf {

inline constexpr double kDefaultSlack = 0.05;

/// One measured inequality lhs <= rhs. The verdict allows a multiplicative
/// slack and an additive discretisation budget, both recorded.
struct EstimateReport {
  std::string id;     ///< thm31 | cauchy | uniqueness | thm41 | thm41-set | prop43 | thm44 | lemma23
  std::string suite;  ///< orchestration suite that produced it
  std::string field;
  int n = 0;
  int m = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = kDefaultSlack;
  double budget = 0.0;
  std::vector<std::pair<std::string, double>> constants;
  std::vector<std::pair<std::string, double>> metadata;
  std::vector<std::pair<std::string, std::string>> notes;

  bool pass() const { return lhs <= rhs * (1.0 + slack) + budget; }

  EstimateReport& set(const std::string& key, double v) {
    for (auto& [k, x] : constants) {
      if (k == key) {
        x = v;
        return *this;
      }
    }
    constants.emplace_back(key, v);
    return *this;
  }

  EstimateReport& meta(const std::string& key, double v) {
    for (auto& [k, x] : metadata) {
      if (k == key) {
        x = v;
        return *this;
      }
    }
    metadata.emplace_back(key, v);
    return *this;
  }

  EstimateReport& note(const std::string& key, std::string v) {
    notes.emplace_back(key, std::move(v));
    return *this;
  }

  std::optional<double> constant(const std::string& key) const {
    for (const auto& [k, x] : constants) {
      if (k == key) return x;
    }
    return std::nullopt;
  }

  std::optional<double> metadatum(const std::string& key) const {
    for (const auto& [k, x] : metadata) {
      if (k == key) return x;
    }
    return std::nullopt;
  }
};

namespace detail {

// Non-finite reals are not valid JSON numbers; they travel as strings.
inline nlohmann::json real(double v) {
  // whole numbers (counts, K, n) print without a trailing .0
  if (v == std::floor(v) && std::abs(v) < 9e15) return static_cast<std::int64_t>(v);
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline std::string csv_real(double v) { return real(v).dump(); }

inline std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline nlohmann::json to_json(const EstimateReport& r) {
  nlohmann::json j;
  j["estimate_id"] = r.id;
  j["suite"] = r.suite;
  j["field"] = r.field;
  j["n"] = r.n;
  j["m"] = r.m;
  j["lhs"] = detail::real(r.lhs);
  j["rhs"] = detail::real(r.rhs);
  j["slack"] = detail::real(r.slack);
  j["budget"] = detail::real(r.budget);
  j["verdict"] = r.pass() ? "pass" : "fail";
  nlohmann::json c = nlohmann::json::object();
  for (const auto& [k, v] : r.constants) c[k] = detail::real(v);
  j["constants"] = c;
  nlohmann::json m = nlohmann::json::object();
  for (const auto& [k, v] : r.metadata) m[k] = detail::real(v);
  j["metadata"] = m;
  nlohmann::json notes = nlohmann::json::object();
  for (const auto& [k, v] : r.notes) notes[k] = v;
  j["notes"] = notes;
  return j;
}

inline const char* kReportCsvHeader = "suite,estimate_id,field,n,m,lhs,rhs,slack,verdict,h,tau,K";

inline std::string to_csv_row(const EstimateReport& r) {
  const auto md = [&](const char* key) {
    const auto v = r.metadatum(key);
    return v ? detail::csv_real(*v) : std::string();
  };
  std::string row;
  row += detail::csv_cell(r.suite) + ',';
  row += detail::csv_cell(r.id) + ',';
  row += detail::csv_cell(r.field) + ',';
  row += std::to_string(r.n) + ',';
  row += std::to_string(r.m) + ',';
  row += detail::csv_real(r.lhs) + ',';
  row += detail::csv_real(r.rhs) + ',';
  row += detail::csv_real(r.slack) + ',';
  row += std::string(r.pass() ? "pass" : "fail") + ',';
  row += md("h") + ',' + md("tau") + ',' + md("K");
  return row;
}

}  // namespace rlf
