#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "rlf/rlf.hpp"

namespace {

int run(const std::string& config, const std::string& suite, const std::string& out,
        const double* slack_pct) {
  rlf::ExperimentConfig cfg = rlf::parse_config(config);
  if (!out.empty()) cfg.out = out;
  if (slack_pct) {
    if (!(*slack_pct >= 0.0)) throw rlf::ConfigError("--slack must be non-negative");
    cfg.slack = *slack_pct / 100.0;
  }
  const rlf::ExperimentResult res = rlf::run_experiment(cfg, suite);
  std::size_t failed = 0;
  for (const auto& r : res.reports) {
    if (!r.pass()) ++failed;
    std::printf("%-6s %-11s %-18s n=%-3d m=%-3d lhs=%-12.6g rhs=%-12.6g\n",
                r.pass() ? "pass" : "FAIL", r.id.c_str(), r.field.c_str(), r.n, r.m, r.lhs,
                r.rhs);
  }
  std::printf("%zu reports, %zu failed, written to %s\n", res.reports.size(), failed,
              cfg.out.c_str());
  return res.exit_code;
}

void catalog() {
  rlf::FieldParams p;
  std::printf("fields:\n");
  for (const auto& id : rlf::catalog_ids()) {
    if (id == "sobolev-singular" || id == "combined") {
      std::printf("  %-17s calibrated witness (built on demand)\n", id.c_str());
      continue;
    }
    const rlf::VectorField b = rlf::catalog_field(id, p);
    std::printf("  %-17s |b|_inf=%-10.6g witness: %s, modulus %s\n", id.c_str(), b.sup_norm,
                b.witness ? rlf::to_string(b.witness->provenance).c_str() : "none",
                b.witness ? b.witness->modulus.name().c_str() : "-");
  }
  std::printf("moduli:\n  linear  rho(s) = s\n  log     rho(s) = s log(1/s) below e^-2\n"
              "  loglog  rho(s) = s log(1/s) log log(1/s) below e^-e\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for regular Lagrangian flows under Osgood-type conditions"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "Run an experiment suite from a config file");
  std::string config;
  std::string suite;
  std::string out;
  double slack = 0.0;
  run_cmd->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--suite", suite, "stability, cauchy, regularity, compactness, weak-type, all")
      ->required()
      ->check(CLI::IsMember(rlf::suite_names()));
  run_cmd->add_option("--out", out, "Output directory (overrides the config)");
  auto* slack_opt = run_cmd->add_option("--slack", slack, "Multiplicative slack in percent");
  run_cmd->footer(rlf::kConfigHelp);

  app.add_subcommand("catalog", "List catalog fields and moduli");

  auto* psi_cmd = app.add_subcommand("psi", "Evaluate psi_delta(xi) = int_0^xi ds / (rho(s) + delta)");
  std::string modulus;
  double delta = 0.0;
  double xi = 0.0;
  psi_cmd->add_option("--modulus", modulus, "linear, log or loglog")->required();
  psi_cmd->add_option("--delta", delta, "delta > 0")->required();
  psi_cmd->add_option("--xi", xi, "xi >= 0")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) return run(config, suite, out, slack_opt->count() ? &slack : nullptr);
    if (app.got_subcommand("catalog")) {
      catalog();
      return 0;
    }
    if (psi_cmd->parsed()) {
      const rlf::PsiFunctional p(rlf::Modulus::from_name(modulus), delta);
      std::printf("%.17g\n", rlf::psi(p, xi));
      return 0;
    }
  } catch (const rlf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
