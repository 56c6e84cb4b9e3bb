// SPDX-License-Identifier: Apache-2.0
//
// maglab: command line driver for the magnetostatics solvers.
//
// Exit codes: 0 success, 1 other failure, 2 configuration error,
// 3 solver non-convergence.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "maglab/maglab.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_solver = 3;

std::filesystem::path output_dir(const std::string& flag, const maglab::RunConfig& c) {
  if (!flag.empty()) return flag;
  if (!c.output_dir.empty()) return c.base_dir / c.output_dir;
  throw maglab::ConfigError("no output directory (use --out or config key \"output_dir\")");
}

int cmd_solve(const std::string& config, const std::string& formulation, std::optional<double> eps0,
              const std::string& out) {
  const maglab::RunConfig c = maglab::load_config(config);
  std::optional<maglab::Formulation> f;
  if (!formulation.empty()) {
    f = maglab::parse_formulation(formulation);
    if (!f) throw maglab::ConfigError("unknown formulation '" + formulation + "'");
  }
  const auto dir = output_dir(out, c);
  const auto r = maglab::run_solve(c, f, eps0, dir);
  std::printf("%s: %d Newton iterations, |h| = %.6e, |b| = %.6e, weak div = %.3e\n",
              maglab::to_string(r.solved.field.formulation).c_str(), r.solved.trace.iterations(),
              r.stats.h_norm, r.stats.b_norm, r.stats.weak_divergence);
  std::printf("wrote %s\n", dir.string().c_str());
  return 0;
}

int cmd_sweep(const std::string& config, const std::string& out) {
  const maglab::RunConfig c = maglab::load_config(config);
  const auto dir = output_dir(out, c);
  const auto r = maglab::run_sweep(c, dir);
  std::cout << maglab::detail::sweep_table(r);
  std::printf("wrote %s\n", dir.string().c_str());
  return r.failed ? exit_solver : 0;
}

int cmd_compare(const std::string& config, const std::string& out) {
  const maglab::RunConfig c = maglab::load_config(config);
  const auto dir = output_dir(out, c);
  const auto r = maglab::run_compare(c, dir);
  std::printf("%-8s %-8s %-11s %-11s\n", "a", "b", "h-diff", "b-diff");
  for (const auto& row : r.rows)
    std::printf("%-8s %-8s %-11.3e %-11.3e\n", maglab::to_string(row.a).c_str(),
                maglab::to_string(row.b).c_str(), row.h_diff, row.b_diff);
  std::printf("wrote %s\n", dir.string().c_str());
  return 0;
}

int cmd_certify(const std::string& bh, double mu_ext_r) {
  const maglab::BHTable table = maglab::load_bh(bh);
  const auto law = maglab::MaterialLaw::tabulated(table, mu_ext_r * maglab::mu0);
  const auto cert = maglab::certify(law);
  std::printf("samples  %zu\n", table.size());
  std::printf("gamma    %.9e H/m (%.6g mu0)\n", cert.gamma, cert.gamma / maglab::mu0);
  std::printf("L        %.9e H/m (%.6g mu0)\n", cert.lipschitz, cert.lipschitz / maglab::mu0);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maglab: 2D nonlinear magnetostatics (penalty, scalar, limit, vector formulations)"};
  app.require_subcommand(1);

  std::string config, formulation, out, bh;
  double eps0 = 0.0;
  double mu_ext_r = 1.0;

  auto* solve = app.add_subcommand("solve", "solve one formulation");
  solve->add_option("--config", config, "run configuration (JSON)")->required();
  solve->add_option("--formulation", formulation, "penalty | scalar | vector | limit");
  auto* eps_opt = solve->add_option("--epsilon0", eps0, "dimensionless penalty parameter");
  solve->add_option("--out", out, "output directory");

  auto* sweep = app.add_subcommand("sweep", "penalty epsilon sweep against the limit solution");
  sweep->add_option("--config", config, "run configuration (JSON)")->required();
  sweep->add_option("--out", out, "output directory");

  auto* compare = app.add_subcommand("compare", "solve all formulations and compare them");
  compare->add_option("--config", config, "run configuration (JSON)")->required();
  compare->add_option("--out", out, "output directory");

  auto* certify = app.add_subcommand("certify", "strong monotonicity / Lipschitz constants of B-H data");
  certify->add_option("--bh", bh, "B-H table (CSV)")->required();
  certify->add_option("--mu-ext-r", mu_ext_r, "extrapolation slope relative to mu0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_config;
  }

  try {
    if (*solve) {
      std::optional<double> e;
      if (eps_opt->count() > 0) e = eps0;
      return cmd_solve(config, formulation, e, out);
    }
    if (*sweep) return cmd_sweep(config, out);
    if (*compare) return cmd_compare(config, out);
    if (*certify) return cmd_certify(bh, mu_ext_r);
  } catch (const maglab::DiagnosticError& e) {
    std::cerr << e.what() << '\n';
    return exit_config;
  } catch (const maglab::UnsupportedLawError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_config;
  } catch (const maglab::CertificationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_config;
  } catch (const maglab::SolverError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_solver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
