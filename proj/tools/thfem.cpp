// thfem: benchmark driver for the Stokes and Oseen examples.
//
//   thfem stokes-cavity --grid 4-6 --elements P2P1,P2P1star --pre p1 --out out/p1
//   thfem oseen-step --grid 4,5 --elements P2P1star --pre m1,m2 --out out/m12
//
// Exit codes: 0 success, 1 usage error, 2 solver failure.

#include <iostream>

#include <CLI11.hpp>

#include "cli.hpp"

namespace {

constexpr int kUsage = 1;
constexpr int kSolver = 2;

}  // namespace

int main(int argc, char** argv) {
  using thfem::cli::RunConfig;
  RunConfig cfg;
  std::string grid = "4";
  std::string elements = "P2P1";
  std::string pre;
  std::string out = ".";

  CLI::App app{"Enriched Taylor-Hood Stokes/Oseen benchmarks"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(false);
  app.set_config("--config", "", "key = value file; command-line flags take precedence");

  app.add_option("--grid", grid, "grid levels, e.g. 4,5,6 or 4-6 (empty for none)");
  app.add_option("--elements", elements, "comma list of P2P1, P2P1star, Q2Q1, Q2Q1star");
  app.add_option("--pre", pre, "p1|p2 (Stokes); comma list of m1, m2, m3, two-stage (Oseen)");
  app.add_option("--rtol", cfg.rtol, "MINRES relative tolerance")->capture_default_str();
  app.add_option("--eta", cfg.eta, "Oseen GMRES tolerance relative to the initial residual")->capture_default_str();
  app.add_option("--c", cfg.c, "two-stage step I safety factor")->capture_default_str();
  app.add_option("--nu", cfg.nu, "viscosity (Oseen; default 1/50 step, 1/100 cavity)");
  app.add_option("--maxit", cfg.maxit, "iteration cap (default 1000 MINRES, 400 GMRES)");
  app.add_option("--picard", cfg.picard_steps, "Picard system to solve")->capture_default_str();
  app.add_option("--out", out, "output directory")->capture_default_str();
  app.add_flag("--est-infsup", cfg.est_infsup, "add per-iteration inf-sup estimates to histories");
  app.add_flag("--export-matrices", cfg.export_matrices, "write system matrices as triplets");
  app.add_flag("--fields", cfg.fields, "write velocity, pressure and element CSVs");

  for (const char* name : {"stokes-cavity", "infsup-sweep", "oseen-step", "oseen-cavity"}) {
    app.add_subcommand(name)->callback([&cfg, name] { cfg.command = thfem::cli::parse_command(name); });
  }

  try {
    app.parse(argc, argv);
    cfg.maxit_set = app.count("--maxit") > 0;
    cfg.levels = thfem::cli::parse_levels(grid);
    cfg.pairs.clear();
    for (const auto& e : thfem::cli::split_list(elements)) cfg.pairs.push_back(thfem::parse_element_pair(e));
    cfg.pres = thfem::cli::split_list(pre);
    cfg.out = out;
    cfg.validate();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (!thfem::cli::run(cfg, std::cout)) {
      std::cerr << "warning: some solves stopped at the iteration cap\n";
    }
  } catch (const thfem::cli::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolver;
  }
  return 0;
}
