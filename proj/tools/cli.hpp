#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "thfem/flow.hpp"

namespace thfem::cli {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Command { stokes_cavity, oseen_step, oseen_cavity, infsup_sweep };

Command parse_command(const std::string& s);
std::string to_string(Command c);

/// One fully validated run. Every field is checked by validate() before any
/// assembly starts.
struct RunConfig {
  Command command = Command::stokes_cavity;
  std::vector<int> levels{4};
  std::vector<ElementPair> pairs{ElementPair::p2p1};
  std::vector<std::string> pres;  ///< empty selects p1 / m1
  double rtol = 1e-8;
  double eta = 1e-4;
  double c = 10.0;
  double nu = 0.0;         ///< 0 selects the problem default
  int maxit = 0;           ///< 0 selects 1000 (MINRES) / 400 (GMRES)
  bool maxit_set = false;
  int picard_steps = 5;
  bool est_infsup = false;
  bool export_matrices = false;
  bool fields = false;
  std::filesystem::path out = ".";

  Problem problem() const;
  bool is_oseen() const { return command == Command::oseen_step || command == Command::oseen_cavity; }
  std::vector<std::string> preconditioners() const;
  double viscosity() const;
  int max_iterations() const;
  void validate() const;
};

/// "4,5,6", "4-6" or "" (no levels).
std::vector<int> parse_levels(const std::string& s);
/// Comma-separated list, blanks dropped.
std::vector<std::string> split_list(const std::string& s);

/// Runs the command and writes its CSV files into cfg.out. Returns false when
/// some solve stopped without meeting its tolerance.
bool run(const RunConfig& cfg, std::ostream& log);

}  // namespace thfem::cli
