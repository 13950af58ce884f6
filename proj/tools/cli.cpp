#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace thfem::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::ofstream open_csv(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.precision(12);
  return out;
}

std::string tag(ElementPair pair, int level) { return "_" + to_string(pair) + "_L" + std::to_string(level); }
std::string tag(ElementPair pair, const std::string& pre, int level) {
  return "_" + to_string(pair) + "_" + pre + "_L" + std::to_string(level);
}

struct Timings {
  std::vector<std::tuple<std::string, std::string, double>> rows;
  void add(std::string run, std::string phase, double s) { rows.emplace_back(std::move(run), std::move(phase), s); }
  void write(const std::filesystem::path& dir) const {
    auto out = open_csv(dir / "timings.csv");
    out.precision(6);
    out << "run,phase,seconds\n";
    for (const auto& [run, phase, s] : rows) out << run << ',' << phase << ',' << s << '\n';
  }
};

void export_system(const std::filesystem::path& dir, const std::string& t, const SaddleSystem& sys,
                   const SparseMatrix* mq) {
  auto f = open_csv(dir / ("F" + t + ".txt"));
  write_triplets(f, sys.F);
  auto b = open_csv(dir / ("B" + t + ".txt"));
  write_triplets(b, sys.B());
  if (mq) {
    auto m = open_csv(dir / ("MQ" + t + ".txt"));
    write_triplets(m, *mq);
  }
  auto r = open_csv(dir / ("rhs" + t + ".txt"));
  r.precision(17);
  const Vector rhs = sys.rhs();
  for (Eigen::Index i = 0; i < rhs.size(); ++i) r << rhs(i) << '\n';
}

void write_fields(const std::filesystem::path& dir, const std::string& t, const Discretization& disc,
                  const Vector& velocity, const Vector& pressure) {
  auto v = open_csv(dir / ("velocity" + t + ".csv"));
  write_velocity_csv(v, disc.dofs(), velocity);
  auto p = open_csv(dir / ("pressure" + t + ".csv"));
  write_pressure_csv(p, disc.mesh(), pressure);
  auto e = open_csv(dir / ("elements" + t + ".csv"));
  write_element_csv(e, disc.mesh(), pressure, disc.dofs().n_k, disc.divergence(velocity));
}

int velocity_dofs(const Discretization& d) { return 2 * d.dofs().n_nodes; }
int pressure_dofs(const Discretization& d) { return d.dofs().n_k + d.dofs().n_0; }

FlowProblem flow_problem(const RunConfig& cfg, ElementPair pair, int level) {
  return FlowProblem{cfg.problem(), cfg.viscosity(), pair, level};
}

// One row per level; each element pair contributes a block of columns.
bool run_stokes(const RunConfig& cfg, std::ostream& log, Timings& timings) {
  const bool sweep = cfg.command == Command::infsup_sweep;
  const std::string pre = cfg.preconditioners().front();
  auto table = open_csv(cfg.out / "table.csv");
  table << "level";
  for (ElementPair pair : cfg.pairs) {
    const std::string p = to_string(pair) + "_";
    table << ',' << p << "velocity_dofs," << p << "pressure_dofs," << p << "iterations," << p << "infsup";
    if (sweep) table << ',' << p << "stabilized_at," << p << "oracle";
  }
  table << '\n';
  bool ok = true;
  for (int level : cfg.levels) {
    table << level;
    for (ElementPair pair : cfg.pairs) {
      const std::string t = tag(pair, level);
      auto t0 = Clock::now();
      const Discretization disc = make_discretization(flow_problem(cfg, pair, level));
      timings.add(t.substr(1), "assemble", seconds_since(t0));
      t0 = Clock::now();
      const StokesSolution s = solve_stokes(disc, pre, cfg.rtol, cfg.max_iterations());
      timings.add(t.substr(1), "solve", seconds_since(t0));
      ok = ok && s.report.converged;
      log << to_string(pair) << " level " << level << ": " << s.report.iterations << " iterations"
          << (s.report.converged ? "" : " (not converged)") << ", gamma^2 ~ " << s.infsup.final_estimate << '\n';

      table << ',' << velocity_dofs(disc) << ',' << pressure_dofs(disc) << ',' << s.report.iterations << ','
            << s.infsup.final_estimate;
      if (sweep) {
        table << ',' << s.infsup.stabilized_at << ',';
        if (s.system.n_p() <= kDenseOracleLimit) {
          t0 = Clock::now();
          table << oracle_infsup(s.system, s.mass);
          timings.add(t.substr(1), "oracle", seconds_since(t0));
        }
      }
      auto hist = open_csv(cfg.out / ("history" + t + ".csv"));
      write_history_csv(hist, s.report, cfg.est_infsup || sweep);
      if (cfg.fields) write_fields(cfg.out, t, disc, s.velocity, s.pressure);
      if (cfg.export_matrices) export_system(cfg.out, t, s.system, &s.mass.MQ);
    }
    table << '\n';
  }
  return ok;
}

bool run_oseen(const RunConfig& cfg, std::ostream& log, Timings& timings) {
  const bool enclosed = cfg.problem() == Problem::cavity2d;
  const double nu = cfg.viscosity();
  auto summary = open_csv(cfg.out / "summary.csv");
  summary << "elements,pre,level,velocity_dofs,pressure_dofs,iterations,converged,initial_residual,"
             "final_residual,stage1_iterations,stage2_iterations,transition_residual,bound,slack\n";
  bool ok = true;
  for (ElementPair pair : cfg.pairs) {
    for (int level : cfg.levels) {
      const std::string t = tag(pair, level);
      auto t0 = Clock::now();
      const Discretization disc = make_discretization(flow_problem(cfg, pair, level));
      timings.add(t.substr(1), "assemble", seconds_since(t0));
      t0 = Clock::now();
      const PicardResult pic = picard_oseen(disc, nu, cfg.picard_steps);
      timings.add(t.substr(1), "picard", seconds_since(t0));
      const SaddleSystem& sys = pic.system;
      if (cfg.export_matrices) export_system(cfg.out, t, sys, nullptr);

      for (const std::string& pre : cfg.preconditioners()) {
        const std::string tp = tag(pair, pre, level);
        auto hist = open_csv(cfg.out / ("history" + tp + ".csv"));
        summary << to_string(pair) << ',' << pre << ',' << level << ',' << velocity_dofs(disc) << ','
                << pressure_dofs(disc) << ',';
        Vector solution;
        t0 = Clock::now();
        if (pre == "two-stage") {
          TwoStageOptions opt;
          opt.eta = cfg.eta;
          opt.c = cfg.c;
          opt.maxit = cfg.max_iterations();
          const TwoStageResult r =
              two_stage_solve(sys, disc.pcd(pic.convecting, nu), disc.pressure_mass(), nu, enclosed, opt);
          timings.add(tp.substr(1), "solve", seconds_since(t0));
          const auto h = r.history();
          hist << "iter,residual,stage\n";
          for (std::size_t j = 0; j < h.size(); ++j) hist << j << ',' << h[j].second << ',' << h[j].first << '\n';
          ok = ok && r.stage2.converged;
          summary << r.stage1.iterations + r.stage2.iterations << ',' << r.stage2.converged << ','
                  << r.stage1.initial_residual() << ',' << r.stage2.final_residual() << ',' << r.stage1.iterations
                  << ',' << r.stage2.iterations << ',' << r.transition_residual << ',' << std::sqrt(r.bound) << ','
                  << r.slack() << '\n';
          log << to_string(pair) << " level " << level << ": two-stage " << r.stage1.iterations << " + "
              << r.stage2.iterations << " iterations, transition residual " << r.transition_residual
              << " (bound " << std::sqrt(r.bound) << ")\n";
          solution = r.solution;
        } else {
          const SolveReport rep = solve_oseen(disc, pic, nu, enclosed, pre, cfg.eta, cfg.max_iterations());
          timings.add(tp.substr(1), "solve", seconds_since(t0));
          write_history_csv(hist, rep, false);
          ok = ok && rep.converged;
          summary << rep.iterations << ',' << rep.converged << ',' << rep.initial_residual() << ','
                  << rep.final_residual() << ",,,,,\n";
          log << to_string(pair) << " level " << level << ": " << pre << ' ' << rep.iterations << " iterations"
              << (rep.converged ? "" : " (not converged)") << ", residual " << rep.initial_residual() << " -> "
              << rep.final_residual() << '\n';
          solution = rep.solution;
        }
        if (cfg.fields) {
          write_fields(cfg.out, tp, disc, disc.dofs().expand(solution.head(sys.n_u())), solution.tail(sys.n_p()));
        }
      }
    }
  }
  return ok;
}

}  // namespace

Command parse_command(const std::string& s) {
  if (s == "stokes-cavity") return Command::stokes_cavity;
  if (s == "oseen-step") return Command::oseen_step;
  if (s == "oseen-cavity") return Command::oseen_cavity;
  if (s == "infsup-sweep") return Command::infsup_sweep;
  throw UsageError("unknown command '" + s + "'");
}

std::string to_string(Command c) {
  switch (c) {
    case Command::stokes_cavity: return "stokes-cavity";
    case Command::oseen_step: return "oseen-step";
    case Command::oseen_cavity: return "oseen-cavity";
    case Command::infsup_sweep: return "infsup-sweep";
  }
  return "?";
}

Problem RunConfig::problem() const {
  return command == Command::oseen_step ? Problem::step : Problem::cavity2d;
}

std::vector<std::string> RunConfig::preconditioners() const {
  if (!pres.empty()) return pres;
  return {is_oseen() ? "m1" : "p1"};
}

double RunConfig::viscosity() const {
  if (!is_oseen()) return 1.0;
  return nu > 0.0 ? nu : FlowProblem::default_nu(problem());
}

int RunConfig::max_iterations() const {
  if (maxit_set) return maxit;
  return is_oseen() ? 400 : 1000;
}

void RunConfig::validate() const {
  const auto ps = preconditioners();
  if (pairs.empty()) throw UsageError("--elements needs at least one element pair");
  if (is_oseen()) {
    for (const std::string& p : ps) {
      if (p != "m1" && p != "m2" && p != "m3" && p != "two-stage") {
        throw UsageError("--pre must be m1, m2, m3 or two-stage for " + to_string(command) + ", got '" + p + "'");
      }
      for (ElementPair pair : pairs) {
        if (p == "two-stage" && pressure_space(pair) != PressureSpace::enriched) {
          throw UsageError("two-stage needs an enriched element pair, got " + to_string(pair));
        }
      }
    }
  } else {
    if (ps.size() != 1 || (ps[0] != "p1" && ps[0] != "p2")) {
      throw UsageError("--pre must be a single p1 or p2 for " + to_string(command));
    }
  }
  if (!(rtol > 0.0 && rtol < 1.0)) throw UsageError("--rtol must lie in (0, 1)");
  if (!(eta > 0.0 && eta < 1.0)) throw UsageError("--eta must lie in (0, 1)");
  if (!(c >= 1.0)) throw UsageError("--c must be at least 1");
  if (nu < 0.0) throw UsageError("--nu must be positive");
  if (nu > 0.0 && !is_oseen()) throw UsageError("--nu only applies to Oseen commands");
  if (maxit_set && maxit < 0) throw UsageError("--maxit must be non-negative");
  if (picard_steps < 1) throw UsageError("--picard must be at least 1");
  for (int l : levels) {
    try {
      flow_problem(*this, pairs.front(), l).validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char ch) { return std::isspace(ch); }),
               item.end());
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> parse_levels(const std::string& s) {
  std::vector<int> out;
  auto to_int = [&](const std::string& t) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != t.size()) throw UsageError("bad grid level '" + t + "' in '" + s + "'");
    return v;
  };
  for (const std::string& item : split_list(s)) {
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(to_int(item));
      continue;
    }
    const int lo = to_int(item.substr(0, dash));
    const int hi = to_int(item.substr(dash + 1));
    if (hi < lo) throw UsageError("empty grid range '" + item + "'");
    for (int l = lo; l <= hi; ++l) out.push_back(l);
  }
  return out;
}

bool run(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out);
  Timings timings;
  const bool ok = cfg.is_oseen() ? run_oseen(cfg, log, timings) : run_stokes(cfg, log, timings);
  timings.write(cfg.out);
  return ok;
}

}  // namespace thfem::cli
