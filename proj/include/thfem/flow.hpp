#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "thfem/assembly.hpp"
#include "thfem/infsup.hpp"
#include "thfem/krylov.hpp"
#include "thfem/precond.hpp"

namespace thfem {

enum class ElementPair { p2p1, p2p1star, q2q1, q2q1star };

ElementPair parse_element_pair(const std::string& s);
std::string to_string(ElementPair pair);
ElementKind element_kind(ElementPair pair);
PressureSpace pressure_space(ElementPair pair);

struct FlowProblem {
  Problem problem = Problem::cavity2d;
  double nu = 1.0 / 100.0;
  ElementPair pair = ElementPair::p2p1;
  int level = 4;

  /// Example defaults: nu = 1/50 on the step, 1/100 in the cavity.
  static double default_nu(Problem problem) { return problem == Problem::step ? 1.0 / 50.0 : 1.0 / 100.0; }
  bool enclosed() const { return problem == Problem::cavity2d; }
  void validate() const;
};

Problem parse_problem(const std::string& s);
std::string to_string(Problem problem);

Discretization make_discretization(const FlowProblem& fp);

/// Direct solve of a consistent saddle system whose pressure is fixed only up
/// to `pressure_nullspace` directions. Returns the pressure representative
/// orthogonal to them.
Vector direct_solve(const SaddleSystem& sys, const std::vector<Vector>& pressure_nullspace);

struct StokesSolution {
  SaddleSystem system;
  PressureMassBlocks mass;
  Vector velocity;  ///< full velocity, Dirichlet values included
  Vector pressure;
  SolveReport report;
  InfSupEstimate infsup;
  double lambda_max = 0.0;  ///< Chebyshev interval estimate for p2
};

/// Unit-viscosity Stokes by MINRES with preconditioner "p1" or "p2".
StokesSolution solve_stokes(const Discretization& disc, const std::string& pre, double rtol = 1e-8,
                            int maxit = 1000);

struct PicardResult {
  SaddleSystem system;      ///< the benchmark Oseen system
  Vector convecting;        ///< full velocity w it was assembled with
  Vector initial_guess;     ///< incoming iterate [u; p] on free dofs
  std::vector<double> b0_residuals;  ///< ||g0 - B0 u|| after each direct solve
};

/// `steps` Picard systems: the first is linearized about the Stokes solution,
/// each later one about the solution of its predecessor. The last system is
/// assembled but not solved.
PicardResult picard_oseen(const Discretization& disc, double nu, int steps = 5);

/// GMRES on a Picard system with "m1", "m2" or "m3" from the incoming iterate.
SolveReport solve_oseen(const Discretization& disc, const PicardResult& pic, double nu,
                        bool enclosed, const std::string& pre, double eta, int maxit,
                        const Vector& lsc_scaling = {});

DivergenceDiagnostics divergence_report(const Discretization& disc, const Vector& velocity);

/// Node CSV: x,y,ux,uy.
void write_velocity_csv(std::ostream& out, const DofMap& dofs, const Vector& velocity);
/// Vertex CSV: x,y,p.
void write_pressure_csv(std::ostream& out, const Mesh& mesh, const Vector& pressure);
/// Element CSV: element,cx,cy,p0,div_l2,div_mean (p0 empty for Taylor-Hood).
void write_element_csv(std::ostream& out, const Mesh& mesh, const Vector& pressure, int n_k,
                       const DivergenceDiagnostics& div);

}  // namespace thfem
