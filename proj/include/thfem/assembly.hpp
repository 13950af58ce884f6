#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "thfem/linalg.hpp"
#include "thfem/mesh.hpp"

namespace thfem {

/// Taylor-Hood pressure, or Taylor-Hood plus piecewise constants (a frame).
enum class PressureSpace { taylor_hood, enriched };

enum class Problem { cavity2d, step };

/// Prescribed boundary velocity (u_x, u_y) as a function of position.
using DirichletProfile = std::function<Eigen::Vector2d(const Point2&)>;

/// Lid profile u_x = 1 - x^4 for the cavity; parabolic inflow u_x = 4y(1-y)
/// for the step. Walls are no-slip.
DirichletProfile boundary_profiles(Problem problem);
DirichletProfile boundary_profiles(const std::string& problem_id);

/// Velocity and pressure numbering.
///
/// Velocity nodes (P2/Q2) are numbered lexicographically by (y, x);
/// velocity dofs are component-blocked: all x-components, then all
/// y-components. Pressure dofs are the continuous vertex pressures followed,
/// for the enriched space, by one constant per element.
struct DofMap {
  ElementKind kind = ElementKind::triangle;
  PressureSpace space = PressureSpace::taylor_hood;
  int n_nodes = 0;
  int n_u = 0;  ///< all velocity dofs, Dirichlet included
  int n_k = 0;
  int n_0 = 0;
  int n_p = 0;
  int nodes_per_element = 0;
  std::vector<Point2> nodes;
  std::vector<int> element_nodes;  ///< n_el x nodes_per_element
  std::vector<bool> dirichlet_node;
  std::vector<int> free_dofs;      ///< velocity dofs carried by the linear system
  std::vector<int> dof_to_free;    ///< -1 for Dirichlet dofs
  std::vector<std::pair<int, double>> dirichlet_dofs;

  int n_free() const { return static_cast<int>(free_dofs.size()); }
  const int* element(int e) const {
    return element_nodes.data() + static_cast<std::size_t>(e * nodes_per_element);
  }
  /// Full velocity vector from free values plus the prescribed boundary values.
  Vector expand(const Vector& u_free) const;
  Vector restrict_to_free(const Vector& u_full) const;
};

DofMap build_dof_map(const Mesh& mesh, PressureSpace space, const DirichletProfile& profile);

/// Pressure nullspace vector k = [1_{n_k}; -1_{n_0}] of the enriched frame.
Vector frame_null_vector(const DofMap& dofs);
/// Constant vertex pressure [1_{n_k}; 0_{n_0}].
Vector hydrostatic_vector(const DofMap& dofs);

/// Saddle point system [[F, B^T], [B, 0]] [u; p] = [f; g] on free velocity dofs.
///
/// B = [B1; B0] with b(u, p) = -int p div u. B0 is empty for Taylor-Hood.
struct SaddleSystem {
  SparseMatrix F;
  SparseMatrix B1;
  SparseMatrix B0;
  Vector f;
  Vector g;
  bool symmetric = true;

  int n_u() const { return static_cast<int>(F.rows()); }
  int n_k() const { return static_cast<int>(B1.rows()); }
  int n_0() const { return static_cast<int>(B0.rows()); }
  int n_p() const { return n_k() + n_0(); }
  int size() const { return n_u() + n_p(); }

  SparseMatrix B() const;
  /// Assembled block matrix.
  SparseMatrix matrix() const;
  Vector rhs() const;
  Vector apply(const Vector& x) const;
  Vector residual(const Vector& x) const { return rhs() - apply(x); }
  /// Drops the B0 rows (and g0): the Taylor-Hood system on the same mesh.
  SaddleSystem reduced() const;
};

/// Two-field pressure mass matrix M_Q = [[Qk, R^T], [R, Q0]].
struct PressureMassBlocks {
  SparseMatrix Qk;
  SparseMatrix R;  ///< n_0 x n_k
  Vector Q0;       ///< element areas
  SparseMatrix MQ;
};

/// Pressure convection-diffusion operators.
struct PcdOperators {
  SparseMatrix Q1;  ///< consistent continuous-pressure mass
  SparseMatrix F1;  ///< nu * Laplacian + convection on the continuous pressure
  Vector Q0;        ///< element areas (empty for Taylor-Hood)
  SparseMatrix F0;  ///< face-jump convection-diffusion on piecewise constants
  Vector Mdiag;     ///< diagonal of the velocity mass matrix, free dofs
};

/// Per-element divergence diagnostics of a velocity field.
struct DivergenceDiagnostics {
  Vector l2_norm;   ///< ||div u||_{L2(T)}
  Vector mean;      ///< int_T div u
  double global_l2 = 0.0;
};

/// Finite element discretization of one mesh and pressure space.
///
/// Holds the velocity-independent matrices so repeated Oseen assemblies
/// only recompute convection terms.
class Discretization {
 public:
  Discretization(Mesh mesh, PressureSpace space, const DirichletProfile& profile);
  Discretization(Mesh mesh, PressureSpace space);

  const Mesh& mesh() const { return mesh_; }
  const DofMap& dofs() const { return dofs_; }
  PressureSpace space() const { return dofs_.space; }

  /// Stokes system with unit viscosity.
  SaddleSystem stokes() const;
  /// Oseen system F = nu A + N(w) for a full velocity vector w.
  SaddleSystem oseen(const Vector& w, double nu) const;

  PressureMassBlocks pressure_mass() const;
  PcdOperators pcd(const Vector& w, double nu) const;
  DivergenceDiagnostics divergence(const Vector& u) const;

  /// Scalar velocity Laplacian / mass / convection on all velocity nodes.
  const SparseMatrix& scalar_laplacian() const { return laplacian_; }
  const SparseMatrix& scalar_mass() const { return mass_; }
  SparseMatrix scalar_convection(const Vector& w) const;

  /// Full-dof divergence matrix B (n_p x n_u), Dirichlet columns included.
  const SparseMatrix& divergence_full() const { return b_full_; }

  /// Normal flux of the velocity w through each interior face (from elem_a to elem_b).
  Vector face_fluxes(const Vector& w) const;
  /// Outward normal flux through each boundary edge.
  Vector boundary_fluxes(const Vector& w) const;

 private:
  template <class Element>
  void assemble_static();
  template <class Element>
  SparseMatrix convection_impl(const Vector& w, bool pressure_space) const;
  template <class Element>
  DivergenceDiagnostics divergence_impl(const Vector& u) const;
  template <class Element>
  Eigen::Vector2d velocity_at(int e, int local_edge, double t, const Vector& w) const;

  SaddleSystem finish(const SparseMatrix& full_velocity_block, bool symmetric) const;
  SparseMatrix vector_block(const SparseMatrix& scalar) const;

  Mesh mesh_;
  DofMap dofs_;
  SparseMatrix laplacian_;
  SparseMatrix mass_;
  SparseMatrix b_full_;
  SparseMatrix qk_;
  SparseMatrix r_;
  Vector q0_;
  SparseMatrix pressure_laplacian_;
  SparseMatrix free_selector_;  ///< n_free x n_u
  Vector u_dirichlet_;          ///< full vector of prescribed values
};

/// Convenience wrappers over Discretization with the domain's default boundary data.
std::pair<SaddleSystem, DofMap> assemble_stokes(const Mesh& mesh, PressureSpace space);
SaddleSystem assemble_oseen(const Mesh& mesh, PressureSpace space, const Vector& w, double nu);
PressureMassBlocks assemble_pressure_mass(const Mesh& mesh, PressureSpace space);
PcdOperators assemble_pcd(const Mesh& mesh, PressureSpace space, const Vector& w, double nu);

Problem problem_for(Domain domain);

}  // namespace thfem
