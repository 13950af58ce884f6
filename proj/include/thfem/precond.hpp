#pragma once

#include <atomic>
#include <memory>
#include <vector>

#include <Eigen/Cholesky>

#include "thfem/assembly.hpp"
#include "thfem/krylov.hpp"
#include "thfem/linalg.hpp"

namespace thfem {

/// Constraint columns spanning the pressure nullspace of B^T.
///
/// Enriched spaces contribute k; enclosed flow adds the constant vertex
/// pressure. For an enriched enclosed problem the pair [1;0], [0;1] is used,
/// which spans the same plane.
std::vector<Vector> pressure_nullspace(int n_k, int n_0, bool enclosed);

/// Solves the bordered system [[S, C], [C^T, 0]] [z; lambda] = [r; 0] for
/// symmetric positive semidefinite S whose nullspace is spanned by C.
///
/// With no constraint columns this is a plain factorization of S.
class NullspaceAugmentedSolver {
 public:
  NullspaceAugmentedSolver() = default;
  NullspaceAugmentedSolver(const SparseMatrix& s, std::vector<Vector> constraints);

  Vector solve(const Vector& r, Vector* multipliers = nullptr) const;
  int size() const { return n_; }
  const std::vector<Vector>& constraints() const { return constraints_; }
  /// Number of solves whose right-hand side had a component along C above tolerance.
  int inconsistent_solves() const { return inconsistent_->load(); }

  static constexpr double kConsistencyTol = 1e-8;

 private:
  int n_ = 0;
  std::vector<Vector> constraints_;
  DenseMatrix c_;
  Eigen::LDLT<DenseMatrix> ctc_;
  std::vector<int> pinned_;
  std::shared_ptr<Factorization> factor_;
  std::shared_ptr<std::atomic<int>> inconsistent_ = std::make_shared<std::atomic<int>>(0);
};

/// Chebyshev semi-iteration accelerating symmetric Gauss-Seidel on M z = r.
///
/// W = (D + L) D^{-1} (D + U) is the SGS splitting; the eigenvalues of
/// W^{-1} M lie in [1 - lambda_max, 1] where lambda_max is the spectral radius
/// of I - W^{-1} M on the complement of the nullspace. The operator is a fixed
/// polynomial in W^{-1} M times W^{-1}: symmetric and positive semidefinite.
class ChebyshevSgs {
 public:
  static constexpr int kPowerSteps = 30;
  static constexpr double kFallbackLambda = 0.999;

  ChebyshevSgs() = default;
  ChebyshevSgs(SparseMatrix m, int steps = 20, std::vector<Vector> nullspace = {});

  Vector apply(const Vector& r) const;
  /// One exact SGS solve W z = r.
  Vector sgs_solve(const Vector& r) const;
  Vector w_apply(const Vector& v) const;

  double lambda_max() const { return lambda_max_; }
  bool power_converged() const { return power_converged_; }
  int steps() const { return steps_; }

 private:
  void estimate_lambda_max();
  Vector project(Vector v) const;

  SparseMatrix m_;
  Vector diag_;
  int steps_ = 20;
  std::vector<Vector> nullspace_;  // orthonormalized
  double lambda_max_ = 0.0;
  bool power_converged_ = false;
};

/// Approximates the pressure Schur complement inverse: apply(r) ~ S^{-1} r.
using SchurInverse = std::function<Vector(const Vector&)>;

/// Two-field PCD: S^{-1} ~ A_p^{-1} blockdiag(F1, F0) blockdiag(Q1^{-1}, Q0^{-1}),
/// A_p = B Mdiag^{-1} B^T. Also covers the single-field Taylor-Hood case (empty Q0).
class PcdSchur {
 public:
  PcdSchur(const SparseMatrix& b, const PcdOperators& ops, std::vector<Vector> nullspace);
  Vector apply(const Vector& r) const;
  const NullspaceAugmentedSolver& laplacian_solver() const { return ap_; }

 private:
  int n_k_ = 0;
  SparseMatrix f1_, f0_;
  Vector q0_;
  std::shared_ptr<Factorization> q1_;
  NullspaceAugmentedSolver ap_;
};

/// Least-squares commutator:
/// S^{-1} ~ (B Mdiag^{-1} B^T)^{-1} (B Mdiag^{-1} F H^{-1} B^T) (B H^{-1} B^T)^{-1},
/// H = D^{-1/2} Mdiag D^{-1/2}.
class LscSchur {
 public:
  LscSchur(const SparseMatrix& b, const SparseMatrix& f, const Vector& mdiag, const Vector& d,
           std::vector<Vector> nullspace);
  Vector apply(const Vector& r) const;

 private:
  SparseMatrix b_, bt_, f_;
  Vector mdiag_inv_, h_inv_;
  NullspaceAugmentedSolver ap_m_;
  NullspaceAugmentedSolver ap_h_;
  bool same_ = false;
};

/// Block-diagonal Stokes preconditioner blockdiag(A, M_S) with an exact velocity solve.
PreconditionerApply make_block_diagonal(std::shared_ptr<const Factorization> a,
                                        SchurInverse pressure, int n_u, std::string description);

/// Block upper-triangular [[F, B^T], [0, -M_S]] applied as
/// z_p = -M_S^{-1} r_p, z_u = F^{-1} (r_u - B^T z_p).
PreconditionerApply make_block_triangular(std::shared_ptr<const Factorization> f,
                                          const SparseMatrix& b, SchurInverse schur,
                                          std::string description);

/// P1: exact A, exact (augmented for the frame) pressure mass solve.
PreconditionerApply make_stokes_p1(const SaddleSystem& sys, const PressureMassBlocks& mass,
                                   std::shared_ptr<const Factorization> a = nullptr);
/// P2: exact A, Chebyshev-SGS pressure mass approximation.
PreconditionerApply make_stokes_p2(const SaddleSystem& sys, const PressureMassBlocks& mass,
                                   int cheb_steps = 20,
                                   std::shared_ptr<const Factorization> a = nullptr,
                                   double* lambda_max = nullptr);

/// M1: scaled pressure mass Schur approximation (1/nu) M_Q.
PreconditionerApply make_oseen_m1(const SaddleSystem& sys, const PressureMassBlocks& mass,
                                  double nu, std::shared_ptr<const Factorization> f = nullptr);
/// M2: two-field PCD.
PreconditionerApply make_oseen_m2(const SaddleSystem& sys, const PcdOperators& pcd, bool enclosed,
                                  std::shared_ptr<const Factorization> f = nullptr);
/// M3: LSC with scaling diagonal d (empty means ones).
PreconditionerApply make_oseen_m3(const SaddleSystem& sys, const Vector& mdiag, bool enclosed,
                                  const Vector& d = {},
                                  std::shared_ptr<const Factorization> f = nullptr);

struct TwoStageOptions {
  double eta = 1e-4;
  double c = 10.0;
  int maxit = 400;
  /// Step II target: absolute eta * ||b|| (true) or eta * ||r(x*)|| (false).
  bool absolute_step2 = true;
};

struct TwoStageResult {
  Vector solution;
  SolveReport stage1;
  SolveReport stage2;
  double rhs_norm = 0.0;          ///< ||b|| of the full system
  double reduced_rhs_norm = 0.0;  ///< ||f|| of the reduced system (zero-guess residual)
  double transition_residual = 0.0;
  double b0_term = 0.0;           ///< ||g0 - B0 u1*||
  double bound = 0.0;             ///< c^2 eta^2 ||f||^2 + ||g0 - B0 u1*||^2
  double slack() const { return bound - transition_residual * transition_residual; }
  bool bound_holds() const { return slack() >= 0.0; }
  /// Concatenated residual history with the stage of every entry.
  std::vector<std::pair<int, double>> history() const;
};

/// Step I: GMRES on the Taylor-Hood part with single-field PCD, zero guess,
/// relative residual <= c eta. Step II: GMRES on the full system with M1
/// starting from [u1*; q1*; 0].
TwoStageResult two_stage_solve(const SaddleSystem& sys, const PcdOperators& pcd,
                               const PressureMassBlocks& mass, double nu, bool enclosed,
                               const TwoStageOptions& opt = {});

}  // namespace thfem
