#pragma once

#include <optional>
#include <vector>

#include "thfem/assembly.hpp"
#include "thfem/krylov.hpp"

namespace thfem {

struct InfSupEstimate {
  std::vector<double> history;  ///< per MINRES iteration, NaN where undefined
  double final_estimate = 0.0;
  int stabilized_at = -1;       ///< first iteration j with |gamma2_j - gamma2_{j-1}| < 1e-4
};

/// EST-MINRES: inf-sup estimate from the first j Lanczos coefficients.
///
/// Builds the symmetric tridiagonal T_j (diagonal delta_1..delta_j,
/// off-diagonal gamma_2..gamma_j), takes its negative eigenvalue mu closest to
/// zero and returns mu (mu - 1). With the ideal block preconditioner the
/// negative spectrum ends at (1 - sqrt(1 + 4 gamma^2)) / 2, and inverting that
/// gives the formula. Empty when T_j has no negative eigenvalue yet.
std::optional<double> est_minres(const std::vector<double>& delta,
                                 const std::vector<double>& gamma, int j);

/// All estimates of a MINRES run.
InfSupEstimate estimate_history(const SolveReport& report);

/// Dense oracle: smallest eigenvalue of B A^{-1} B^T q = lambda M_Q q over the
/// complement of null(M_Q) and of the constant pressure.
///
/// Refuses problems with more than kDenseOracleLimit pressure dofs.
double oracle_infsup(const SaddleSystem& stokes, const PressureMassBlocks& mass);

/// CSV with columns iter, residual[, infsup_estimate].
void write_history_csv(std::ostream& out, const SolveReport& report, bool with_infsup);

}  // namespace thfem
