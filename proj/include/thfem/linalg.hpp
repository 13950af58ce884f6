#pragma once

#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace thfem {

/// Row-compressed sparse storage used throughout.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using Triplet = Eigen::Triplet<double, int>;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sparse direct factorization behind a solve() interface.
///
/// Symmetric input is first tried with a sparse Cholesky; if that fails
/// (indefinite or semidefinite matrix) an unsymmetric LU with partial pivoting
/// is used. A reciprocal condition estimate below `kSingularRcond` is reported
/// as singular.
class Factorization {
 public:
  static constexpr double kSingularRcond = 1e-13;

  Factorization();
  Factorization(const SparseMatrix& a, bool symmetric);
  ~Factorization();
  Factorization(Factorization&&) noexcept;
  Factorization& operator=(Factorization&&) noexcept;

  Vector solve(const Vector& b) const;
  DenseMatrix solve(const DenseMatrix& b) const;

  int rows() const;
  bool symmetric() const;
  /// "cholesky" or "lu".
  std::string method() const;
  double rcond() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Factorizes `a`; throws FactorizationError when `a` is singular to working precision.
Factorization factorize(const SparseMatrix& a, bool symmetric);

/// Writes "rows cols nnz" then "i j value" lines (0-based, round-trip precision).
void write_triplets(std::ostream& out, const SparseMatrix& a);
SparseMatrix read_triplets(std::istream& in);

/// Eigenvalues of the symmetric pencil (a, b) with b positive semidefinite.
///
/// The nullspace of b (eigenvalues below `null_tol * max eig(b)`) is deflated
/// first, then the pencil is reduced to a standard symmetric problem on the
/// complement. Returned in ascending order.
Vector dense_generalized_eig(const DenseMatrix& a, const DenseMatrix& b, double null_tol = 1e-10);

/// As above, with an explicit orthonormal basis `z` of the complement of null(b).
Vector dense_generalized_eig_on(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& z);

/// Refuses dense oracle problems above this dimension.
inline constexpr int kDenseOracleLimit = 3500;

/// Orthonormal basis for the orthogonal complement of the columns of `c`.
DenseMatrix orthogonal_complement(const DenseMatrix& c);

}  // namespace thfem
