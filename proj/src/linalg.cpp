#include "thfem/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

namespace thfem {

namespace {

using CscMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

// Reciprocal condition estimate 1 / (||A||_1 ||A^-1||), the inverse norm
// from a few inverse power steps. Crude, but it separates well-posed
// factorizations from numerically singular ones.
template <class Solver>
double rcond_estimate(const CscMatrix& a, const Solver& solver) {
  const Eigen::Index n = a.rows();
  double anorm = 0.0;
  for (Eigen::Index j = 0; j < a.outerSize(); ++j) {
    double s = 0.0;
    for (CscMatrix::InnerIterator it(a, j); it; ++it) s += std::abs(it.value());
    anorm = std::max(anorm, s);
  }
  if (anorm == 0.0) return 0.0;
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = 1.0 + 0.5 * std::sin(1.7 * static_cast<double>(i));
  y.normalize();
  double inv = 0.0;
  for (int k = 0; k < 3; ++k) {
    Vector x = solver.solve(y);
    const double nx = x.norm();
    if (!std::isfinite(nx)) return 0.0;
    inv = std::max(inv, nx);
    if (nx == 0.0) return 0.0;
    y = x / nx;
  }
  return 1.0 / (anorm * inv * std::sqrt(static_cast<double>(n)));
}

}  // namespace

struct Factorization::Impl {
  int n = 0;
  bool symmetric = false;
  double rcond = 1.0;
  std::unique_ptr<Eigen::SimplicialLLT<CscMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>> cholesky;
  std::unique_ptr<Eigen::SparseLU<CscMatrix, Eigen::COLAMDOrdering<int>>> lu;
};

Factorization::Factorization() = default;
Factorization::~Factorization() = default;
Factorization::Factorization(Factorization&&) noexcept = default;
Factorization& Factorization::operator=(Factorization&&) noexcept = default;

Factorization::Factorization(const SparseMatrix& a, bool symmetric)
    : impl_(std::make_unique<Impl>()) {
  if (a.rows() != a.cols()) throw FactorizationError("factorize: matrix is not square");
  impl_->n = static_cast<int>(a.rows());
  impl_->symmetric = symmetric;
  if (impl_->n == 0) return;
  CscMatrix csc = a;
  csc.makeCompressed();

  if (symmetric) {
    auto chol = std::make_unique<Eigen::SimplicialLLT<CscMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>>(csc);
    if (chol->info() == Eigen::Success) {
      const double r = rcond_estimate(csc, *chol);
      if (r >= kSingularRcond) {
        impl_->rcond = r;
        impl_->cholesky = std::move(chol);
        return;
      }
    }
  }
  auto lu = std::make_unique<Eigen::SparseLU<CscMatrix, Eigen::COLAMDOrdering<int>>>();
  lu->analyzePattern(csc);
  lu->factorize(csc);
  const double r = lu->info() == Eigen::Success ? rcond_estimate(csc, *lu) : 0.0;
  if (lu->info() != Eigen::Success || !(r >= kSingularRcond)) {
    throw FactorizationError("matrix of order " + std::to_string(impl_->n) +
                             " is singular to working precision (rcond estimate = " +
                             std::to_string(r) + ")");
  }
  impl_->rcond = r;
  impl_->lu = std::move(lu);
}

Vector Factorization::solve(const Vector& b) const {
  if (b.size() != rows()) throw FactorizationError("solve: dimension mismatch");
  Vector x(b.size());
  if (b.size() == 0) return x;
  if (impl_->cholesky) {
    x = impl_->cholesky->solve(b);
  } else {
    x = impl_->lu->solve(b);
  }
  return x;
}

DenseMatrix Factorization::solve(const DenseMatrix& b) const {
  DenseMatrix x(b.rows(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) x.col(j) = solve(Vector(b.col(j)));
  return x;
}

int Factorization::rows() const { return impl_ ? impl_->n : 0; }
bool Factorization::symmetric() const { return impl_ && impl_->symmetric; }
std::string Factorization::method() const {
  if (!impl_) return "none";
  return impl_->cholesky ? "cholesky" : "lu";
}
double Factorization::rcond() const {
  return impl_ ? impl_->rcond : 0.0;
}

Factorization factorize(const SparseMatrix& a, bool symmetric) {
  return Factorization(a, symmetric);
}

void write_triplets(std::ostream& out, const SparseMatrix& a) {
  const auto old = out.precision(17);
  out << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
  for (int i = 0; i < a.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
  out.precision(old);
}

SparseMatrix read_triplets(std::istream& in) {
  long rows = 0, cols = 0, nnz = 0;
  if (!(in >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0) {
    throw std::runtime_error("read_triplets: malformed header");
  }
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(nnz));
  for (long k = 0; k < nnz; ++k) {
    long i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v)) throw std::runtime_error("read_triplets: truncated entry list");
    if (i < 0 || i >= rows || j < 0 || j >= cols) {
      throw std::runtime_error("read_triplets: index out of range");
    }
    t.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
  }
  SparseMatrix a(rows, cols);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

DenseMatrix orthogonal_complement(const DenseMatrix& c) {
  const Eigen::Index n = c.rows();
  const Eigen::Index k = c.cols();
  Eigen::HouseholderQR<DenseMatrix> qr(c);
  const DenseMatrix q = qr.householderQ() * DenseMatrix::Identity(n, n);
  return q.rightCols(n - k);
}

Vector dense_generalized_eig_on(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& z) {
  if (a.rows() > kDenseOracleLimit) {
    throw std::invalid_argument("dense_generalized_eig: dimension " + std::to_string(a.rows()) +
                                " exceeds the dense oracle limit");
  }
  const DenseMatrix ar = z.transpose() * a * z;
  const DenseMatrix br = z.transpose() * b * z;
  Eigen::GeneralizedSelfAdjointEigenSolver<DenseMatrix> ges(
      0.5 * (ar + ar.transpose()), 0.5 * (br + br.transpose()), Eigen::EigenvaluesOnly);
  if (ges.info() != Eigen::Success) {
    throw std::runtime_error("dense_generalized_eig: reduced pencil is not definite");
  }
  return ges.eigenvalues();
}

Vector dense_generalized_eig(const DenseMatrix& a, const DenseMatrix& b, double null_tol) {
  if (a.rows() > kDenseOracleLimit) {
    throw std::invalid_argument("dense_generalized_eig: dimension " + std::to_string(a.rows()) +
                                " exceeds the dense oracle limit");
  }
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eb(0.5 * (b + b.transpose()));
  const Vector& lb = eb.eigenvalues();
  const double cutoff = null_tol * std::max(lb.cwiseAbs().maxCoeff(), 0.0);
  Eigen::Index first = 0;
  while (first < lb.size() && lb(first) <= cutoff) ++first;
  const Eigen::Index r = lb.size() - first;
  // Whitened complement: q = Z diag(lb)^-1/2 y reduces (a, b) to a standard problem.
  const DenseMatrix w = eb.eigenvectors().rightCols(r) *
                        lb.tail(r).cwiseSqrt().cwiseInverse().asDiagonal();
  const DenseMatrix c = w.transpose() * a * w;
  Eigen::SelfAdjointEigenSolver<DenseMatrix> ec(0.5 * (c + c.transpose()), Eigen::EigenvaluesOnly);
  return ec.eigenvalues();
}

}  // namespace thfem
