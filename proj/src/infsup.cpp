#include "thfem/infsup.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace thfem {

std::optional<double> est_minres(const std::vector<double>& delta,
                                 const std::vector<double>& gamma, int j) {
  if (j < 1 || static_cast<std::size_t>(j) > delta.size() ||
      static_cast<std::size_t>(j) > gamma.size()) {
    return std::nullopt;
  }
  Vector d(j), e(std::max(j - 1, 0));
  for (int i = 0; i < j; ++i) d(i) = delta[static_cast<std::size_t>(i)];
  for (int i = 0; i + 1 < j; ++i) e(i) = gamma[static_cast<std::size_t>(i + 1)];
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es;
  if (j == 1) {
    if (!(d(0) < 0.0)) return std::nullopt;
    return d(0) * (d(0) - 1.0);
  }
  es.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return std::nullopt;
  double mu = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < j; ++i) {
    const double v = es.eigenvalues()(i);
    if (v < 0.0 && v > mu) mu = v;
  }
  if (!std::isfinite(mu)) return std::nullopt;
  return mu * (mu - 1.0);
}

InfSupEstimate estimate_history(const SolveReport& report) {
  InfSupEstimate out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double last = nan;
  for (int j = 1; j <= report.iterations; ++j) {
    const auto est = est_minres(report.lanczos_delta, report.lanczos_gamma, j);
    const double v = est.value_or(nan);
    out.history.push_back(v);
    if (est) {
      if (out.stabilized_at < 0 && std::isfinite(last) && std::abs(v - last) < 1e-4) {
        out.stabilized_at = j;
      }
      last = v;
      out.final_estimate = v;
    }
  }
  return out;
}

double oracle_infsup(const SaddleSystem& stokes, const PressureMassBlocks& mass) {
  const int n_p = stokes.n_p();
  if (n_p > kDenseOracleLimit) {
    throw std::invalid_argument("oracle_infsup: " + std::to_string(n_p) +
                                " pressure dofs exceed the dense oracle limit");
  }
  const Factorization a(stokes.F, true);
  const SparseMatrix b = stokes.B();
  const DenseMatrix bt = DenseMatrix(b.transpose());
  const DenseMatrix ainv_bt = a.solve(bt);
  DenseMatrix s = DenseMatrix(b) * ainv_bt;
  s = (0.5 * (s + s.transpose())).eval();
  const DenseMatrix mq = DenseMatrix(mass.MQ);

  // Whiten on the range of M_Q (drops k for the frame), then remove the
  // M_Q-normalized constant pressure which sits in the kernel of B^T.
  Eigen::SelfAdjointEigenSolver<DenseMatrix> em(0.5 * (mq + mq.transpose()));
  const Vector& lm = em.eigenvalues();
  const double cutoff = 1e-10 * lm.cwiseAbs().maxCoeff();
  Eigen::Index first = 0;
  while (first < lm.size() && lm(first) <= cutoff) ++first;
  const Eigen::Index r = lm.size() - first;
  const DenseMatrix w = em.eigenvectors().rightCols(r) * lm.tail(r).cwiseSqrt().cwiseInverse().asDiagonal();
  DenseMatrix c = w.transpose() * s * w;
  c = (0.5 * (c + c.transpose())).eval();

  // In whitened coordinates q = W y, the constant pressure h maps to y_h = W^+ h.
  Vector h = Vector::Zero(n_p);
  h.head(stokes.n_k()).setOnes();
  const Vector yh = (em.eigenvectors().rightCols(r).transpose() * h).cwiseProduct(lm.tail(r).cwiseSqrt());
  if ((b.transpose() * h).norm() <= 1e-10 * std::max(1.0, DenseMatrix(b).norm())) {
    const Vector u = yh.normalized();
    const DenseMatrix z = orthogonal_complement(u);
    DenseMatrix cz = z.transpose() * c * z;
    cz = (0.5 * (cz + cz.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<DenseMatrix> ec(cz, Eigen::EigenvaluesOnly);
    return ec.eigenvalues()(0);
  }
  Eigen::SelfAdjointEigenSolver<DenseMatrix> ec(c, Eigen::EigenvaluesOnly);
  return ec.eigenvalues()(0);
}

void write_history_csv(std::ostream& out, const SolveReport& report, bool with_infsup) {
  const auto old = out.precision(12);
  out << (with_infsup ? "iter,residual,infsup_estimate\n" : "iter,residual\n");
  for (std::size_t j = 0; j < report.residual_history.size(); ++j) {
    out << j << ',' << report.residual_history[j];
    if (with_infsup) {
      out << ',';
      if (j >= 1 && j - 1 < report.infsup_history.size() && std::isfinite(report.infsup_history[j - 1])) {
        out << report.infsup_history[j - 1];
      }
    }
    out << '\n';
  }
  out.precision(old);
}

}  // namespace thfem
