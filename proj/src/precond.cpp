#include "thfem/precond.hpp"

#include <cmath>
#include <stdexcept>

namespace thfem {

std::vector<Vector> pressure_nullspace(int n_k, int n_0, bool enclosed) {
  std::vector<Vector> c;
  const int n = n_k + n_0;
  if (n_0 > 0 && enclosed) {
    Vector a = Vector::Zero(n), b = Vector::Zero(n);
    a.head(n_k).setOnes();
    b.tail(n_0).setOnes();
    c.push_back(a);
    c.push_back(b);
  } else if (n_0 > 0) {
    Vector k(n);
    k.head(n_k).setOnes();
    k.tail(n_0).setConstant(-1.0);
    c.push_back(k);
  } else if (enclosed) {
    c.push_back(Vector::Ones(n));
  }
  return c;
}

// ---------------------------------------------------------------------------

NullspaceAugmentedSolver::NullspaceAugmentedSolver(const SparseMatrix& s,
                                                   std::vector<Vector> constraints)
    : n_(static_cast<int>(s.rows())), constraints_(std::move(constraints)) {
  const int m = static_cast<int>(constraints_.size());
  if (m == 0) {
    factor_ = std::make_shared<Factorization>(s, true);
    return;
  }
  // The bordered matrix [[S, C], [C^T, 0]] with C spanning null(S) has the
  // solution lambda = (C^T C)^{-1} C^T r, z = S^+ (r - C lambda) with C^T z = 0.
  // Rather than factor the border (C is dense), pin one entry per column of C,
  // which leaves an SPD matrix, and project afterwards.
  c_ = DenseMatrix(n_, m);
  for (int j = 0; j < m; ++j) {
    if (constraints_[static_cast<std::size_t>(j)].size() != n_) {
      throw std::invalid_argument("augmented solver: constraint size mismatch");
    }
    c_.col(j) = constraints_[static_cast<std::size_t>(j)];
  }
  ctc_ = (c_.transpose() * c_).ldlt();
  // Pivoted elimination on C picks rows where the pinned block of C is nonsingular.
  DenseMatrix work = c_;
  std::vector<bool> taken(static_cast<std::size_t>(n_), false);
  for (int j = 0; j < m; ++j) {
    Eigen::Index best = -1;
    double big = 0.0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (!taken[static_cast<std::size_t>(i)] && std::abs(work(i, j)) > big * (1.0 + 1e-12)) {
        big = std::abs(work(i, j));
        best = i;
      }
    }
    if (best < 0 || big == 0.0) throw std::invalid_argument("augmented solver: dependent constraints");
    taken[static_cast<std::size_t>(best)] = true;
    pinned_.push_back(static_cast<int>(best));
    for (int k = j + 1; k < m; ++k) work.col(k) -= (work(best, k) / work(best, j)) * work.col(j);
  }
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(s.nonZeros()) + pinned_.size());
  // Pinned rows get the diagonal scale of S so the estimate sees no artificial gap.
  const double scale = s.diagonal().cwiseAbs().maxCoeff();
  for (int i = 0; i < s.outerSize(); ++i) {
    if (taken[static_cast<std::size_t>(i)]) continue;
    for (SparseMatrix::InnerIterator it(s, i); it; ++it) {
      if (!taken[static_cast<std::size_t>(it.col())]) t.emplace_back(i, static_cast<int>(it.col()), it.value());
    }
  }
  for (int i : pinned_) t.emplace_back(i, i, scale > 0.0 ? scale : 1.0);
  SparseMatrix pinned(n_, n_);
  pinned.setFromTriplets(t.begin(), t.end());
  factor_ = std::make_shared<Factorization>(pinned, true);
}

Vector NullspaceAugmentedSolver::solve(const Vector& r, Vector* multipliers) const {
  if (constraints_.empty()) {
    if (multipliers) multipliers->resize(0);
    return factor_->solve(r);
  }
  const Vector lambda = ctc_.solve(c_.transpose() * r);
  if ((c_ * lambda).norm() > kConsistencyTol * std::max(r.norm(), 1e-300)) ++*inconsistent_;
  Vector rhs = r - c_ * lambda;
  for (int i : pinned_) rhs(i) = 0.0;
  Vector z = factor_->solve(rhs);
  z -= c_ * ctc_.solve(c_.transpose() * z);
  if (multipliers) *multipliers = lambda;
  return z;
}

// ---------------------------------------------------------------------------

ChebyshevSgs::ChebyshevSgs(SparseMatrix m, int steps, std::vector<Vector> nullspace)
    : m_(std::move(m)), steps_(steps) {
  if (steps_ < 1) throw std::invalid_argument("chebyshev: step count must be positive");
  m_.makeCompressed();
  diag_ = m_.diagonal();
  if ((diag_.array() <= 0.0).any()) throw std::invalid_argument("chebyshev: non-positive diagonal");
  // Orthonormalize the nullspace basis for the Euclidean projection.
  for (Vector v : nullspace) {
    for (const Vector& q : nullspace_) v -= q.dot(v) * q;
    const double nv = v.norm();
    if (nv > 0.0) nullspace_.push_back(v / nv);
  }
  estimate_lambda_max();
}

Vector ChebyshevSgs::project(Vector v) const {
  for (const Vector& q : nullspace_) v -= q.dot(v) * q;
  return v;
}

Vector ChebyshevSgs::sgs_solve(const Vector& r) const {
  const int n = static_cast<int>(m_.rows());
  const int* outer = m_.outerIndexPtr();
  const int* inner = m_.innerIndexPtr();
  const double* val = m_.valuePtr();
  Vector y(n);
  // (D + L) y = r
  for (int i = 0; i < n; ++i) {
    double s = r(i);
    for (int p = outer[i]; p < outer[i + 1]; ++p) {
      if (inner[p] < i) s -= val[p] * y(inner[p]);
    }
    y(i) = s / diag_(i);
  }
  y.array() *= diag_.array();
  // (D + U) x = D y
  Vector x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = y(i);
    for (int p = outer[i]; p < outer[i + 1]; ++p) {
      if (inner[p] > i) s -= val[p] * x(inner[p]);
    }
    x(i) = s / diag_(i);
  }
  return x;
}

Vector ChebyshevSgs::w_apply(const Vector& v) const {
  const int n = static_cast<int>(m_.rows());
  const int* outer = m_.outerIndexPtr();
  const int* inner = m_.innerIndexPtr();
  const double* val = m_.valuePtr();
  Vector y(n), z(n);
  for (int i = 0; i < n; ++i) {  // (D + U) v
    double s = 0.0;
    for (int p = outer[i]; p < outer[i + 1]; ++p) {
      if (inner[p] >= i) s += val[p] * v(inner[p]);
    }
    y(i) = s / diag_(i);
  }
  for (int i = 0; i < n; ++i) {  // (D + L) y
    double s = 0.0;
    for (int p = outer[i]; p < outer[i + 1]; ++p) {
      if (inner[p] <= i) s += val[p] * y(inner[p]);
    }
    z(i) = s;
  }
  return z;
}

void ChebyshevSgs::estimate_lambda_max() {
  const int n = static_cast<int>(m_.rows());
  // Nullspace of M is invariant under G = I - W^{-1} M with eigenvalue 1;
  // deflate it in the W inner product, where G is self-adjoint.
  std::vector<std::pair<Vector, Vector>> deflate;  // (k, W k / k^T W k)
  for (const Vector& k : nullspace_) {
    const Vector wk = w_apply(k);
    deflate.emplace_back(k, wk / k.dot(wk));
  }
  auto deflated = [&](Vector v) {
    for (const auto& [k, wk] : deflate) v -= wk.dot(v) * k;
    return v;
  };

  // SGS damps oscillatory error fast, so the dominant modes of G are smooth:
  // start from a smooth vector with a small deterministic perturbation.
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = 1.0 + 0.1 * std::sin(1.7 * static_cast<double>(i));
  v = deflated(v);

  double lambda = 0.0, previous = 0.0;
  power_converged_ = false;
  for (int step = 0; step < kPowerSteps; ++step) {
    Vector gv = v - sgs_solve(m_ * v);
    gv = deflated(gv);
    const double norm = std::sqrt(std::max(gv.dot(w_apply(gv)), 0.0));
    if (norm == 0.0) {  // G vanishes on the complement: SGS is exact
      lambda = 0.0;
      power_converged_ = true;
      break;
    }
    v = gv / norm;
    // Rayleigh quotient in the W inner product: v^T (W - M) v / v^T W v
    const double vwv = v.dot(w_apply(v));
    previous = lambda;
    lambda = 1.0 - v.dot(m_ * v) / vwv;
    if (step > 0 && std::abs(lambda - previous) <= 1e-3 * std::abs(lambda)) {
      power_converged_ = true;
    } else {
      power_converged_ = false;
    }
  }
  if (lambda < 1e-12) lambda = 0.0;
  lambda_max_ = power_converged_ ? std::min(lambda, kFallbackLambda) : kFallbackLambda;
}

Vector ChebyshevSgs::apply(const Vector& rhs) const {
  Vector r = project(rhs);
  if (lambda_max_ == 0.0) return project(sgs_solve(r));
  // Chebyshev acceleration on the interval [a, b] of W^{-1} M.
  const double a = 1.0 - lambda_max_;
  const double b = 1.0;
  const double theta = 0.5 * (b + a);
  const double delta = 0.5 * (b - a);
  const double sigma1 = theta / delta;
  double rho = 1.0 / sigma1;
  Vector x = Vector::Zero(r.size());
  Vector d = sgs_solve(r) / theta;
  for (int k = 1; k <= steps_; ++k) {
    x += d;
    if (k == steps_) break;
    r -= m_ * d;
    const double rho_next = 1.0 / (2.0 * sigma1 - rho);
    d = (rho_next * rho) * d + (2.0 * rho_next / delta) * sgs_solve(r);
    rho = rho_next;
  }
  return project(std::move(x));
}

// ---------------------------------------------------------------------------

namespace {

SparseMatrix weighted_product(const SparseMatrix& b, const Vector& weights) {
  // B diag(weights) B^T
  SparseMatrix bw = b * weights.asDiagonal();
  SparseMatrix bt = b.transpose();
  SparseMatrix out = bw * bt;
  out.prune(0.0);
  return out;
}

Vector mdiag_inverse(const Vector& mdiag) {
  if ((mdiag.array() <= 0.0).any()) throw std::invalid_argument("mass diagonal must be positive");
  return mdiag.cwiseInverse();
}

}  // namespace

PcdSchur::PcdSchur(const SparseMatrix& b, const PcdOperators& ops, std::vector<Vector> nullspace)
    : n_k_(static_cast<int>(ops.Q1.rows())), f1_(ops.F1), f0_(ops.F0), q0_(ops.Q0) {
  if (b.rows() != n_k_ + q0_.size()) throw std::invalid_argument("pcd: pressure dimension mismatch");
  q1_ = std::make_shared<Factorization>(ops.Q1, true);
  ap_ = NullspaceAugmentedSolver(weighted_product(b, mdiag_inverse(ops.Mdiag)), std::move(nullspace));
}

Vector PcdSchur::apply(const Vector& r) const {
  const Eigen::Index n_0 = q0_.size();
  Vector y(r.size());
  y.head(n_k_) = f1_ * q1_->solve(Vector(r.head(n_k_)));
  if (n_0 > 0) y.tail(n_0) = f0_ * r.tail(n_0).cwiseQuotient(q0_);
  return ap_.solve(y);
}

LscSchur::LscSchur(const SparseMatrix& b, const SparseMatrix& f, const Vector& mdiag,
                   const Vector& d, std::vector<Vector> nullspace)
    : b_(b), bt_(b.transpose()), f_(f) {
  mdiag_inv_ = mdiag_inverse(mdiag);
  if (d.size() == 0) {
    h_inv_ = mdiag_inv_;
    same_ = true;
  } else {
    if (d.size() != mdiag.size() || (d.array() <= 0.0).any()) {
      throw std::invalid_argument("lsc: scaling diagonal must be positive and match the velocity size");
    }
    h_inv_ = d.cwiseQuotient(mdiag);  // H = D^{-1/2} Mdiag D^{-1/2}
  }
  ap_m_ = NullspaceAugmentedSolver(weighted_product(b, mdiag_inv_), nullspace);
  if (!same_) ap_h_ = NullspaceAugmentedSolver(weighted_product(b, h_inv_), std::move(nullspace));
}

Vector LscSchur::apply(const Vector& r) const {
  const Vector y1 = same_ ? ap_m_.solve(r) : ap_h_.solve(r);
  const Vector t = f_ * h_inv_.cwiseProduct(bt_ * y1);
  const Vector y2 = b_ * mdiag_inv_.cwiseProduct(t);
  return ap_m_.solve(y2);
}

// ---------------------------------------------------------------------------

PreconditionerApply make_block_diagonal(std::shared_ptr<const Factorization> a,
                                        SchurInverse pressure, int n_u, std::string description) {
  auto fn = [a = std::move(a), pressure = std::move(pressure), n_u](const Vector& r) {
    Vector z(r.size());
    z.head(n_u) = a->solve(Vector(r.head(n_u)));
    z.tail(r.size() - n_u) = pressure(r.tail(r.size() - n_u));
    return z;
  };
  return {fn, std::move(description)};
}

PreconditionerApply make_block_triangular(std::shared_ptr<const Factorization> f,
                                          const SparseMatrix& b, SchurInverse schur,
                                          std::string description) {
  auto bt = std::make_shared<const SparseMatrix>(b.transpose());
  auto fn = [f = std::move(f), bt, schur = std::move(schur)](const Vector& r) {
    const Eigen::Index n_u = bt->rows();
    Vector z(r.size());
    const Vector zp = -schur(r.tail(r.size() - n_u));
    z.tail(r.size() - n_u) = zp;
    z.head(n_u) = f->solve(Vector(r.head(n_u) - *bt * zp));
    return z;
  };
  return {fn, std::move(description)};
}

namespace {

std::shared_ptr<const Factorization> velocity_factor(const SaddleSystem& sys,
                                                     std::shared_ptr<const Factorization> given) {
  if (given) return given;
  return std::make_shared<const Factorization>(sys.F, sys.symmetric);
}

std::vector<Vector> mass_nullspace(const SaddleSystem& sys) {
  return pressure_nullspace(sys.n_k(), sys.n_0(), false);
}

}  // namespace

PreconditionerApply make_stokes_p1(const SaddleSystem& sys, const PressureMassBlocks& mass,
                                   std::shared_ptr<const Factorization> a) {
  if (mass.MQ.rows() != sys.n_p()) throw std::invalid_argument("p1: pressure mass size mismatch");
  auto solver = std::make_shared<NullspaceAugmentedSolver>(mass.MQ, mass_nullspace(sys));
  return make_block_diagonal(velocity_factor(sys, std::move(a)),
                             [solver](const Vector& r) { return solver->solve(r); }, sys.n_u(),
                             sys.n_0() > 0 ? "p1 (exact A, augmented M_Q)" : "p1 (exact A, exact M_Q)");
}

PreconditionerApply make_stokes_p2(const SaddleSystem& sys, const PressureMassBlocks& mass,
                                   int cheb_steps, std::shared_ptr<const Factorization> a,
                                   double* lambda_max) {
  if (mass.MQ.rows() != sys.n_p()) throw std::invalid_argument("p2: pressure mass size mismatch");
  auto cheb = std::make_shared<ChebyshevSgs>(mass.MQ, cheb_steps, mass_nullspace(sys));
  if (lambda_max) *lambda_max = cheb->lambda_max();
  return make_block_diagonal(velocity_factor(sys, std::move(a)),
                             [cheb](const Vector& r) { return cheb->apply(r); }, sys.n_u(),
                             "p2 (exact A, " + std::to_string(cheb_steps) + " Chebyshev-SGS steps)");
}

PreconditionerApply make_oseen_m1(const SaddleSystem& sys, const PressureMassBlocks& mass,
                                  double nu, std::shared_ptr<const Factorization> f) {
  if (!(nu > 0.0)) throw std::invalid_argument("m1: viscosity must be positive");
  auto solver = std::make_shared<NullspaceAugmentedSolver>(mass.MQ, mass_nullspace(sys));
  return make_block_triangular(velocity_factor(sys, std::move(f)), sys.B(),
                               [solver, nu](const Vector& r) { return Vector(nu * solver->solve(r)); },
                               "m1 (scaled pressure mass)");
}

PreconditionerApply make_oseen_m2(const SaddleSystem& sys, const PcdOperators& pcd, bool enclosed,
                                  std::shared_ptr<const Factorization> f) {
  const SparseMatrix b = sys.B();
  auto schur = std::make_shared<PcdSchur>(b, pcd, pressure_nullspace(sys.n_k(), sys.n_0(), enclosed));
  return make_block_triangular(velocity_factor(sys, std::move(f)), b,
                               [schur](const Vector& r) { return schur->apply(r); },
                               sys.n_0() > 0 ? "m2 (two-field PCD)" : "pcd (single-field)");
}

PreconditionerApply make_oseen_m3(const SaddleSystem& sys, const Vector& mdiag, bool enclosed,
                                  const Vector& d, std::shared_ptr<const Factorization> f) {
  const SparseMatrix b = sys.B();
  auto schur = std::make_shared<LscSchur>(b, sys.F, mdiag, d,
                                          pressure_nullspace(sys.n_k(), sys.n_0(), enclosed));
  return make_block_triangular(velocity_factor(sys, std::move(f)), b,
                               [schur](const Vector& r) { return schur->apply(r); }, "m3 (LSC)");
}

// ---------------------------------------------------------------------------

std::vector<std::pair<int, double>> TwoStageResult::history() const {
  std::vector<std::pair<int, double>> h;
  for (double r : stage1.residual_history) h.emplace_back(1, r);
  for (double r : stage2.residual_history) h.emplace_back(2, r);
  return h;
}

TwoStageResult two_stage_solve(const SaddleSystem& sys, const PcdOperators& pcd,
                               const PressureMassBlocks& mass, double nu, bool enclosed,
                               const TwoStageOptions& opt) {
  if (sys.n_0() == 0) throw std::invalid_argument("two-stage: requires the enriched pressure space");
  if (!(opt.eta > 0.0) || !(opt.c >= 1.0)) throw std::invalid_argument("two-stage: need eta > 0, c >= 1");
  auto f = std::make_shared<const Factorization>(sys.F, sys.symmetric);
  TwoStageResult out;

  // Step I: Taylor-Hood system with single-field PCD.
  const SaddleSystem red = sys.reduced();
  PcdOperators single = pcd;
  single.Q0.resize(0);
  single.F0.resize(0, 0);
  const PreconditionerApply pcd1 = make_oseen_m2(red, single, enclosed, f);
  const Vector b_red = red.rhs();
  out.reduced_rhs_norm = b_red.norm();
  GmresOptions o1;
  o1.rtol = opt.c * opt.eta;
  o1.maxit = opt.maxit;
  out.stage1 = gmres([&](const Vector& x) { return red.apply(x); }, b_red, pcd1, o1);
  out.stage1.preconditioner = pcd1.description;
  if (!out.stage1.converged) {
    throw SolverError("two-stage: step I did not reach relative residual " +
                      std::to_string(o1.rtol) + " within " + std::to_string(opt.maxit) +
                      " iterations");
  }

  // Transition: x* = [u1*; q1*; 0].
  const int n_u = sys.n_u(), n_k = sys.n_k(), n_0 = sys.n_0();
  Vector x0 = Vector::Zero(sys.size());
  x0.head(n_u + n_k) = out.stage1.solution;
  const Vector b = sys.rhs();
  out.rhs_norm = b.norm();
  out.transition_residual = (b - sys.apply(x0)).norm();
  const Vector u1 = out.stage1.solution.head(n_u);
  out.b0_term = (sys.g.tail(n_0) - sys.B0 * u1).norm();
  out.bound = opt.c * opt.c * opt.eta * opt.eta * out.reduced_rhs_norm * out.reduced_rhs_norm +
              out.b0_term * out.b0_term;

  // Step II: full system with M1.
  const PreconditionerApply m1 = make_oseen_m1(sys, mass, nu, f);
  GmresOptions o2;
  o2.x0 = x0;
  o2.maxit = opt.maxit;
  if (opt.absolute_step2) {
    o2.atol = opt.eta * out.rhs_norm;
  } else {
    o2.rtol = opt.eta;
  }
  out.stage2 = gmres([&](const Vector& x) { return sys.apply(x); }, b, m1, o2);
  out.stage2.preconditioner = m1.description;
  out.solution = out.stage2.solution;
  return out;
}

}  // namespace thfem
