#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "thfem/linalg.hpp"

namespace thfem {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when <z, v> < 0 inside MINRES: the preconditioner is not positive semidefinite.
class IndefinitePreconditionerError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Convergence record of one Krylov solve.
///
/// `residual_history[0]` is the initial residual; entry j the residual after
/// iteration j. For MINRES the norm is the preconditioned one, for GMRES the
/// Euclidean norm of b - A x.
struct SolveReport {
  int iterations = 0;
  std::vector<double> residual_history;
  std::vector<double> lanczos_delta;  ///< delta_1, delta_2, ...
  std::vector<double> lanczos_gamma;  ///< gamma_1, gamma_2, ...
  std::vector<double> infsup_history; ///< NaN where no estimate exists
  Vector solution;
  bool converged = false;
  double wall_time = 0.0;
  std::string preconditioner;
  std::vector<std::string> warnings;

  double initial_residual() const {
    return residual_history.empty() ? 0.0 : residual_history.front();
  }
  double final_residual() const {
    return residual_history.empty() ? 0.0 : residual_history.back();
  }
};

/// A preconditioner: z = apply(r) solves or approximates P z = r.
struct PreconditionerApply {
  std::function<Vector(const Vector&)> apply;
  std::string description;

  Vector operator()(const Vector& r) const { return apply(r); }
};

inline PreconditionerApply identity_preconditioner() {
  return {[](const Vector& r) { return r; }, "identity"};
}

struct MinresOptions {
  double rtol = 1e-8;
  int maxit = 1000;
  Vector x0;  ///< empty means zero
  /// Called after every iteration with (j, x_j).
  std::function<void(int, const Vector&)> on_iterate;
};

/// Preconditioned MINRES for symmetric (possibly singular, consistent) systems.
///
/// A line-for-line transcription of the classical three-term Lanczos
/// recurrence with Givens updates; the stopping test compares the recurrence
/// residual |eta| (the P^{-1}-norm of the residual) with rtol * gamma_1.
template <class Operator, class Preconditioner>
SolveReport minres(const Operator& a, const Vector& b, const Preconditioner& p,
                   const MinresOptions& opt = {}) {
  const auto start = std::chrono::steady_clock::now();
  const Eigen::Index n = b.size();
  SolveReport rep;
  Vector x = opt.x0.size() == n ? opt.x0 : Vector::Zero(n);

  auto inner_sqrt = [](const Vector& z, const Vector& v) {
    const double zv = z.dot(v);
    if (zv < 0.0) {
      if (-zv > 1e-13 * z.norm() * v.norm()) {
        throw IndefinitePreconditionerError("minres: <z, v> = " + std::to_string(zv) +
                                            " < 0, preconditioner is indefinite");
      }
      return 0.0;
    }
    return std::sqrt(zv);
  };

  // v(0) = 0, w(0) = w(1) = 0, gamma_0 = 0
  Vector v_prev = Vector::Zero(n);
  Vector w_prev = Vector::Zero(n);
  Vector w_cur = Vector::Zero(n);
  double gamma_prev = 0.0;

  // v(1) = b - A x(0); solve P z(1) = v(1); gamma_1 = sqrt(<z(1), v(1)>)
  Vector v = b - a(x);
  Vector z = p(v);
  double gamma = inner_sqrt(z, v);
  rep.lanczos_gamma.push_back(gamma);

  // eta = gamma_1, s_0 = s_1 = 0, c_0 = c_1 = 1
  double eta = gamma;
  double s_prev = 0.0, s = 0.0, c_prev = 1.0, c = 1.0;
  const double target = opt.rtol * gamma;
  rep.residual_history.push_back(std::abs(eta));

  if (gamma == 0.0) {
    rep.converged = true;
    rep.solution = x;
    return rep;
  }

  for (int j = 1; j <= opt.maxit; ++j) {
    // z(j) = z(j) / gamma_j
    z /= gamma;
    // delta_j = <A z(j), z(j)>
    const Vector az = a(z);
    const double delta = az.dot(z);
    rep.lanczos_delta.push_back(delta);
    // v(j+1) = A z(j) - (delta_j / gamma_j) v(j) - (gamma_j / gamma_{j-1}) v(j-1)
    Vector v_next = az - (delta / gamma) * v;
    if (gamma_prev != 0.0) v_next -= (gamma / gamma_prev) * v_prev;
    // solve P z(j+1) = v(j+1); gamma_{j+1} = sqrt(<z(j+1), v(j+1)>)
    Vector z_next = p(v_next);
    const double gamma_next = inner_sqrt(z_next, v_next);
    rep.lanczos_gamma.push_back(gamma_next);

    const double alpha0 = c * delta - c_prev * s * gamma;
    const double alpha1 = std::hypot(alpha0, gamma_next);
    const double alpha2 = s * delta + c_prev * c * gamma;
    const double alpha3 = s_prev * gamma;
    if (alpha1 == 0.0) throw SolverError("minres: breakdown (alpha_1 = 0)");
    const double c_next = alpha0 / alpha1;
    const double s_next = gamma_next / alpha1;
    // w(j+1) = (z(j) - alpha3 w(j-1) - alpha2 w(j)) / alpha1
    Vector w_next = (z - alpha3 * w_prev - alpha2 * w_cur) / alpha1;
    // x(j) = x(j-1) + c_{j+1} eta w(j+1)
    x += c_next * eta * w_next;
    // eta = -s_{j+1} eta
    eta = -s_next * eta;

    rep.iterations = j;
    rep.residual_history.push_back(std::abs(eta));
    if (opt.on_iterate) opt.on_iterate(j, x);

    if (std::abs(eta) <= target || gamma_next == 0.0) {
      rep.converged = true;
      break;
    }

    v_prev = std::move(v);
    v = std::move(v_next);
    z = std::move(z_next);
    w_prev = std::move(w_cur);
    w_cur = std::move(w_next);
    gamma_prev = gamma;
    gamma = gamma_next;
    s_prev = s;
    s = s_next;
    c_prev = c;
    c = c_next;
  }
  rep.solution = std::move(x);
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

struct GmresOptions {
  double rtol = 0.0;  ///< relative to the initial residual norm
  double atol = 0.0;  ///< absolute threshold
  int maxit = 400;
  Vector x0;          ///< empty means zero
};

/// Full (non-restarted) right-preconditioned GMRES.
///
/// Minimizes ||b - A x|| over x0 + M^{-1} K_j(A M^{-1}, r0). Arnoldi uses
/// modified Gram-Schmidt with one conditional re-orthogonalization pass.
/// Convergence is declared on the true residual: when the Givens estimate
/// meets the target but the recomputed residual does not, the iteration
/// restarts from the current iterate.
template <class Operator, class Preconditioner>
SolveReport gmres(const Operator& a, const Vector& b, const Preconditioner& m,
                  const GmresOptions& opt = {}) {
  const auto start = std::chrono::steady_clock::now();
  const Eigen::Index n = b.size();
  SolveReport rep;
  Vector x = opt.x0.size() == n ? opt.x0 : Vector::Zero(n);
  Vector r = b - a(x);
  double beta = r.norm();
  rep.residual_history.push_back(beta);
  const double target = std::max(opt.atol, opt.rtol * beta);
  if (beta <= target || beta == 0.0 || opt.maxit <= 0) {
    rep.converged = beta <= target;
    rep.solution = x;
    return rep;
  }

  int total = 0;
  while (total < opt.maxit) {
    const int room = opt.maxit - total;
    std::vector<Vector> basis;
    basis.reserve(static_cast<std::size_t>(std::min(room, 512)) + 1);
    basis.push_back(r / beta);
    DenseMatrix h = DenseMatrix::Zero(room + 1, room);
    Vector cs = Vector::Zero(room), sn = Vector::Zero(room);
    Vector g = Vector::Zero(room + 1);
    g(0) = beta;
    int k = 0;
    bool estimate_converged = false;
    for (; k < room; ++k) {
      Vector w = a(m(basis[static_cast<std::size_t>(k)]));
      const double before = w.norm();
      for (int i = 0; i <= k; ++i) {
        const double hij = basis[static_cast<std::size_t>(i)].dot(w);
        h(i, k) += hij;
        w -= hij * basis[static_cast<std::size_t>(i)];
      }
      if (w.norm() < 0.7 * before) {
        for (int i = 0; i <= k; ++i) {
          const double hij = basis[static_cast<std::size_t>(i)].dot(w);
          h(i, k) += hij;
          w -= hij * basis[static_cast<std::size_t>(i)];
        }
      }
      const double hnext = w.norm();
      h(k + 1, k) = hnext;
      for (int i = 0; i < k; ++i) {
        const double t = cs(i) * h(i, k) + sn(i) * h(i + 1, k);
        h(i + 1, k) = -sn(i) * h(i, k) + cs(i) * h(i + 1, k);
        h(i, k) = t;
      }
      const double rho = std::hypot(h(k, k), h(k + 1, k));
      cs(k) = rho == 0.0 ? 1.0 : h(k, k) / rho;
      sn(k) = rho == 0.0 ? 0.0 : h(k + 1, k) / rho;
      h(k, k) = rho;
      h(k + 1, k) = 0.0;
      g(k + 1) = -sn(k) * g(k);
      g(k) = cs(k) * g(k);
      ++total;
      rep.iterations = total;
      rep.residual_history.push_back(std::abs(g(k + 1)));
      const bool happy = hnext <= 1e-14 * before;
      if (std::abs(g(k + 1)) <= target || happy) {
        estimate_converged = true;
        ++k;
        break;
      }
      basis.push_back(w / hnext);
    }
    if (k > 0) {
      const Vector y = h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
      Vector update = Vector::Zero(n);
      for (int i = 0; i < k; ++i) update += y(i) * basis[static_cast<std::size_t>(i)];
      x += m(update);
    }
    r = b - a(x);
    beta = r.norm();
    if (beta <= target) {
      rep.converged = true;
      rep.residual_history.back() = beta;
      break;
    }
    if (!estimate_converged) break;  // iteration budget exhausted
    if (beta == 0.0) break;
  }
  rep.solution = std::move(x);
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace thfem
