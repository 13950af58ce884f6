#include <doctest.h>

#include <Eigen/Dense>

#include <random>

#include "thfem/flow.hpp"
#include "thfem/krylov.hpp"

using namespace thfem;

namespace {

DenseMatrix random_matrix(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  DenseMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  return a;
}

// Orthonormal basis of span{v, Tv, ..., T^{j-1} v}.
DenseMatrix krylov_basis(const DenseMatrix& t, const Vector& v, int j) {
  DenseMatrix k(v.size(), j);
  k.col(0) = v.normalized();
  for (int i = 1; i < j; ++i) k.col(i) = (t * k.col(i - 1)).normalized();
  return k.householderQr().householderQ() * DenseMatrix::Identity(v.size(), j);
}

}  // namespace

TEST_SUITE("krylov") {

TEST_CASE("MINRES residuals match brute-force minimization") {
  const int n = 10;
  DenseMatrix a = random_matrix(n, 3u);
  a = (0.5 * (a + a.transpose())).eval();  // symmetric, indefinite
  const Vector pdiag = Vector::LinSpaced(n, 0.5, 3.0);
  const Vector b = Vector::LinSpaced(n, 1.0, -1.0) + Vector::Ones(n) * 0.3;
  const PreconditionerApply p{[&](const Vector& r) { return Vector(r.cwiseQuotient(pdiag)); }, "diag"};
  MinresOptions opt;
  opt.rtol = 1e-14;
  opt.maxit = n - 1;
  const SolveReport rep = minres([&](const Vector& x) { return Vector(a * x); }, b, p, opt);
  const DenseMatrix pinv_a = pdiag.cwiseInverse().asDiagonal() * a;
  const Vector w = pdiag.cwiseSqrt().cwiseInverse();  // P^{-1/2}
  CHECK(rep.residual_history[0] == doctest::Approx(std::sqrt(b.dot(b.cwiseQuotient(pdiag)))));
  for (int j = 1; j <= rep.iterations; ++j) {
    const DenseMatrix k = krylov_basis(pinv_a, b.cwiseQuotient(pdiag), j);
    const DenseMatrix lhs = w.asDiagonal() * a * k;
    const Vector rhs = w.asDiagonal() * b;
    const Vector y = lhs.colPivHouseholderQr().solve(rhs);
    const double best = (rhs - lhs * y).norm();
    CHECK(rep.residual_history[static_cast<std::size_t>(j)] == doctest::Approx(best).epsilon(1e-8));
  }
  CHECK(rep.lanczos_delta.size() == static_cast<std::size_t>(rep.iterations));
  CHECK(rep.lanczos_gamma.size() == static_cast<std::size_t>(rep.iterations + 1));
}

TEST_CASE("MINRES solves a small system exactly and reports the true residual") {
  const int n = 8;
  DenseMatrix a = random_matrix(n, 5u);
  a = (a + a.transpose()).eval();
  const Vector b = Vector::Ones(n);
  MinresOptions opt;
  opt.rtol = 1e-12;
  const SolveReport rep = minres([&](const Vector& x) { return Vector(a * x); }, b, identity_preconditioner(), opt);
  CHECK(rep.converged);
  CHECK((b - a * rep.solution).norm() < 1e-10);
  CHECK(rep.final_residual() == doctest::Approx((b - a * rep.solution).norm()).epsilon(1e-3));
}

TEST_CASE("MINRES rejects an indefinite preconditioner") {
  const DenseMatrix a = DenseMatrix::Identity(4, 4);
  const PreconditionerApply neg{[](const Vector& r) { return Vector(-r); }, "negative"};
  CHECK_THROWS_AS(minres([&](const Vector& x) { return Vector(a * x); }, Vector(Vector::Ones(4)), neg),
                  IndefinitePreconditionerError);
}

TEST_CASE("MINRES with a zero right-hand side returns at once") {
  const DenseMatrix a = DenseMatrix::Identity(4, 4);
  const SolveReport rep =
      minres([&](const Vector& x) { return Vector(a * x); }, Vector(Vector::Zero(4)), identity_preconditioner());
  CHECK(rep.converged);
  CHECK(rep.iterations == 0);
  CHECK(rep.residual_history.size() == 1);
}

TEST_CASE("GMRES residuals match brute-force minimization") {
  const int n = 12;
  const DenseMatrix a = random_matrix(n, 11u) + 4.0 * DenseMatrix::Identity(n, n);
  const Vector mdiag = Vector::LinSpaced(n, 1.0, 2.0);
  const Vector b = Vector::LinSpaced(n, -1.0, 1.0);
  const Vector x0 = Vector::Constant(n, 0.1);
  const PreconditionerApply m{[&](const Vector& r) { return Vector(r.cwiseQuotient(mdiag)); }, "diag"};
  GmresOptions opt;
  opt.rtol = 1e-13;
  opt.maxit = n - 1;
  opt.x0 = x0;
  const SolveReport rep = gmres([&](const Vector& x) { return Vector(a * x); }, b, m, opt);
  const DenseMatrix am = a * mdiag.cwiseInverse().asDiagonal();
  const Vector r0 = b - a * x0;
  CHECK(rep.residual_history[0] == doctest::Approx(r0.norm()));
  for (int j = 1; j <= rep.iterations; ++j) {
    const DenseMatrix k = krylov_basis(am, r0, j);
    const DenseMatrix lhs = am * k;
    const Vector y = lhs.colPivHouseholderQr().solve(r0);
    CHECK(rep.residual_history[static_cast<std::size_t>(j)] ==
          doctest::Approx((r0 - lhs * y).norm()).epsilon(1e-8));
  }
  CHECK((b - a * rep.solution).norm() == doctest::Approx(rep.final_residual()).epsilon(1e-6));
}

TEST_CASE("GMRES with maxit zero reports only the initial residual") {
  const DenseMatrix a = 2.0 * DenseMatrix::Identity(3, 3);
  GmresOptions opt;
  opt.maxit = 0;
  opt.rtol = 1e-8;
  const SolveReport rep =
      gmres([&](const Vector& x) { return Vector(a * x); }, Vector(Vector::Ones(3)), identity_preconditioner(), opt);
  CHECK(rep.iterations == 0);
  CHECK(rep.residual_history.size() == 1);
  CHECK_FALSE(rep.converged);
}

TEST_CASE("GMRES absolute tolerance") {
  const DenseMatrix a = random_matrix(20, 2u) + 8.0 * DenseMatrix::Identity(20, 20);
  GmresOptions opt;
  opt.atol = 1e-6;
  const SolveReport rep =
      gmres([&](const Vector& x) { return Vector(a * x); }, Vector(Vector::Ones(20)), identity_preconditioner(), opt);
  CHECK(rep.converged);
  CHECK(rep.final_residual() <= 1e-6);
  CHECK((Vector::Ones(20) - a * rep.solution).norm() <= 1e-6);
}

TEST_CASE("MINRES residuals ignore the frame null vector") {
  const Discretization d = make_discretization({Problem::cavity2d, 1.0, ElementPair::p2p1star, 3});
  const SaddleSystem sys = d.stokes();
  const PreconditionerApply p = make_stokes_p1(sys, d.pressure_mass());
  Vector k0 = Vector::Zero(sys.size());
  k0.tail(sys.n_p()) = frame_null_vector(d.dofs());
  const auto apply = [&](const Vector& x) { return sys.apply(x); };
  std::vector<double> base;
  MinresOptions opt;
  opt.on_iterate = [&](int, const Vector& x) { base.push_back(sys.residual(x).norm()); };
  const SolveReport ref = minres(apply, sys.rhs(), p, opt);
  // Differences are measured against the size of the problem, ||b||.
  const double scale = sys.rhs().norm();
  for (double alpha : {1.0, 1e3}) {
    std::vector<double> shifted;
    opt.on_iterate = [&](int, const Vector& x) { shifted.push_back(sys.residual(x + alpha * k0).norm()); };
    minres(apply, sys.rhs(), p, opt);
    REQUIRE(shifted.size() == base.size());
    for (std::size_t j = 0; j < base.size(); ++j) CHECK(std::abs(shifted[j] - base[j]) <= 1e-10 * scale);
    MinresOptions from_shift;
    from_shift.x0 = alpha * k0;
    const SolveReport rep = minres(apply, sys.rhs(), p, from_shift);
    REQUIRE(rep.residual_history.size() == ref.residual_history.size());
    for (std::size_t j = 0; j < ref.residual_history.size(); ++j) {
      CHECK(std::abs(rep.residual_history[j] - ref.residual_history[j]) <= 1e-10 * ref.initial_residual());
    }
  }
}

}  // TEST_SUITE
