#include <doctest.h>

#include <Eigen/Dense>

#include <random>

#include "thfem/flow.hpp"
#include "thfem/precond.hpp"

using namespace thfem;

namespace {

// Symmetric PSD matrix whose nullspace is exactly span(C).
SparseMatrix psd_with_nullspace(const DenseMatrix& c, unsigned seed) {
  const int n = static_cast<int>(c.rows());
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  DenseMatrix x(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) x(i, j) = g(rng);
  const DenseMatrix q = c.householderQr().householderQ();
  const DenseMatrix proj = DenseMatrix::Identity(n, n) - q.leftCols(c.cols()) * q.leftCols(c.cols()).transpose();
  DenseMatrix s = proj * (x * x.transpose() + n * DenseMatrix::Identity(n, n)) * proj;
  s = (0.5 * (s + s.transpose())).eval();
  return s.sparseView(1e-300);
}

}  // namespace

TEST_SUITE("precond") {

TEST_CASE("pressure nullspace columns") {
  CHECK(pressure_nullspace(5, 0, false).empty());
  const auto th = pressure_nullspace(5, 0, true);
  REQUIRE(th.size() == 1);
  CHECK(th[0] == Vector::Ones(5));
  const auto k = pressure_nullspace(3, 2, false);
  REQUIRE(k.size() == 1);
  CHECK(k[0].head(3) == Vector::Ones(3));
  CHECK(k[0].tail(2) == -Vector::Ones(2));
  CHECK(pressure_nullspace(3, 2, true).size() == 2);
}

TEST_CASE("augmented solver matches the dense bordered system") {
  for (unsigned seed = 1; seed <= 6; ++seed) {
    const int n = 30;
    const int m = 1 + static_cast<int>(seed % 2);
    DenseMatrix c = DenseMatrix::Zero(n, m);
    c.col(0).head(18).setOnes();
    c.col(0).tail(12).setConstant(-1.0);
    if (m == 2) c.col(1).head(18).setOnes();
    const SparseMatrix s = psd_with_nullspace(c, seed);
    std::vector<Vector> cols;
    for (int j = 0; j < m; ++j) cols.push_back(c.col(j));
    const NullspaceAugmentedSolver solver(s, cols);

    DenseMatrix big = DenseMatrix::Zero(n + m, n + m);
    big.topLeftCorner(n, n) = DenseMatrix(s);
    big.topRightCorner(n, m) = c;
    big.bottomLeftCorner(m, n) = c.transpose();
    std::mt19937 rng(seed + 100);
    std::normal_distribution<double> g;
    Vector r(n);
    for (int i = 0; i < n; ++i) r(i) = g(rng);
    Vector rhs = Vector::Zero(n + m);
    rhs.head(n) = r;
    const Vector ref = big.fullPivLu().solve(rhs);

    Vector lambda;
    const Vector z = solver.solve(r, &lambda);
    CHECK((z - ref.head(n)).norm() < 1e-10 * ref.head(n).norm());
    CHECK((lambda - ref.tail(m)).norm() < 1e-10 * (1.0 + ref.tail(m).norm()));
    CHECK((c.transpose() * z).norm() < 1e-10 * z.norm());
    // r has a component along C, so the solve is counted as inconsistent.
    CHECK(solver.inconsistent_solves() == 1);
    const Vector consistent = r - c * (c.transpose() * c).ldlt().solve(c.transpose() * r);
    solver.solve(consistent);
    CHECK(solver.inconsistent_solves() == 1);
  }
}

TEST_CASE("augmented solver without constraints is a plain solve") {
  DenseMatrix d(2, 2);
  d << 4, 1, 1, 3;
  const NullspaceAugmentedSolver s(SparseMatrix(d.sparseView()), {});
  const Vector r = Eigen::Vector2d(1, 2);
  CHECK((d * s.solve(r) - r).norm() < 1e-14);
}

TEST_CASE("Chebyshev-SGS is exact for a diagonal matrix") {
  const Vector diag = Vector::LinSpaced(10, 1.0, 5.0);
  const SparseMatrix m = DenseMatrix(diag.asDiagonal()).sparseView();
  const ChebyshevSgs cheb(m, 20);
  CHECK(cheb.lambda_max() < 1e-12);
  const Vector r = Vector::LinSpaced(10, -1.0, 1.0);
  CHECK((cheb.apply(r) - r.cwiseQuotient(diag)).norm() < 1e-13);
  CHECK((cheb.sgs_solve(r) - r.cwiseQuotient(diag)).norm() < 1e-13);
}

TEST_CASE("Chebyshev-SGS on the pressure mass is a fixed symmetric positive operator") {
  const Discretization d = make_discretization({Problem::cavity2d, 1.0, ElementPair::p2p1star, 3});
  const PressureMassBlocks mass = d.pressure_mass();
  const Vector k = frame_null_vector(d.dofs());
  const ChebyshevSgs cheb(mass.MQ, 20, {k});
  CHECK(cheb.lambda_max() > 0.5);
  CHECK(cheb.lambda_max() < 1.0);
  const int n = static_cast<int>(k.size());
  std::mt19937 rng(9);
  std::normal_distribution<double> g;
  Vector x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x(i) = g(rng);
    y(i) = g(rng);
  }
  const Vector ax = cheb.apply(x);
  const Vector ay = cheb.apply(y);
  CHECK(std::abs(x.dot(ay) - y.dot(ax)) < 1e-10 * x.norm() * ay.norm());
  CHECK(x.dot(ax) > 0.0);
  CHECK((cheb.apply(x) - ax).norm() == 0.0);
  CHECK(std::abs(k.dot(ax)) < 1e-10 * k.norm() * ax.norm());
  // W is the SGS splitting: W W^{-1} r = r.
  CHECK((cheb.w_apply(cheb.sgs_solve(x)) - x).norm() < 1e-12 * x.norm());
  // Taylor-Hood mass: compare with an exact solve.
  const ChebyshevSgs th(mass.Qk, 20);
  const Vector exact = Factorization(mass.Qk, true).solve(Vector(x.head(mass.Qk.rows())));
  const Vector approx = th.apply(x.head(mass.Qk.rows()));
  CHECK((approx - exact).norm() < 1e-3 * exact.norm());
}

TEST_CASE("exact block preconditioner gives three-term convergence on Stokes") {
  // With S itself as the Schur block the preconditioned matrix has three eigenvalues.
  const Discretization d = make_discretization({Problem::step, 1.0, ElementPair::p2p1, 1});
  const SaddleSystem sys = d.stokes();
  auto a = std::make_shared<const Factorization>(sys.F, true);
  const DenseMatrix s = DenseMatrix(sys.B()) * a->solve(DenseMatrix(DenseMatrix(sys.B()).transpose()));
  const Eigen::LDLT<DenseMatrix> sf(s);
  const PreconditionerApply p = make_block_diagonal(
      a, [&](const Vector& r) { return Vector(sf.solve(r)); }, sys.n_u(), "exact");
  MinresOptions opt;
  opt.rtol = 1e-10;
  const SolveReport rep = minres([&](const Vector& x) { return sys.apply(x); }, sys.rhs(), p, opt);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 3);
}

TEST_CASE("two-stage transition respects the bound") {
  const FlowProblem fp{Problem::step, 1.0 / 50.0, ElementPair::p2p1star, 2};
  const Discretization d = make_discretization(fp);
  const PicardResult pic = picard_oseen(d, fp.nu, 3);
  const TwoStageResult r =
      two_stage_solve(pic.system, d.pcd(pic.convecting, fp.nu), d.pressure_mass(), fp.nu, false);
  CHECK(r.stage2.converged);
  CHECK(r.bound_holds());
  CHECK(r.stage2.final_residual() <= 1e-4 * r.rhs_norm);
  const auto h = r.history();
  CHECK(h.size() == r.stage1.residual_history.size() + r.stage2.residual_history.size());
  CHECK(h.front().first == 1);
  CHECK(h.back().first == 2);
}

TEST_CASE("Oseen preconditioners reduce the residual on a small step") {
  const FlowProblem fp{Problem::step, 1.0 / 50.0, ElementPair::p2p1star, 2};
  const Discretization d = make_discretization(fp);
  const PicardResult pic = picard_oseen(d, fp.nu, 3);
  for (const char* pre : {"m1", "m2", "m3"}) {
    CAPTURE(pre);
    const SolveReport rep = solve_oseen(d, pic, fp.nu, false, pre, 1e-4, 400);
    CHECK(rep.converged);
    CHECK(rep.final_residual() <= 1e-4 * rep.initial_residual() * (1 + 1e-12));
  }
  CHECK_THROWS_AS(solve_oseen(d, pic, fp.nu, false, "m9", 1e-4, 10), std::invalid_argument);
}

}  // TEST_SUITE
