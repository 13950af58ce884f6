#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

#include "thfem/flow.hpp"
#include "thfem/infsup.hpp"

using namespace thfem;

TEST_SUITE("infsup") {

TEST_CASE("estimate needs a negative Ritz value") {
  CHECK_FALSE(est_minres({1.0}, {1.0}, 1).has_value());
  CHECK_FALSE(est_minres({}, {}, 1).has_value());
  CHECK_FALSE(est_minres({1.0, 2.0}, {1.0, 0.5}, 3).has_value());
  const auto one = est_minres({-0.5}, {1.0}, 1);
  REQUIRE(one.has_value());
  CHECK(*one == doctest::Approx(0.75));
}

TEST_CASE("estimate inverts the negative eigenvalue of the ideal spectrum") {
  // Tridiagonal with eigenvalues 1 and mu = (1 - sqrt(1 + 4 g2)) / 2.
  const double g2 = 0.2;
  const double mu = 0.5 * (1.0 - std::sqrt(1.0 + 4.0 * g2));
  // Rotate diag(1, mu) into a tridiagonal 2x2 matrix.
  const double c = std::cos(0.3), s = std::sin(0.3);
  const double d1 = c * c * 1.0 + s * s * mu;
  const double d2 = s * s * 1.0 + c * c * mu;
  const double off = c * s * (1.0 - mu);
  const auto est = est_minres({d1, d2}, {1.0, off}, 2);
  REQUIRE(est.has_value());
  CHECK(*est == doctest::Approx(g2));
}

TEST_CASE("EST-MINRES agrees with the dense oracle") {
  for (auto pair : {ElementPair::p2p1, ElementPair::p2p1star}) {
    const Discretization d = make_discretization({Problem::cavity2d, 1.0, pair, 3});
    const StokesSolution s = solve_stokes(d, "p1");
    const double oracle = oracle_infsup(s.system, s.mass);
    CHECK(s.infsup.final_estimate == doctest::Approx(oracle).epsilon(0.01));
    CHECK(s.infsup.stabilized_at > 0);
    CHECK(s.infsup.history.size() == static_cast<std::size_t>(s.report.iterations));
  }
}

TEST_CASE("oracle against a direct pencil computation") {
  const Discretization d = make_discretization({Problem::cavity2d, 1.0, ElementPair::p2p1, 2});
  const SaddleSystem sys = d.stokes();
  const PressureMassBlocks mass = d.pressure_mass();
  const DenseMatrix b = sys.B();
  const DenseMatrix s = b * DenseMatrix(sys.F).inverse() * b.transpose();
  const Vector ev = dense_generalized_eig(0.5 * (s + s.transpose()), DenseMatrix(mass.MQ));
  // The smallest eigenvalue is the hydrostatic zero.
  CHECK(std::abs(ev(0)) < 1e-10);
  CHECK(oracle_infsup(sys, mass) == doctest::Approx(ev(1)).epsilon(1e-8));
}

TEST_CASE("history CSV") {
  SolveReport rep;
  rep.residual_history = {1.0, 0.5};
  rep.infsup_history = {std::nan("")};
  std::ostringstream out;
  write_history_csv(out, rep, true);
  CHECK(out.str() == "iter,residual,infsup_estimate\n0,1,\n1,0.5,\n");
}

}  // TEST_SUITE
