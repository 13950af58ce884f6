#include <doctest.h>

#include <sstream>

#include "thfem/flow.hpp"

using namespace thfem;

TEST_SUITE("flow") {

TEST_CASE("names round trip") {
  for (auto p : {ElementPair::p2p1, ElementPair::p2p1star, ElementPair::q2q1, ElementPair::q2q1star}) {
    CHECK(parse_element_pair(to_string(p)) == p);
  }
  CHECK(parse_element_pair("P2-P1*") == ElementPair::p2p1star);
  CHECK(parse_problem("cavity") == Problem::cavity2d);
  CHECK(parse_problem("step") == Problem::step);
  CHECK_THROWS_AS(parse_element_pair("P3P2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_problem("channel"), std::invalid_argument);
  CHECK_THROWS_AS((FlowProblem{Problem::step, 0.0, ElementPair::p2p1, 2}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((FlowProblem{Problem::step, 0.1, ElementPair::p2p1, 0}.validate()), std::invalid_argument);
}

TEST_CASE("direct and iterative Stokes solutions agree") {
  for (auto pair : {ElementPair::p2p1, ElementPair::p2p1star, ElementPair::q2q1star}) {
    CAPTURE(to_string(pair));
    const Discretization d = make_discretization({Problem::cavity2d, 1.0, pair, 3});
    const SaddleSystem sys = d.stokes();
    const auto nulls = pressure_nullspace(sys.n_k(), sys.n_0(), true);
    const Vector x = direct_solve(sys, nulls);
    CHECK(sys.residual(x).norm() < 1e-10 * sys.rhs().norm());
    for (const Vector& c : nulls) CHECK(std::abs(c.dot(x.tail(sys.n_p()))) < 1e-10 * x.norm());
    const StokesSolution s = solve_stokes(d, "p1", 1e-10);
    CHECK(s.report.converged);
    CHECK((s.report.solution.head(sys.n_u()) - x.head(sys.n_u())).norm() < 1e-7 * x.head(sys.n_u()).norm());
  }
}

TEST_CASE("Stokes preconditioner choice is validated") {
  const Discretization d = make_discretization({Problem::cavity2d, 1.0, ElementPair::p2p1, 2});
  CHECK_THROWS_AS(solve_stokes(d, "m1"), std::invalid_argument);
  const StokesSolution p2 = solve_stokes(d, "p2");
  CHECK(p2.report.converged);
  CHECK(p2.lambda_max >= 0.0);
}

TEST_CASE("enriched solutions are locally conservative") {
  for (auto kind : {ElementPair::p2p1, ElementPair::p2p1star}) {
    const Discretization d = make_discretization({Problem::cavity2d, 1.0, kind, 3});
    const StokesSolution s = solve_stokes(d, "p1", 1e-10);
    const DivergenceDiagnostics div = divergence_report(d, s.velocity);
    const double worst = div.mean.lpNorm<Eigen::Infinity>();
    if (kind == ElementPair::p2p1star) {
      CHECK(worst < 1e-7);
    } else {
      CHECK(worst > 1e-5);
    }
  }
}

TEST_CASE("Picard keeps the element constraints satisfied") {
  const FlowProblem fp{Problem::step, 1.0 / 50.0, ElementPair::p2p1star, 2};
  const Discretization d = make_discretization(fp);
  const PicardResult pic = picard_oseen(d, fp.nu, 3);
  CHECK(pic.b0_residuals.size() == 3);
  for (double r : pic.b0_residuals) CHECK(r < 1e-10);
  CHECK_FALSE(pic.system.symmetric);
  CHECK(pic.initial_guess.size() == pic.system.size());
  CHECK_THROWS_AS(picard_oseen(d, fp.nu, 0), std::invalid_argument);
}

TEST_CASE("CSV writers") {
  const Discretization d = make_discretization({Problem::cavity2d, 1.0, ElementPair::p2p1star, 1});
  const Vector u = Vector::Zero(d.dofs().n_u);
  const Vector p = Vector::Zero(d.dofs().n_p);
  std::ostringstream v, pr, el;
  write_velocity_csv(v, d.dofs(), u);
  write_pressure_csv(pr, d.mesh(), p);
  write_element_csv(el, d.mesh(), p, d.dofs().n_k, d.divergence(u));
  auto lines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
  CHECK(v.str().rfind("x,y,ux,uy\n", 0) == 0);
  CHECK(lines(v.str()) == d.dofs().n_nodes + 1);
  CHECK(lines(pr.str()) == d.mesh().num_vertices() + 1);
  CHECK(lines(el.str()) == d.mesh().num_elements() + 1);
}

}  // TEST_SUITE
