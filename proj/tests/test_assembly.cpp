#include <doctest.h>

#include <cmath>

#include "thfem/assembly.hpp"
#include "thfem/reference_element.hpp"

using namespace thfem;

namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

Vector linear_field(const DofMap& dofs, double a, double b, double c, double d) {
  // u = (a x + b y, c x + d y)
  Vector u(dofs.n_u);
  for (int i = 0; i < dofs.n_nodes; ++i) {
    const Point2& p = dofs.nodes[static_cast<std::size_t>(i)];
    u(i) = a * p.x() + b * p.y();
    u(dofs.n_nodes + i) = c * p.x() + d * p.y();
  }
  return u;
}

}  // namespace

TEST_SUITE("assembly") {

TEST_CASE("triangle rule integrates monomials up to degree five") {
  for (int a = 0; a <= 5; ++a) {
    for (int b = 0; a + b <= 5; ++b) {
      double q = 0.0;
      for (const auto& p : triangle_quadrature()) q += p.weight * std::pow(p.xi.x(), a) * std::pow(p.xi.y(), b);
      const double exact = factorial(a) * factorial(b) / factorial(a + b + 2);
      CHECK(q == doctest::Approx(exact).epsilon(1e-13));
    }
  }
}

TEST_CASE("line and square rules integrate degree five") {
  for (int a = 0; a <= 5; ++a) {
    double q = 0.0;
    for (const auto& p : line_quadrature()) q += p.weight * std::pow(p.xi.x(), a);
    CHECK(q == doctest::Approx(1.0 / (a + 1)).epsilon(1e-13));
    for (int b = 0; b <= 5; ++b) {
      double s = 0.0;
      for (const auto& p : quad_quadrature()) s += p.weight * std::pow(p.xi.x(), a) * std::pow(p.xi.y(), b);
      CHECK(s == doctest::Approx(1.0 / ((a + 1) * (b + 1))).epsilon(1e-13));
    }
  }
}

TEST_CASE_TEMPLATE("reference basis is nodal and sums to one", E, TriangleP2P1, QuadQ2Q1) {
  const auto nodes = E::velocity_node_positions();
  for (int i = 0; i < E::velocity_nodes; ++i) {
    const auto v = E::velocity_values(nodes[static_cast<std::size_t>(i)]);
    for (int j = 0; j < E::velocity_nodes; ++j) CHECK(v(j) == doctest::Approx(i == j ? 1.0 : 0.0));
  }
  const Point2 xi(0.23, 0.41);
  CHECK(E::velocity_values(xi).sum() == doctest::Approx(1.0));
  CHECK(E::pressure_values(xi).sum() == doctest::Approx(1.0));
  CHECK(E::velocity_grads(xi).colwise().sum().norm() < 1e-13);
}

TEST_CASE("cavity dof counts") {
  const int vel[] = {2178, 8450, 33282};
  const int tp[] = {289, 1089, 4225};
  const int ep[] = {801, 3137, 12417};
  for (int level = 4; level <= 6; ++level) {
    const Mesh m = build_cavity_mesh(level, ElementKind::triangle);
    const DofMap th = build_dof_map(m, PressureSpace::taylor_hood, boundary_profiles(Problem::cavity2d));
    const DofMap en = build_dof_map(m, PressureSpace::enriched, boundary_profiles(Problem::cavity2d));
    CHECK(th.n_u == vel[level - 4]);
    CHECK(th.n_p == tp[level - 4]);
    CHECK(en.n_p == ep[level - 4]);
    CHECK(en.n_0 == m.num_elements());
  }
}

TEST_CASE("frame null vector annihilates B^T and M_Q") {
  for (auto kind : {ElementKind::triangle, ElementKind::quad}) {
    const Discretization d(build_cavity_mesh(3, kind), PressureSpace::enriched);
    const SaddleSystem s = d.stokes();
    const Vector k = frame_null_vector(d.dofs());
    const PressureMassBlocks m = d.pressure_mass();
    CHECK((m.MQ * k).lpNorm<Eigen::Infinity>() < 1e-14);
    CHECK((SparseMatrix(s.B().transpose()) * k).lpNorm<Eigen::Infinity>() < 1e-14);
    // Hydrostatic mode of the enclosed cavity.
    const Vector h = hydrostatic_vector(d.dofs());
    CHECK((SparseMatrix(s.B().transpose()) * h).lpNorm<Eigen::Infinity>() < 1e-13);
  }
}

TEST_CASE("Stokes blocks are symmetric and the mass sums to the area") {
  const Discretization d(build_step_mesh(2, ElementKind::triangle), PressureSpace::taylor_hood);
  const SaddleSystem s = d.stokes();
  CHECK(s.symmetric);
  CHECK((SparseMatrix(s.F.transpose()) - s.F).norm() < 1e-12 * s.F.norm());
  CHECK(Vector(d.scalar_mass() * Vector::Ones(d.dofs().n_nodes)).sum() == doctest::Approx(11.0));
  CHECK(d.pressure_mass().Qk.sum() == doctest::Approx(11.0));
  CHECK(Vector(d.scalar_laplacian() * Vector::Ones(d.dofs().n_nodes)).norm() < 1e-11);
}

TEST_CASE("divergence of simple fields") {
  const Discretization d(build_cavity_mesh(2, ElementKind::triangle), PressureSpace::enriched);
  const auto constant = d.divergence(linear_field(d.dofs(), 0, 0, 0, 0) + Vector::Ones(d.dofs().n_u));
  CHECK(constant.mean.lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK(constant.global_l2 < 1e-14);
  // u = (x, y): div u = 2.
  const auto radial = d.divergence(linear_field(d.dofs(), 1, 0, 0, 1));
  for (int e = 0; e < d.mesh().num_elements(); ++e) {
    CHECK(radial.mean(e) == doctest::Approx(2.0 * d.mesh().element_area(e)));
  }
  CHECK(radial.global_l2 == doctest::Approx(2.0 * std::sqrt(4.0)));
  // Rotation is divergence free.
  const auto rot = d.divergence(linear_field(d.dofs(), 0, -1, 1, 0));
  CHECK(rot.global_l2 < 1e-13);
}

TEST_CASE("Oseen convection is skew up to boundary terms") {
  const Discretization d(build_cavity_mesh(3, ElementKind::quad), PressureSpace::taylor_hood);
  // Divergence-free convecting field vanishing on the boundary: w = curl of (1-x^2)^2 (1-y^2)^2.
  Vector w(d.dofs().n_u);
  for (int i = 0; i < d.dofs().n_nodes; ++i) {
    const double x = d.dofs().nodes[static_cast<std::size_t>(i)].x();
    const double y = d.dofs().nodes[static_cast<std::size_t>(i)].y();
    w(i) = -4 * y * (1 - x * x) * (1 - x * x) * (1 - y * y);
    w(d.dofs().n_nodes + i) = 4 * x * (1 - x * x) * (1 - y * y) * (1 - y * y);
  }
  const SparseMatrix n = d.scalar_convection(w);
  const SparseMatrix sym = n + SparseMatrix(n.transpose());
  // Non-zero only through the interpolation error of div w.
  CHECK(sym.norm() < 0.05 * n.norm());
  CHECK(Vector(n * Vector::Ones(d.dofs().n_nodes)).norm() < 1e-12);
}

TEST_CASE("velocity of wrong size is rejected") {
  const Discretization d(build_cavity_mesh(1, ElementKind::triangle), PressureSpace::taylor_hood);
  CHECK_THROWS_AS(d.divergence(Vector::Zero(3)), std::invalid_argument);
}

}  // TEST_SUITE
