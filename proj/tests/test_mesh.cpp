#include <doctest.h>

#include <map>

#include "thfem/mesh.hpp"

using namespace thfem;

namespace {

double total_area(const Mesh& m) {
  double a = 0.0;
  for (int e = 0; e < m.num_elements(); ++e) a += m.element_area(e);
  return a;
}

}  // namespace

TEST_SUITE("mesh") {

TEST_CASE("cavity counts follow the square grid") {
  for (int level = 1; level <= 6; ++level) {
    const int n = 1 << level;
    const Mesh tri = build_cavity_mesh(level, ElementKind::triangle);
    const Mesh quad = build_cavity_mesh(level, ElementKind::quad);
    CHECK(tri.num_vertices() == (n + 1) * (n + 1));
    CHECK(tri.num_elements() == 2 * n * n);
    CHECK(quad.num_elements() == n * n);
    CHECK(total_area(tri) == doctest::Approx(4.0));
    CHECK(total_area(quad) == doctest::Approx(4.0));
  }
}

TEST_CASE("step counts") {
  // Coarsest step: a 1x1 inlet square against a 5x2 block of unit squares.
  const Mesh s1 = build_step_mesh(1, ElementKind::quad);
  CHECK(s1.num_elements() == 11);
  CHECK(s1.num_vertices() == 20);
  const Mesh s5 = build_step_mesh(5, ElementKind::triangle);
  CHECK(s5.num_vertices() == 2945);
  CHECK(s5.num_elements() == 5632);
  CHECK(total_area(s5) == doctest::Approx(11.0));
}

TEST_CASE("elements are counter-clockwise and faces are consistent") {
  for (auto kind : {ElementKind::triangle, ElementKind::quad}) {
    for (const Mesh& m : {build_cavity_mesh(3, kind), build_step_mesh(2, kind)}) {
      REQUIRE(m.has_face_topology());
      for (int e = 0; e < m.num_elements(); ++e) CHECK(m.element_area(e) > 0.0);
      // Closed boundary: outward normals weighted by length sum to zero.
      Point2 flux = Point2::Zero();
      for (const auto& b : m.boundary_edges()) flux += b.length * b.normal;
      CHECK(flux.norm() < 1e-12);
      for (const auto& f : m.interior_faces()) {
        CHECK(f.normal.norm() == doctest::Approx(1.0));
        const Point2 d = m.element_centroid(f.elem_b) - m.element_centroid(f.elem_a);
        CHECK(d.dot(f.normal) > 0.0);
      }
      // Euler: V - E + F = 1 for a simply connected polygon.
      const int edges = static_cast<int>(m.interior_faces().size() + m.boundary_edges().size());
      CHECK(m.num_vertices() - edges + m.num_elements() == 1);
    }
  }
}

TEST_CASE("boundary tags") {
  const Mesh c = build_cavity_mesh(3, ElementKind::triangle);
  std::map<BoundaryTag, double> len;
  for (const auto& b : c.boundary_edges()) len[b.tag] += b.length;
  CHECK(len[BoundaryTag::lid] == doctest::Approx(2.0));
  CHECK(len[BoundaryTag::wall] == doctest::Approx(6.0));

  const Mesh s = build_step_mesh(3, ElementKind::quad);
  len.clear();
  for (const auto& b : s.boundary_edges()) len[b.tag] += b.length;
  CHECK(len[BoundaryTag::inflow] == doctest::Approx(1.0));
  CHECK(len[BoundaryTag::outflow] == doctest::Approx(2.0));
  CHECK(len[BoundaryTag::wall] == doctest::Approx(6.0 + 1.0 + 1.0 + 5.0));
}

TEST_CASE("no cavity triangle has two boundary edges") {
  for (int level = 1; level <= 5; ++level) {
    const Mesh m = build_cavity_mesh(level, ElementKind::triangle);
    std::map<int, int> count;
    for (const auto& b : m.boundary_edges()) ++count[b.element];
    for (const auto& [e, k] : count) CHECK(k == 1);
  }
}

TEST_CASE("invalid levels are rejected") {
  CHECK_THROWS_AS(build_cavity_mesh(0, ElementKind::triangle), std::invalid_argument);
  CHECK_THROWS_AS(build_step_mesh(-1, ElementKind::quad), std::invalid_argument);
}

TEST_CASE("edge shared by three elements is a topology error") {
  std::vector<Point2> v{Point2(0, 0), Point2(1, 0), Point2(0, 1), Point2(1, 1), Point2(0, -1)};
  // Three triangles on edge (0, 1).
  Mesh bad(Domain::cavity, ElementKind::triangle, 1, 1.0, v, {0, 1, 2, 1, 0, 4, 0, 1, 3});
  CHECK_THROWS_AS(face_topology(bad), TopologyError);
}

}  // TEST_SUITE
