#include "thfem/assembly.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "thfem/reference_element.hpp"

namespace thfem {

namespace {

constexpr double kBoundaryTol = 1e-12;

template <class Element>
std::array<Point2, Element::vertices> reference_vertices() {
  if constexpr (Element::vertices == 3) {
    return {Point2(0, 0), Point2(1, 0), Point2(0, 1)};
  } else {
    return {Point2(0, 0), Point2(1, 0), Point2(1, 1), Point2(0, 1)};
  }
}

int local_edge_index(const Mesh& mesh, int e, int p, int q) {
  const auto v = mesh.element(e);
  const int nv = mesh.vertices_per_element();
  for (int a = 0; a < nv; ++a) {
    const int x = v[static_cast<std::size_t>(a)];
    const int y = v[static_cast<std::size_t>((a + 1) % nv)];
    if ((x == p && y == q) || (x == q && y == p)) return a;
  }
  throw TopologyError("edge not found in element " + std::to_string(e));
}

SparseMatrix from_triplets(int rows, int cols, const std::vector<Triplet>& t) {
  SparseMatrix m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

}  // namespace

Problem problem_for(Domain domain) {
  return domain == Domain::cavity ? Problem::cavity2d : Problem::step;
}

DirichletProfile boundary_profiles(Problem problem) {
  if (problem == Problem::cavity2d) {
    return [](const Point2& p) -> Eigen::Vector2d {
      if (std::abs(p.y() - 1.0) < kBoundaryTol) {
        const double x2 = p.x() * p.x();
        return {1.0 - x2 * x2, 0.0};
      }
      return Eigen::Vector2d::Zero();
    };
  }
  return [](const Point2& p) -> Eigen::Vector2d {
    if (std::abs(p.x() + 1.0) < kBoundaryTol) return {4.0 * p.y() * (1.0 - p.y()), 0.0};
    return Eigen::Vector2d::Zero();
  };
}

DirichletProfile boundary_profiles(const std::string& problem_id) {
  if (problem_id == "cavity2d" || problem_id == "cavity") return boundary_profiles(Problem::cavity2d);
  if (problem_id == "step") return boundary_profiles(Problem::step);
  throw std::invalid_argument("unknown problem id '" + problem_id + "'");
}

Vector DofMap::expand(const Vector& u_free) const {
  Vector u = Vector::Zero(n_u);
  for (const auto& [dof, value] : dirichlet_dofs) u(dof) = value;
  for (int i = 0; i < n_free(); ++i) u(free_dofs[static_cast<std::size_t>(i)]) = u_free(i);
  return u;
}

Vector DofMap::restrict_to_free(const Vector& u_full) const {
  Vector u(n_free());
  for (int i = 0; i < n_free(); ++i) u(i) = u_full(free_dofs[static_cast<std::size_t>(i)]);
  return u;
}

namespace {

template <class Element>
void number_nodes(const Mesh& mesh, DofMap& dofs) {
  const double half = mesh.h() / std::sqrt(2.0) / 2.0;
  double x0 = mesh.vertex(0).x(), y0 = mesh.vertex(0).y();
  for (const auto& p : mesh.vertices()) {
    x0 = std::min(x0, p.x());
    y0 = std::min(y0, p.y());
  }
  const auto ref_nodes = Element::velocity_node_positions();
  using Key = std::pair<long, long>;
  std::map<Key, int> index;
  std::vector<Key> local_keys(static_cast<std::size_t>(mesh.num_elements() * Element::velocity_nodes));
  std::map<Key, Point2> position;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const ElementGeometry<Element> geo(mesh, e);
    for (int n = 0; n < Element::velocity_nodes; ++n) {
      const Point2 x = geo.map(ref_nodes[static_cast<std::size_t>(n)]);
      const Key key{std::lround((x.y() - y0) / half), std::lround((x.x() - x0) / half)};
      local_keys[static_cast<std::size_t>(e * Element::velocity_nodes + n)] = key;
      position.emplace(key, x);
    }
  }
  dofs.nodes.reserve(position.size());
  for (const auto& [key, x] : position) {
    index.emplace(key, static_cast<int>(dofs.nodes.size()));
    dofs.nodes.push_back(x);
  }
  dofs.nodes_per_element = Element::velocity_nodes;
  dofs.element_nodes.resize(local_keys.size());
  for (std::size_t i = 0; i < local_keys.size(); ++i) dofs.element_nodes[i] = index.at(local_keys[i]);
}

}  // namespace

DofMap build_dof_map(const Mesh& mesh, PressureSpace space, const DirichletProfile& profile) {
  if (!mesh.has_face_topology()) throw TopologyError("dof map requires face topology");
  DofMap dofs;
  dofs.kind = mesh.kind();
  dofs.space = space;
  if (mesh.kind() == ElementKind::triangle) {
    number_nodes<TriangleP2P1>(mesh, dofs);
  } else {
    number_nodes<QuadQ2Q1>(mesh, dofs);
  }
  dofs.n_nodes = static_cast<int>(dofs.nodes.size());
  dofs.n_u = 2 * dofs.n_nodes;
  dofs.n_k = mesh.num_vertices();
  dofs.n_0 = space == PressureSpace::enriched ? mesh.num_elements() : 0;
  dofs.n_p = dofs.n_k + dofs.n_0;

  const int nv = mesh.vertices_per_element();
  dofs.dirichlet_node.assign(static_cast<std::size_t>(dofs.n_nodes), false);
  for (const auto& b : mesh.boundary_edges()) {
    if (b.tag == BoundaryTag::outflow) continue;
    const int a = local_edge_index(mesh, b.element, b.vertices[0], b.vertices[1]);
    const int* en = dofs.element(b.element);
    for (int local : {a, (a + 1) % nv, nv + a}) {
      dofs.dirichlet_node[static_cast<std::size_t>(en[local])] = true;
    }
  }

  dofs.dof_to_free.assign(static_cast<std::size_t>(dofs.n_u), -1);
  for (int c = 0; c < 2; ++c) {
    for (int n = 0; n < dofs.n_nodes; ++n) {
      const int dof = c * dofs.n_nodes + n;
      if (dofs.dirichlet_node[static_cast<std::size_t>(n)]) {
        dofs.dirichlet_dofs.emplace_back(dof, profile(dofs.nodes[static_cast<std::size_t>(n)])(c));
      } else {
        dofs.dof_to_free[static_cast<std::size_t>(dof)] = static_cast<int>(dofs.free_dofs.size());
        dofs.free_dofs.push_back(dof);
      }
    }
  }
  return dofs;
}

Vector frame_null_vector(const DofMap& dofs) {
  Vector k(dofs.n_p);
  k.head(dofs.n_k).setOnes();
  k.tail(dofs.n_0).setConstant(-1.0);
  return k;
}

Vector hydrostatic_vector(const DofMap& dofs) {
  Vector c = Vector::Zero(dofs.n_p);
  c.head(dofs.n_k).setOnes();
  return c;
}

SparseMatrix SaddleSystem::B() const {
  SparseMatrix b(n_p(), n_u());
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(B1.nonZeros() + B0.nonZeros()));
  for (int i = 0; i < B1.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(B1, i); it; ++it) t.emplace_back(i, it.col(), it.value());
  for (int i = 0; i < B0.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(B0, i); it; ++it)
      t.emplace_back(n_k() + i, it.col(), it.value());
  b.setFromTriplets(t.begin(), t.end());
  return b;
}

SparseMatrix SaddleSystem::matrix() const {
  const SparseMatrix b = B();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(F.nonZeros() + 2 * b.nonZeros()));
  for (int i = 0; i < F.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(F, i); it; ++it) t.emplace_back(i, it.col(), it.value());
  for (int i = 0; i < b.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(b, i); it; ++it) {
      t.emplace_back(n_u() + i, it.col(), it.value());
      t.emplace_back(it.col(), n_u() + i, it.value());
    }
  }
  return from_triplets(size(), size(), t);
}

Vector SaddleSystem::rhs() const {
  Vector b(size());
  b << f, g;
  return b;
}

Vector SaddleSystem::apply(const Vector& x) const {
  const auto u = x.head(n_u());
  const auto p1 = x.segment(n_u(), n_k());
  const auto p0 = x.tail(n_0());
  Vector y(size());
  y.head(n_u()) = F * u + B1.transpose() * p1;
  if (n_0() > 0) y.head(n_u()) += B0.transpose() * p0;
  y.segment(n_u(), n_k()) = B1 * u;
  y.tail(n_0()) = B0 * u;
  return y;
}

SaddleSystem SaddleSystem::reduced() const {
  SaddleSystem r;
  r.F = F;
  r.B1 = B1;
  r.B0 = SparseMatrix(0, n_u());
  r.f = f;
  r.g = g.head(n_k());
  r.symmetric = symmetric;
  return r;
}

Discretization::Discretization(Mesh mesh, PressureSpace space)
    : Discretization(mesh, space, boundary_profiles(problem_for(mesh.domain()))) {}

Discretization::Discretization(Mesh mesh, PressureSpace space, const DirichletProfile& profile)
    : mesh_(std::move(mesh)), dofs_(build_dof_map(mesh_, space, profile)) {
  if (mesh_.kind() == ElementKind::triangle) {
    assemble_static<TriangleP2P1>();
  } else {
    assemble_static<QuadQ2Q1>();
  }
  std::vector<Triplet> sel;
  sel.reserve(dofs_.free_dofs.size());
  for (int i = 0; i < dofs_.n_free(); ++i) sel.emplace_back(i, dofs_.free_dofs[static_cast<std::size_t>(i)], 1.0);
  free_selector_ = from_triplets(dofs_.n_free(), dofs_.n_u, sel);
  u_dirichlet_ = Vector::Zero(dofs_.n_u);
  for (const auto& [dof, value] : dofs_.dirichlet_dofs) u_dirichlet_(dof) = value;
}

template <class Element>
void Discretization::assemble_static() {
  constexpr int NV = Element::velocity_nodes;
  constexpr int NP = Element::pressure_nodes;
  const int n_el = mesh_.num_elements();
  const int nn = dofs_.n_nodes;
  const int nk = dofs_.n_k;
  const bool enriched = dofs_.space == PressureSpace::enriched;

  std::vector<Triplet> tk, tm, tb, tq, tr, tl;
  tk.reserve(static_cast<std::size_t>(n_el * NV * NV));
  tm.reserve(static_cast<std::size_t>(n_el * NV * NV));
  tb.reserve(static_cast<std::size_t>(n_el * (NP + 1) * NV * 2));
  tq.reserve(static_cast<std::size_t>(n_el * NP * NP));
  tl.reserve(static_cast<std::size_t>(n_el * NP * NP));
  q0_ = Vector::Zero(dofs_.n_0);

  for (int e = 0; e < n_el; ++e) {
    const ElementGeometry<Element> geo(mesh_, e);
    Eigen::Matrix<double, NV, NV> ke = Eigen::Matrix<double, NV, NV>::Zero();
    Eigen::Matrix<double, NV, NV> me = Eigen::Matrix<double, NV, NV>::Zero();
    Eigen::Matrix<double, NP, NV> bx = Eigen::Matrix<double, NP, NV>::Zero();
    Eigen::Matrix<double, NP, NV> by = Eigen::Matrix<double, NP, NV>::Zero();
    Eigen::Matrix<double, 1, NV> b0x = Eigen::Matrix<double, 1, NV>::Zero();
    Eigen::Matrix<double, 1, NV> b0y = Eigen::Matrix<double, 1, NV>::Zero();
    Eigen::Matrix<double, NP, NP> qe = Eigen::Matrix<double, NP, NP>::Zero();
    Eigen::Matrix<double, NP, NP> le = Eigen::Matrix<double, NP, NP>::Zero();
    Eigen::Matrix<double, 1, NP> re = Eigen::Matrix<double, 1, NP>::Zero();
    double area = 0.0;

    for (const auto& qp : Element::quadrature()) {
      const Eigen::Matrix2d jac = geo.jacobian(qp.xi);
      const Eigen::Matrix2d jinv = jac.inverse();
      const double w = qp.weight * std::abs(jac.determinant());
      const auto phi = Element::velocity_values(qp.xi);
      const Eigen::Matrix<double, NV, 2> dphi = Element::velocity_grads(qp.xi) * jinv;
      const auto psi = Element::pressure_values(qp.xi);
      const Eigen::Matrix<double, NP, 2> dpsi = Element::pressure_grads(qp.xi) * jinv;

      ke.noalias() += w * dphi * dphi.transpose();
      me.noalias() += w * phi * phi.transpose();
      bx.noalias() -= w * psi * dphi.col(0).transpose();
      by.noalias() -= w * psi * dphi.col(1).transpose();
      b0x -= w * dphi.col(0).transpose();
      b0y -= w * dphi.col(1).transpose();
      qe.noalias() += w * psi * psi.transpose();
      le.noalias() += w * dpsi * dpsi.transpose();
      re += w * psi.transpose();
      area += w;
    }

    const int* nodes = dofs_.element(e);
    const auto verts = mesh_.element(e);
    for (int a = 0; a < NV; ++a) {
      for (int b = 0; b < NV; ++b) {
        tk.emplace_back(nodes[a], nodes[b], ke(a, b));
        tm.emplace_back(nodes[a], nodes[b], me(a, b));
      }
    }
    for (int i = 0; i < NP; ++i) {
      const int pi = verts[static_cast<std::size_t>(i)];
      for (int b = 0; b < NV; ++b) {
        tb.emplace_back(pi, nodes[b], bx(i, b));
        tb.emplace_back(pi, nn + nodes[b], by(i, b));
      }
      for (int j = 0; j < NP; ++j) {
        const int pj = verts[static_cast<std::size_t>(j)];
        tq.emplace_back(pi, pj, qe(i, j));
        tl.emplace_back(pi, pj, le(i, j));
      }
    }
    if (enriched) {
      for (int b = 0; b < NV; ++b) {
        tb.emplace_back(nk + e, nodes[b], b0x(b));
        tb.emplace_back(nk + e, nn + nodes[b], b0y(b));
      }
      for (int j = 0; j < NP; ++j) tr.emplace_back(e, verts[static_cast<std::size_t>(j)], re(j));
      q0_(e) = area;
    }
  }

  laplacian_ = from_triplets(nn, nn, tk);
  mass_ = from_triplets(nn, nn, tm);
  b_full_ = from_triplets(dofs_.n_p, dofs_.n_u, tb);
  qk_ = from_triplets(nk, nk, tq);
  pressure_laplacian_ = from_triplets(nk, nk, tl);
  r_ = from_triplets(dofs_.n_0, nk, tr);
}

SparseMatrix Discretization::vector_block(const SparseMatrix& scalar) const {
  const int nn = dofs_.n_nodes;
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(2 * scalar.nonZeros()));
  for (int i = 0; i < scalar.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(scalar, i); it; ++it) {
      t.emplace_back(i, it.col(), it.value());
      t.emplace_back(nn + i, nn + it.col(), it.value());
    }
  }
  return from_triplets(2 * nn, 2 * nn, t);
}

SaddleSystem Discretization::finish(const SparseMatrix& full_velocity_block, bool symmetric) const {
  SaddleSystem s;
  const SparseMatrix st = free_selector_.transpose();
  s.F = free_selector_ * full_velocity_block * st;
  s.f = -(free_selector_ * (full_velocity_block * u_dirichlet_));
  const SparseMatrix b = b_full_ * st;
  s.B1 = b.topRows(dofs_.n_k);
  s.B0 = b.bottomRows(dofs_.n_0);
  s.g = -(b_full_ * u_dirichlet_);
  s.symmetric = symmetric;
  return s;
}

SaddleSystem Discretization::stokes() const {
  return finish(vector_block(laplacian_), true);
}

SaddleSystem Discretization::oseen(const Vector& w, double nu) const {
  if (!(nu > 0.0)) throw std::invalid_argument("oseen: viscosity must be positive");
  if (w.size() != dofs_.n_u) throw std::invalid_argument("oseen: convection field has wrong size");
  const SparseMatrix scalar = nu * laplacian_ + scalar_convection(w);
  return finish(vector_block(scalar), false);
}

SparseMatrix Discretization::scalar_convection(const Vector& w) const {
  if (mesh_.kind() == ElementKind::triangle) return convection_impl<TriangleP2P1>(w, false);
  return convection_impl<QuadQ2Q1>(w, false);
}

template <class Element>
SparseMatrix Discretization::convection_impl(const Vector& w, bool pressure_space) const {
  constexpr int NV = Element::velocity_nodes;
  constexpr int NP = Element::pressure_nodes;
  const int nn = dofs_.n_nodes;
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(mesh_.num_elements() * NV * NV));
  for (int e = 0; e < mesh_.num_elements(); ++e) {
    const ElementGeometry<Element> geo(mesh_, e);
    const int* nodes = dofs_.element(e);
    Eigen::Matrix<double, NV, 1> wx, wy;
    for (int a = 0; a < NV; ++a) {
      wx(a) = w(nodes[a]);
      wy(a) = w(nn + nodes[a]);
    }
    if (pressure_space) {
      Eigen::Matrix<double, NP, NP> ne = Eigen::Matrix<double, NP, NP>::Zero();
      for (const auto& qp : Element::quadrature()) {
        const Eigen::Matrix2d jac = geo.jacobian(qp.xi);
        const double wt = qp.weight * std::abs(jac.determinant());
        const auto phi = Element::velocity_values(qp.xi);
        const Eigen::Vector2d wq(phi.dot(wx), phi.dot(wy));
        const auto psi = Element::pressure_values(qp.xi);
        const Eigen::Matrix<double, NP, 2> dpsi = Element::pressure_grads(qp.xi) * jac.inverse();
        ne.noalias() += wt * psi * (dpsi * wq).transpose();
      }
      const auto verts = mesh_.element(e);
      for (int i = 0; i < NP; ++i)
        for (int j = 0; j < NP; ++j)
          t.emplace_back(verts[static_cast<std::size_t>(i)], verts[static_cast<std::size_t>(j)], ne(i, j));
    } else {
      Eigen::Matrix<double, NV, NV> ne = Eigen::Matrix<double, NV, NV>::Zero();
      for (const auto& qp : Element::quadrature()) {
        const Eigen::Matrix2d jac = geo.jacobian(qp.xi);
        const double wt = qp.weight * std::abs(jac.determinant());
        const auto phi = Element::velocity_values(qp.xi);
        const Eigen::Matrix<double, NV, 2> dphi = Element::velocity_grads(qp.xi) * jac.inverse();
        const Eigen::Vector2d wq(phi.dot(wx), phi.dot(wy));
        ne.noalias() += wt * phi * (dphi * wq).transpose();
      }
      for (int a = 0; a < NV; ++a)
        for (int b = 0; b < NV; ++b) t.emplace_back(nodes[a], nodes[b], ne(a, b));
    }
  }
  const int n = pressure_space ? dofs_.n_k : nn;
  return from_triplets(n, n, t);
}

PressureMassBlocks Discretization::pressure_mass() const {
  PressureMassBlocks m;
  m.Qk = qk_;
  m.R = r_;
  m.Q0 = q0_;
  if (dofs_.space == PressureSpace::taylor_hood) {
    m.MQ = qk_;
    return m;
  }
  const int nk = dofs_.n_k;
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(qk_.nonZeros() + 2 * r_.nonZeros() + q0_.size()));
  for (int i = 0; i < qk_.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(qk_, i); it; ++it) t.emplace_back(i, it.col(), it.value());
  for (int i = 0; i < r_.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(r_, i); it; ++it) {
      t.emplace_back(nk + i, it.col(), it.value());
      t.emplace_back(it.col(), nk + i, it.value());
    }
  }
  for (int e = 0; e < q0_.size(); ++e) t.emplace_back(nk + e, nk + e, q0_(e));
  m.MQ = from_triplets(dofs_.n_p, dofs_.n_p, t);
  return m;
}

template <class Element>
Eigen::Vector2d Discretization::velocity_at(int e, int local_edge, double t, const Vector& w) const {
  const auto rv = reference_vertices<Element>();
  const auto a = static_cast<std::size_t>(local_edge);
  const auto b = static_cast<std::size_t>((local_edge + 1) % Element::vertices);
  const Point2 xi = (1.0 - t) * rv[a] + t * rv[b];
  const auto phi = Element::velocity_values(xi);
  const int* nodes = dofs_.element(e);
  Eigen::Vector2d u = Eigen::Vector2d::Zero();
  for (int n = 0; n < Element::velocity_nodes; ++n) {
    u.x() += phi(n) * w(nodes[n]);
    u.y() += phi(n) * w(dofs_.n_nodes + nodes[n]);
  }
  return u;
}

Vector Discretization::face_fluxes(const Vector& w) const {
  const auto& faces = mesh_.interior_faces();
  Vector q(static_cast<Eigen::Index>(faces.size()));
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& face = faces[f];
    const int a = local_edge_index(mesh_, face.elem_a, face.vertices[0], face.vertices[1]);
    double flux = 0.0;
    for (const auto& qp : line_quadrature()) {
      const Eigen::Vector2d u = mesh_.kind() == ElementKind::triangle
                                    ? velocity_at<TriangleP2P1>(face.elem_a, a, qp.xi.x(), w)
                                    : velocity_at<QuadQ2Q1>(face.elem_a, a, qp.xi.x(), w);
      flux += qp.weight * u.dot(face.normal);
    }
    q(static_cast<Eigen::Index>(f)) = flux * face.length;
  }
  return q;
}

Vector Discretization::boundary_fluxes(const Vector& w) const {
  const auto& edges = mesh_.boundary_edges();
  Vector q(static_cast<Eigen::Index>(edges.size()));
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& edge = edges[k];
    const int a = local_edge_index(mesh_, edge.element, edge.vertices[0], edge.vertices[1]);
    double flux = 0.0;
    for (const auto& qp : line_quadrature()) {
      const Eigen::Vector2d u = mesh_.kind() == ElementKind::triangle
                                    ? velocity_at<TriangleP2P1>(edge.element, a, qp.xi.x(), w)
                                    : velocity_at<QuadQ2Q1>(edge.element, a, qp.xi.x(), w);
      flux += qp.weight * u.dot(edge.normal);
    }
    q(static_cast<Eigen::Index>(k)) = flux * edge.length;
  }
  return q;
}

PcdOperators Discretization::pcd(const Vector& w, double nu) const {
  if (!(nu > 0.0)) throw std::invalid_argument("pcd: viscosity must be positive");
  if (!mesh_.has_face_topology()) throw TopologyError("pcd: mesh has no face topology");
  PcdOperators op;
  op.Q1 = qk_;
  op.F1 = nu * pressure_laplacian_ +
          (mesh_.kind() == ElementKind::triangle ? convection_impl<TriangleP2P1>(w, true)
                                                 : convection_impl<QuadQ2Q1>(w, true));
  {
    // Robin condition -nu dp/dn + (w.n) p = 0 on inflow edges.
    std::vector<Triplet> t;
    const int nv = mesh_.vertices_per_element();
    for (const auto& edge : mesh_.boundary_edges()) {
      if (edge.tag != BoundaryTag::inflow) continue;
      const int a = local_edge_index(mesh_, edge.element, edge.vertices[0], edge.vertices[1]);
      const auto v = mesh_.element(edge.element);
      const int va = v[static_cast<std::size_t>(a)];
      const int vb = v[static_cast<std::size_t>((a + 1) % nv)];
      for (const auto& qp : line_quadrature()) {
        const double s = qp.xi.x();
        const Eigen::Vector2d u = mesh_.kind() == ElementKind::triangle
                                      ? velocity_at<TriangleP2P1>(edge.element, a, s, w)
                                      : velocity_at<QuadQ2Q1>(edge.element, a, s, w);
        const double c = -u.dot(edge.normal) * qp.weight * edge.length;
        t.emplace_back(va, va, c * (1.0 - s) * (1.0 - s));
        t.emplace_back(va, vb, c * (1.0 - s) * s);
        t.emplace_back(vb, va, c * s * (1.0 - s));
        t.emplace_back(vb, vb, c * s * s);
      }
    }
    if (!t.empty()) op.F1 += from_triplets(dofs_.n_k, dofs_.n_k, t);
  }
  const SparseMatrix mv = vector_block(mass_);
  const Vector mdiag_full = mv.diagonal();
  op.Mdiag = dofs_.restrict_to_free(mdiag_full);

  if (dofs_.space == PressureSpace::enriched) {
    op.Q0 = q0_;
    const auto& faces = mesh_.interior_faces();
    const Vector q = face_fluxes(w);
    std::vector<Triplet> t;
    t.reserve(faces.size() * 6);
    for (std::size_t f = 0; f < faces.size(); ++f) {
      const int i = faces[f].elem_a;
      const int j = faces[f].elem_b;
      const double he = (mesh_.element_centroid(j) - mesh_.element_centroid(i)).norm();
      const double d = nu * faces[f].length / he;
      t.emplace_back(i, i, d);
      t.emplace_back(i, j, -d);
      t.emplace_back(j, i, -d);
      t.emplace_back(j, j, d);
      // Upwind: the flux leaving the upstream cell enters the downstream one.
      const double qf = q(static_cast<Eigen::Index>(f));
      if (qf > 0.0) {
        t.emplace_back(i, i, qf);
        t.emplace_back(j, i, -qf);
      } else {
        t.emplace_back(j, j, -qf);
        t.emplace_back(i, j, qf);
      }
    }
    const auto& edges = mesh_.boundary_edges();
    const Vector qb = boundary_fluxes(w);
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const double qk = qb(static_cast<Eigen::Index>(k));
      if (edges[k].tag == BoundaryTag::outflow && qk > 0.0) {
        t.emplace_back(edges[k].element, edges[k].element, qk);
      }
    }
    op.F0 = from_triplets(dofs_.n_0, dofs_.n_0, t);
  } else {
    op.F0 = SparseMatrix(0, 0);
  }
  return op;
}

template <class Element>
DivergenceDiagnostics Discretization::divergence_impl(const Vector& u) const {
  constexpr int NV = Element::velocity_nodes;
  const int nn = dofs_.n_nodes;
  DivergenceDiagnostics d;
  d.l2_norm = Vector::Zero(mesh_.num_elements());
  d.mean = Vector::Zero(mesh_.num_elements());
  double total = 0.0;
  for (int e = 0; e < mesh_.num_elements(); ++e) {
    const ElementGeometry<Element> geo(mesh_, e);
    const int* nodes = dofs_.element(e);
    Eigen::Matrix<double, NV, 1> ux, uy;
    for (int a = 0; a < NV; ++a) {
      ux(a) = u(nodes[a]);
      uy(a) = u(nn + nodes[a]);
    }
    double sq = 0.0, mean = 0.0;
    for (const auto& qp : Element::quadrature()) {
      const Eigen::Matrix2d jac = geo.jacobian(qp.xi);
      const double wt = qp.weight * std::abs(jac.determinant());
      const Eigen::Matrix<double, NV, 2> dphi = Element::velocity_grads(qp.xi) * jac.inverse();
      const double div = dphi.col(0).dot(ux) + dphi.col(1).dot(uy);
      sq += wt * div * div;
      mean += wt * div;
    }
    d.l2_norm(e) = std::sqrt(sq);
    d.mean(e) = mean;
    total += sq;
  }
  d.global_l2 = std::sqrt(total);
  return d;
}

DivergenceDiagnostics Discretization::divergence(const Vector& u) const {
  if (u.size() != dofs_.n_u) throw std::invalid_argument("divergence: velocity has wrong size");
  if (mesh_.kind() == ElementKind::triangle) return divergence_impl<TriangleP2P1>(u);
  return divergence_impl<QuadQ2Q1>(u);
}

std::pair<SaddleSystem, DofMap> assemble_stokes(const Mesh& mesh, PressureSpace space) {
  const Discretization d(mesh, space);
  return {d.stokes(), d.dofs()};
}

SaddleSystem assemble_oseen(const Mesh& mesh, PressureSpace space, const Vector& w, double nu) {
  return Discretization(mesh, space).oseen(w, nu);
}

PressureMassBlocks assemble_pressure_mass(const Mesh& mesh, PressureSpace space) {
  return Discretization(mesh, space).pressure_mass();
}

PcdOperators assemble_pcd(const Mesh& mesh, PressureSpace space, const Vector& w, double nu) {
  return Discretization(mesh, space).pcd(w, nu);
}

}  // namespace thfem
