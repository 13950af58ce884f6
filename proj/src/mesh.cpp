#include "thfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <utility>

namespace thfem {

namespace {

using LatticeKey = std::pair<long, long>;  // (row j, column i)

// Builds a mesh from unit lattice squares given by their lower-left corners.
Mesh mesh_from_squares(Domain domain, ElementKind kind, int level, const Point2& origin,
                       double side, const std::vector<LatticeKey>& squares) {
  std::set<LatticeKey> corners;
  for (const auto& [j, i] : squares) {
    corners.insert({j, i});
    corners.insert({j, i + 1});
    corners.insert({j + 1, i});
    corners.insert({j + 1, i + 1});
  }

  // std::set orders (j, i) lexicographically, i.e. by (y, x).
  std::map<LatticeKey, int> index;
  std::vector<Point2> vertices;
  vertices.reserve(corners.size());
  for (const auto& key : corners) {
    index.emplace(key, static_cast<int>(vertices.size()));
    vertices.emplace_back(origin.x() + side * static_cast<double>(key.second),
                          origin.y() + side * static_cast<double>(key.first));
  }

  std::vector<LatticeKey> ordered = squares;
  std::sort(ordered.begin(), ordered.end());

  const std::set<LatticeKey> present(ordered.begin(), ordered.end());
  auto open = [&](long j, long i) { return present.count({j, i}) == 0; };

  std::vector<int> conn;
  conn.reserve(ordered.size() * (kind == ElementKind::triangle ? 6 : 4));
  for (const auto& [j, i] : ordered) {
    const int v00 = index.at({j, i});
    const int v10 = index.at({j, i + 1});
    const int v11 = index.at({j + 1, i + 1});
    const int v01 = index.at({j + 1, i});
    // Cut bottom-left to top-right, except where that would leave a triangle
    // with two boundary edges (a convex corner off the diagonal).
    const bool anti = (open(j - 1, i) && open(j, i + 1)) || (open(j + 1, i) && open(j, i - 1));
    if (kind == ElementKind::triangle && anti) {
      conn.insert(conn.end(), {v00, v10, v01, v10, v11, v01});
    } else if (kind == ElementKind::triangle) {
      conn.insert(conn.end(), {v00, v10, v11, v00, v11, v01});
    } else {
      conn.insert(conn.end(), {v00, v10, v11, v01});
    }
  }
  const double h = side * std::sqrt(2.0);
  return face_topology(Mesh(domain, kind, level, h, std::move(vertices), std::move(conn)));
}

}  // namespace

Mesh::Mesh(Domain domain, ElementKind kind, int level, double h, std::vector<Point2> vertices,
           std::vector<int> connectivity)
    : domain_(domain),
      kind_(kind),
      level_(level),
      h_(h),
      vertices_(std::move(vertices)),
      connectivity_(std::move(connectivity)) {
  if (connectivity_.size() % static_cast<std::size_t>(vertices_per_element()) != 0) {
    throw TopologyError("connectivity length is not a multiple of the element size");
  }
}

double Mesh::element_area(int e) const {
  const auto v = element(e);
  double twice = 0.0;
  for (std::size_t a = 0; a < v.size(); ++a) {
    const Point2& p = vertex(v[a]);
    const Point2& q = vertex(v[(a + 1) % v.size()]);
    twice += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * twice;
}

Point2 Mesh::element_centroid(int e) const {
  const auto v = element(e);
  Point2 c = Point2::Zero();
  for (int id : v) c += vertex(id);
  return c / static_cast<double>(v.size());
}

Mesh build_cavity_mesh(int level, ElementKind kind) {
  if (level < 1) throw std::invalid_argument("cavity mesh level must be >= 1");
  const long n = 1L << level;
  std::vector<LatticeKey> squares;
  squares.reserve(static_cast<std::size_t>(n * n));
  for (long j = 0; j < n; ++j)
    for (long i = 0; i < n; ++i) squares.emplace_back(j, i);
  return mesh_from_squares(Domain::cavity, kind, level, Point2(-1.0, -1.0),
                           2.0 / static_cast<double>(n), squares);
}

Mesh build_step_mesh(int level, ElementKind kind) {
  if (level < 1) throw std::invalid_argument("step mesh level must be >= 1");
  const long m = 1L << (level - 1);  // squares per unit length
  std::vector<LatticeKey> squares;
  squares.reserve(static_cast<std::size_t>(11 * m * m));
  // Inlet channel [-1,0] x [0,1].
  for (long j = m; j < 2 * m; ++j)
    for (long i = 0; i < m; ++i) squares.emplace_back(j, i);
  // Main channel [0,5] x [-1,1].
  for (long j = 0; j < 2 * m; ++j)
    for (long i = m; i < 6 * m; ++i) squares.emplace_back(j, i);
  return mesh_from_squares(Domain::step, kind, level, Point2(-1.0, -1.0),
                           1.0 / static_cast<double>(m), squares);
}

BoundaryTag boundary_tag(Domain domain, const Point2& mid) {
  constexpr double tol = 1e-12;
  if (domain == Domain::cavity) {
    return std::abs(mid.y() - 1.0) < tol ? BoundaryTag::lid : BoundaryTag::wall;
  }
  if (std::abs(mid.x() + 1.0) < tol) return BoundaryTag::inflow;
  if (std::abs(mid.x() - 5.0) < tol) return BoundaryTag::outflow;
  return BoundaryTag::wall;
}

Mesh face_topology(Mesh mesh) {
  struct Incidence {
    int element;
    std::array<int, 2> vertices;
  };
  std::map<std::pair<int, int>, std::vector<Incidence>> edges;
  const int nv = mesh.vertices_per_element();
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto v = mesh.element(e);
    for (int a = 0; a < nv; ++a) {
      const int p = v[static_cast<std::size_t>(a)];
      const int q = v[static_cast<std::size_t>((a + 1) % nv)];
      edges[{std::min(p, q), std::max(p, q)}].push_back({e, {p, q}});
    }
  }

  std::set<std::pair<double, double>> vertex_set;
  for (const auto& p : mesh.vertices_) vertex_set.insert({p.x(), p.y()});

  mesh.interior_faces_.clear();
  mesh.boundary_edges_.clear();
  for (const auto& [key, inc] : edges) {
    const Point2& p0 = mesh.vertex(key.first);
    const Point2& p1 = mesh.vertex(key.second);
    const Point2 t = p1 - p0;
    const double len = t.norm();
    Point2 n(t.y() / len, -t.x() / len);
    const Point2 mid = 0.5 * (p0 + p1);

    if (inc.size() == 2) {
      InteriorFace f;
      f.elem_a = inc[0].element;
      f.elem_b = inc[1].element;
      f.vertices = {key.first, key.second};
      f.length = len;
      const Point2 d = mesh.element_centroid(f.elem_b) - mesh.element_centroid(f.elem_a);
      f.normal = n.dot(d) > 0.0 ? n : Point2(-n);
      mesh.interior_faces_.push_back(f);
    } else if (inc.size() == 1) {
      if (vertex_set.contains({mid.x(), mid.y()})) {
        throw TopologyError("hanging vertex on boundary edge (" + std::to_string(key.first) +
                            ", " + std::to_string(key.second) + ")");
      }
      BoundaryEdge b;
      b.element = inc[0].element;
      b.vertices = inc[0].vertices;
      b.length = len;
      const Point2 d = mid - mesh.element_centroid(b.element);
      b.normal = n.dot(d) > 0.0 ? n : Point2(-n);
      b.tag = boundary_tag(mesh.domain_, mid);
      mesh.boundary_edges_.push_back(b);
    } else {
      throw TopologyError("edge (" + std::to_string(key.first) + ", " +
                          std::to_string(key.second) + ") shared by " +
                          std::to_string(inc.size()) + " elements");
    }
  }
  mesh.topology_built_ = true;
  return mesh;
}

std::string to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::wall: return "wall";
    case BoundaryTag::lid: return "lid";
    case BoundaryTag::inflow: return "inflow";
    case BoundaryTag::outflow: return "outflow";
  }
  return "unknown";
}

std::string to_string(ElementKind kind) {
  return kind == ElementKind::triangle ? "triangle" : "quad";
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
  const auto old = out.precision(17);
  out << "vertices " << mesh.num_vertices() << '\n';
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    out << "v " << i << ' ' << mesh.vertex(i).x() << ' ' << mesh.vertex(i).y() << '\n';
  }
  out << "elements " << mesh.num_elements() << ' ' << to_string(mesh.kind()) << '\n';
  for (int e = 0; e < mesh.num_elements(); ++e) {
    out << "e " << e;
    for (int v : mesh.element(e)) out << ' ' << v;
    out << '\n';
  }
  out << "interior_faces " << mesh.interior_faces().size() << '\n';
  for (const auto& f : mesh.interior_faces()) {
    out << "f " << f.elem_a << ' ' << f.elem_b << ' ' << f.vertices[0] << ' ' << f.vertices[1]
        << '\n';
  }
  out << "boundary_edges " << mesh.boundary_edges().size() << '\n';
  for (const auto& b : mesh.boundary_edges()) {
    out << "b " << b.element << ' ' << b.vertices[0] << ' ' << b.vertices[1] << ' '
        << to_string(b.tag) << '\n';
  }
  out.precision(old);
}

}  // namespace thfem
