#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace thfem {

using Point2 = Eigen::Vector2d;

enum class ElementKind { triangle, quad };
enum class BoundaryTag { wall, lid, inflow, outflow };
enum class Domain { cavity, step };

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An edge shared by two elements. `normal` points from `elem_a` into `elem_b`.
struct InteriorFace {
  int elem_a = -1;
  int elem_b = -1;
  std::array<int, 2> vertices{};
  double length = 0.0;
  Point2 normal = Point2::Zero();
};

/// An edge on the domain boundary; `normal` is the outward unit normal.
struct BoundaryEdge {
  int element = -1;
  std::array<int, 2> vertices{};
  BoundaryTag tag = BoundaryTag::wall;
  double length = 0.0;
  Point2 normal = Point2::Zero();
};

/// Conforming 2D mesh of triangles or quadrilaterals.
///
/// Vertices are numbered lexicographically by (y, x). Element vertex lists
/// are counter-clockwise. Immutable once built by one of the factory
/// functions below.
class Mesh {
 public:
  Mesh() = default;
  Mesh(Domain domain, ElementKind kind, int level, double h,
       std::vector<Point2> vertices, std::vector<int> connectivity);

  Domain domain() const { return domain_; }
  ElementKind kind() const { return kind_; }
  int level() const { return level_; }
  /// Maximum element diameter.
  double h() const { return h_; }

  int vertices_per_element() const { return kind_ == ElementKind::triangle ? 3 : 4; }
  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_elements() const {
    return static_cast<int>(connectivity_.size()) / vertices_per_element();
  }

  const std::vector<Point2>& vertices() const { return vertices_; }
  const Point2& vertex(int i) const { return vertices_[static_cast<std::size_t>(i)]; }
  std::span<const int> element(int e) const {
    const auto n = static_cast<std::size_t>(vertices_per_element());
    return {connectivity_.data() + static_cast<std::size_t>(e) * n, n};
  }

  double element_area(int e) const;
  Point2 element_centroid(int e) const;

  const std::vector<InteriorFace>& interior_faces() const { return interior_faces_; }
  const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_edges_; }
  bool has_face_topology() const { return topology_built_; }

  friend Mesh face_topology(Mesh mesh);

 private:
  Domain domain_ = Domain::cavity;
  ElementKind kind_ = ElementKind::triangle;
  int level_ = 0;
  double h_ = 0.0;
  std::vector<Point2> vertices_;
  std::vector<int> connectivity_;
  std::vector<InteriorFace> interior_faces_;
  std::vector<BoundaryEdge> boundary_edges_;
  bool topology_built_ = false;
};

/// Uniform mesh of [-1,1]^2 with 2^level squares per side. Triangles bisect
/// each square along its bottom-left to top-right diagonal, except squares
/// sitting in a convex corner off that diagonal, which are cut the other way
/// so that no triangle has two boundary edges. The edge y = 1 is tagged
/// `lid`, all others `wall`.
Mesh build_cavity_mesh(int level, ElementKind kind);

/// Backward-facing step [-1,0]x[0,1] u [0,5]x[-1,1] with squares of side
/// 2^-(level-1). x = -1 is `inflow`, x = 5 is `outflow`.
Mesh build_step_mesh(int level, ElementKind kind);

/// Populates interior faces and tagged boundary edges. Throws TopologyError
/// if an edge is shared by more than two elements or a hanging vertex is
/// found on a boundary edge.
Mesh face_topology(Mesh mesh);

/// Boundary tag of a boundary edge with midpoint `mid` for the given domain.
BoundaryTag boundary_tag(Domain domain, const Point2& mid);

/// Plain text listing of vertices, elements and edges, one record per line.
void write_mesh(std::ostream& out, const Mesh& mesh);

std::string to_string(BoundaryTag tag);
std::string to_string(ElementKind kind);

}  // namespace thfem
