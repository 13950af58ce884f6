#pragma once

#include <array>
#include <cmath>
#include <span>

#include <Eigen/Core>
#include <Eigen/LU>

#include "thfem/mesh.hpp"

namespace thfem {

struct QuadraturePoint {
  Point2 xi;
  double weight;
};

// Degree-5 seven-point rule on the reference triangle {xi, eta >= 0, xi + eta <= 1}.
inline std::span<const QuadraturePoint> triangle_quadrature() {
  static const std::array<QuadraturePoint, 7> rule = [] {
    const double s = std::sqrt(15.0);
    const double a = (6.0 - s) / 21.0, b = (9.0 + 2.0 * s) / 21.0;
    const double c = (6.0 + s) / 21.0, d = (9.0 - 2.0 * s) / 21.0;
    const double wa = (155.0 - s) / 2400.0, wc = (155.0 + s) / 2400.0;
    return std::array<QuadraturePoint, 7>{{{Point2(1.0 / 3.0, 1.0 / 3.0), 9.0 / 80.0},
                                           {Point2(a, a), wa},
                                           {Point2(b, a), wa},
                                           {Point2(a, b), wa},
                                           {Point2(c, c), wc},
                                           {Point2(d, c), wc},
                                           {Point2(c, d), wc}}};
  }();
  return rule;
}

// Three-point Gauss rule on [0, 1].
inline std::span<const QuadraturePoint> line_quadrature() {
  static const std::array<QuadraturePoint, 3> rule = [] {
    const double g = std::sqrt(0.6) / 2.0;
    return std::array<QuadraturePoint, 3>{{{Point2(0.5 - g, 0.0), 5.0 / 18.0},
                                           {Point2(0.5, 0.0), 8.0 / 18.0},
                                           {Point2(0.5 + g, 0.0), 5.0 / 18.0}}};
  }();
  return rule;
}

// 3x3 tensor Gauss rule on [0, 1]^2.
inline std::span<const QuadraturePoint> quad_quadrature() {
  static const std::array<QuadraturePoint, 9> rule = [] {
    std::array<QuadraturePoint, 9> r{};
    const auto line = line_quadrature();
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t i = 0; i < 3; ++i)
        r[3 * j + i] = {Point2(line[i].xi.x(), line[j].xi.x()), line[i].weight * line[j].weight};
    return r;
  }();
  return rule;
}

/// P2 velocity / P1 pressure on the reference triangle.
///
/// Velocity node order: vertices 0,1,2 then midpoints of edges 01, 12, 20.
struct TriangleP2P1 {
  static constexpr int velocity_nodes = 6;
  static constexpr int pressure_nodes = 3;
  static constexpr int vertices = 3;
  using VelocityValues = Eigen::Matrix<double, velocity_nodes, 1>;
  using VelocityGrads = Eigen::Matrix<double, velocity_nodes, 2>;
  using PressureValues = Eigen::Matrix<double, pressure_nodes, 1>;
  using PressureGrads = Eigen::Matrix<double, pressure_nodes, 2>;

  static std::span<const QuadraturePoint> quadrature() { return triangle_quadrature(); }

  static std::array<Point2, velocity_nodes> velocity_node_positions() {
    return {Point2(0, 0), Point2(1, 0), Point2(0, 1),
            Point2(0.5, 0), Point2(0.5, 0.5), Point2(0, 0.5)};
  }

  static PressureValues pressure_values(const Point2& xi) {
    return PressureValues(1.0 - xi.x() - xi.y(), xi.x(), xi.y());
  }
  static PressureGrads pressure_grads(const Point2&) {
    PressureGrads g;
    g << -1, -1, 1, 0, 0, 1;
    return g;
  }

  static VelocityValues velocity_values(const Point2& xi) {
    const PressureValues l = pressure_values(xi);
    VelocityValues v;
    v << l(0) * (2 * l(0) - 1), l(1) * (2 * l(1) - 1), l(2) * (2 * l(2) - 1),
        4 * l(0) * l(1), 4 * l(1) * l(2), 4 * l(2) * l(0);
    return v;
  }
  static VelocityGrads velocity_grads(const Point2& xi) {
    const PressureValues l = pressure_values(xi);
    const PressureGrads dl = pressure_grads(xi);
    VelocityGrads g;
    for (int a = 0; a < 3; ++a) g.row(a) = (4 * l(a) - 1) * dl.row(a);
    g.row(3) = 4 * (l(0) * dl.row(1) + l(1) * dl.row(0));
    g.row(4) = 4 * (l(1) * dl.row(2) + l(2) * dl.row(1));
    g.row(5) = 4 * (l(2) * dl.row(0) + l(0) * dl.row(2));
    return g;
  }
};

/// Q2 velocity / Q1 pressure on the reference square [0, 1]^2.
///
/// Velocity node order: vertices 0..3 (counter-clockwise from the origin),
/// midpoints of edges 01, 12, 23, 30, then the centre.
struct QuadQ2Q1 {
  static constexpr int velocity_nodes = 9;
  static constexpr int pressure_nodes = 4;
  static constexpr int vertices = 4;
  using VelocityValues = Eigen::Matrix<double, velocity_nodes, 1>;
  using VelocityGrads = Eigen::Matrix<double, velocity_nodes, 2>;
  using PressureValues = Eigen::Matrix<double, pressure_nodes, 1>;
  using PressureGrads = Eigen::Matrix<double, pressure_nodes, 2>;

  static std::span<const QuadraturePoint> quadrature() { return quad_quadrature(); }

  static std::array<Point2, velocity_nodes> velocity_node_positions() {
    return {Point2(0, 0),   Point2(1, 0),   Point2(1, 1),   Point2(0, 1),  Point2(0.5, 0),
            Point2(1, 0.5), Point2(0.5, 1), Point2(0, 0.5), Point2(0.5, 0.5)};
  }

  static PressureValues pressure_values(const Point2& xi) {
    const double s = xi.x(), t = xi.y();
    return PressureValues((1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t);
  }
  static PressureGrads pressure_grads(const Point2& xi) {
    const double s = xi.x(), t = xi.y();
    PressureGrads g;
    g << -(1 - t), -(1 - s), (1 - t), -s, t, s, -t, (1 - s);
    return g;
  }

  static VelocityValues velocity_values(const Point2& xi) {
    VelocityValues v;
    const auto ls = lagrange(xi.x()), lt = lagrange(xi.y());
    for (int n = 0; n < velocity_nodes; ++n) v(n) = ls[kIndex[n][0]] * lt[kIndex[n][1]];
    return v;
  }
  static VelocityGrads velocity_grads(const Point2& xi) {
    VelocityGrads g;
    const auto ls = lagrange(xi.x()), lt = lagrange(xi.y());
    const auto ds = dlagrange(xi.x()), dt = dlagrange(xi.y());
    for (int n = 0; n < velocity_nodes; ++n) {
      g(n, 0) = ds[kIndex[n][0]] * lt[kIndex[n][1]];
      g(n, 1) = ls[kIndex[n][0]] * dt[kIndex[n][1]];
    }
    return g;
  }

 private:
  // 1D quadratic Lagrange basis at t = 0, 1/2, 1.
  static std::array<double, 3> lagrange(double t) {
    return {(1 - t) * (1 - 2 * t), 4 * t * (1 - t), t * (2 * t - 1)};
  }
  static std::array<double, 3> dlagrange(double t) {
    return {4 * t - 3, 4 - 8 * t, 4 * t - 1};
  }
  static constexpr int kIndex[9][2] = {{0, 0}, {2, 0}, {2, 2}, {0, 2}, {1, 0},
                                       {2, 1}, {1, 2}, {0, 1}, {1, 1}};
};

/// Geometry of one element: the P1/Q1 map from the reference cell.
template <class Element>
struct ElementGeometry {
  Eigen::Matrix<double, Element::vertices, 2> coords;

  ElementGeometry(const Mesh& mesh, int e) {
    const auto v = mesh.element(e);
    for (int a = 0; a < Element::vertices; ++a)
      coords.row(a) = mesh.vertex(v[static_cast<std::size_t>(a)]).transpose();
  }

  Point2 map(const Point2& xi) const {
    return coords.transpose() * Element::pressure_values(xi);
  }
  Eigen::Matrix2d jacobian(const Point2& xi) const {
    return coords.transpose() * Element::pressure_grads(xi);
  }
};

}  // namespace thfem
