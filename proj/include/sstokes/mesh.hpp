#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace sstokes {

/// Structured triangulation of the unit square.
///
/// Nodes are numbered lexicographically by (row, column): node (i, j) sits at
/// (i/n, j/n) and has index j*(n+1) + i. Every cell is cut along its
/// lower-left to upper-right diagonal; cell (i, j) owns triangles 2*(j*n+i)
/// (below the diagonal) and 2*(j*n+i)+1 (above it), both counter-clockwise.
template <typename Scalar = double>
struct Mesh {
  using Point = Eigen::Matrix<Scalar, 2, 1>;

  int n = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 2> nodes;
  Eigen::Matrix<int, Eigen::Dynamic, 3> triangles;
  std::vector<bool> boundary_node;

  Scalar h() const { return Scalar(1) / Scalar(n); }
  int num_nodes() const { return static_cast<int>(nodes.rows()); }
  int num_triangles() const { return static_cast<int>(triangles.rows()); }

  Point node(int i) const { return nodes.row(i).transpose(); }

  Point vertex(int tri, int local) const { return node(triangles(tri, local)); }

  Point centroid(int tri) const {
    return (vertex(tri, 0) + vertex(tri, 1) + vertex(tri, 2)) / Scalar(3);
  }

  Scalar signed_area(int tri) const {
    const Point a = vertex(tri, 0);
    const Point b = vertex(tri, 1);
    const Point c = vertex(tri, 2);
    return ((b - a).x() * (c - a).y() - (c - a).x() * (b - a).y()) / Scalar(2);
  }

  /// Index of a triangle containing p. Points on shared edges resolve to the
  /// lower/left cell and to the sub-diagonal triangle.
  int locate(const Point& p) const {
    using std::floor;
    const Scalar sx = p.x() * Scalar(n);
    const Scalar sy = p.y() * Scalar(n);
    const int i = std::clamp(static_cast<int>(floor(sx)), 0, n - 1);
    const int j = std::clamp(static_cast<int>(floor(sy)), 0, n - 1);
    const bool upper = (sy - Scalar(j)) > (sx - Scalar(i));
    return 2 * (j * n + i) + (upper ? 1 : 0);
  }

  /// Barycentric coordinates of p with respect to triangle tri.
  Eigen::Matrix<Scalar, 3, 1> barycentric(int tri, const Point& p) const {
    const Point a = vertex(tri, 0);
    const Point b = vertex(tri, 1);
    const Point c = vertex(tri, 2);
    const Scalar det = (b - a).x() * (c - a).y() - (c - a).x() * (b - a).y();
    const Scalar l1 = ((p - a).x() * (c - a).y() - (c - a).x() * (p - a).y()) / det;
    const Scalar l2 = ((b - a).x() * (p - a).y() - (p - a).x() * (b - a).y()) / det;
    return {Scalar(1) - l1 - l2, l1, l2};
  }
};

template <typename Scalar = double>
Mesh<Scalar> build_uniform_mesh(int n) {
  if (n < 1) {
    throw std::invalid_argument("build_uniform_mesh: n must be >= 1");
  }
  Mesh<Scalar> mesh;
  mesh.n = n;
  const int per_side = n + 1;
  mesh.nodes.resize(per_side * per_side, 2);
  mesh.boundary_node.assign(per_side * per_side, false);
  for (int j = 0; j < per_side; ++j) {
    for (int i = 0; i < per_side; ++i) {
      const int id = j * per_side + i;
      mesh.nodes(id, 0) = Scalar(i) / Scalar(n);
      mesh.nodes(id, 1) = Scalar(j) / Scalar(n);
      mesh.boundary_node[id] = (i == 0 || j == 0 || i == n || j == n);
    }
  }

  mesh.triangles.resize(2 * n * n, 3);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = j * per_side + i;
      const int v10 = v00 + 1;
      const int v01 = v00 + per_side;
      const int v11 = v01 + 1;
      const int cell = j * n + i;
      mesh.triangles.row(2 * cell) << v00, v10, v11;
      mesh.triangles.row(2 * cell + 1) << v00, v11, v01;
    }
  }
  return mesh;
}

}  // namespace sstokes
