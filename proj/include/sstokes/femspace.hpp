#pragma once

#include "sstokes/mesh.hpp"

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <vector>

namespace sstokes {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Affine data of one triangle: area and the constant gradients of its
/// barycentric coordinates (one row per vertex).
template <typename Scalar = double>
struct ElementGeometry {
  Scalar area;
  Eigen::Matrix<Scalar, 3, 2> grad_lambda;
};

template <typename Scalar>
ElementGeometry<Scalar> element_geometry(const Eigen::Matrix<Scalar, 2, 1>& a,
                                         const Eigen::Matrix<Scalar, 2, 1>& b,
                                         const Eigen::Matrix<Scalar, 2, 1>& c) {
  const Scalar det = (b - a).x() * (c - a).y() - (c - a).x() * (b - a).y();
  ElementGeometry<Scalar> g;
  g.area = det / Scalar(2);
  g.grad_lambda << b.y() - c.y(), c.x() - b.x(),
                   c.y() - a.y(), a.x() - c.x(),
                   a.y() - b.y(), b.x() - a.x();
  g.grad_lambda /= det;
  return g;
}

/// Scalar MINI shape functions on one triangle: three barycentric hats and the
/// cubic bubble 27*l0*l1*l2 (equal to one at the centroid).
template <typename Scalar>
Eigen::Matrix<Scalar, 4, 1> mini_values(const Eigen::Matrix<Scalar, 3, 1>& lambda) {
  return {lambda(0), lambda(1), lambda(2), Scalar(27) * lambda(0) * lambda(1) * lambda(2)};
}

/// Gradients of the four shape functions, one row each.
template <typename Scalar>
Eigen::Matrix<Scalar, 4, 2> mini_gradients(const ElementGeometry<Scalar>& g,
                                           const Eigen::Matrix<Scalar, 3, 1>& lambda) {
  Eigen::Matrix<Scalar, 4, 2> grads;
  grads.template topRows<3>() = g.grad_lambda;
  grads.row(3) = Scalar(27) * (lambda(1) * lambda(2) * g.grad_lambda.row(0) +
                               lambda(0) * lambda(2) * g.grad_lambda.row(1) +
                               lambda(0) * lambda(1) * g.grad_lambda.row(2));
  return grads;
}

/// MINI velocity space (P1 + bubble, two components) paired with continuous
/// P1 pressure.
///
/// Velocity DOF layout: component c occupies the block
/// [c*(Nn+Nt), (c+1)*(Nn+Nt)); inside a block the Nn vertex DOFs come first
/// and the Nt bubble DOFs follow. Pressure DOFs coincide with node indices.
template <typename Scalar = double>
class MixedSpaces {
 public:
  explicit MixedSpaces(Mesh<Scalar> mesh) : mesh_(std::move(mesh)) {
    const int block = mesh_.num_nodes() + mesh_.num_triangles();
    block_ = block;
    free_index_.assign(2 * block, -1);
    for (int c = 0; c < 2; ++c) {
      for (int v = 0; v < mesh_.num_nodes(); ++v) {
        if (mesh_.boundary_node[v]) {
          dirichlet_dofs_.push_back(c * block + v);
        }
      }
    }
    std::vector<bool> constrained(2 * block, false);
    for (int d : dirichlet_dofs_) {
      constrained[d] = true;
    }
    for (int d = 0; d < 2 * block; ++d) {
      if (!constrained[d]) {
        free_index_[d] = static_cast<int>(free_dofs_.size());
        free_dofs_.push_back(d);
      }
    }
    geometry_.reserve(mesh_.num_triangles());
    for (int t = 0; t < mesh_.num_triangles(); ++t) {
      geometry_.push_back(element_geometry<Scalar>(mesh_.vertex(t, 0), mesh_.vertex(t, 1), mesh_.vertex(t, 2)));
    }
  }

  const Mesh<Scalar>& mesh() const { return mesh_; }
  int n_vel_dofs() const { return 2 * block_; }
  int n_press_dofs() const { return mesh_.num_nodes(); }
  int component_block() const { return block_; }

  /// Global velocity DOF of local basis function `local` (0..2 vertices,
  /// 3 bubble) and component `comp` on triangle `tri`.
  int vel_dof(int tri, int local, int comp) const {
    const int base = comp * block_;
    return local < 3 ? base + mesh_.triangles(tri, local) : base + mesh_.num_nodes() + tri;
  }

  int press_dof(int tri, int local) const { return mesh_.triangles(tri, local); }

  std::array<int, 8> element_vel_dofs(int tri) const {
    std::array<int, 8> dofs{};
    for (int c = 0; c < 2; ++c) {
      for (int a = 0; a < 4; ++a) {
        dofs[4 * c + a] = vel_dof(tri, a, c);
      }
    }
    return dofs;
  }

  bool is_bubble(int dof) const { return (dof % block_) >= mesh_.num_nodes(); }

  const std::vector<int>& dirichlet_dofs() const { return dirichlet_dofs_; }
  const std::vector<int>& free_dofs() const { return free_dofs_; }
  /// Position of a velocity DOF among the unconstrained ones, or -1.
  int free_index(int dof) const { return free_index_[dof]; }
  int n_free_vel_dofs() const { return static_cast<int>(free_dofs_.size()); }

  const ElementGeometry<Scalar>& geometry(int tri) const { return geometry_[tri]; }

  /// Value of the velocity field with coefficients `u` at barycentric point
  /// `lambda` of triangle `tri`.
  Eigen::Matrix<Scalar, 2, 1> eval_velocity(const Vector<Scalar>& u, int tri,
                                           const Eigen::Matrix<Scalar, 3, 1>& lambda) const {
    const auto phi = mini_values<Scalar>(lambda);
    Eigen::Matrix<Scalar, 2, 1> value = Eigen::Matrix<Scalar, 2, 1>::Zero();
    for (int c = 0; c < 2; ++c) {
      for (int a = 0; a < 4; ++a) {
        value(c) += u(vel_dof(tri, a, c)) * phi(a);
      }
    }
    return value;
  }

  /// Velocity Jacobian: row c holds the gradient of component c.
  Eigen::Matrix<Scalar, 2, 2> eval_velocity_gradient(const Vector<Scalar>& u, int tri,
                                                    const Eigen::Matrix<Scalar, 3, 1>& lambda) const {
    const auto grads = mini_gradients<Scalar>(geometry_[tri], lambda);
    Eigen::Matrix<Scalar, 2, 2> jac = Eigen::Matrix<Scalar, 2, 2>::Zero();
    for (int c = 0; c < 2; ++c) {
      for (int a = 0; a < 4; ++a) {
        jac.row(c) += u(vel_dof(tri, a, c)) * grads.row(a);
      }
    }
    return jac;
  }

  Scalar eval_pressure(const Vector<Scalar>& p, int tri, const Eigen::Matrix<Scalar, 3, 1>& lambda) const {
    return p(press_dof(tri, 0)) * lambda(0) + p(press_dof(tri, 1)) * lambda(1) + p(press_dof(tri, 2)) * lambda(2);
  }

 private:
  Mesh<Scalar> mesh_;
  int block_ = 0;
  std::vector<int> dirichlet_dofs_;
  std::vector<int> free_dofs_;
  std::vector<int> free_index_;
  std::vector<ElementGeometry<Scalar>> geometry_;
};

template <typename Scalar = double>
MixedSpaces<Scalar> build_mini_spaces(const Mesh<Scalar>& mesh) {
  return MixedSpaces<Scalar>(mesh);
}

/// Vertex values of f, plus bubble coefficients that make the interpolant
/// match f at each centroid.
template <typename Scalar, typename Field>
Vector<Scalar> interpolate_velocity(const Field& f, const MixedSpaces<Scalar>& spaces) {
  const auto& mesh = spaces.mesh();
  Vector<Scalar> u = Vector<Scalar>::Zero(spaces.n_vel_dofs());
  const int block = spaces.component_block();
  for (int v = 0; v < mesh.num_nodes(); ++v) {
    const Eigen::Matrix<Scalar, 2, 1> value = f(mesh.node(v));
    u(v) = value(0);
    u(block + v) = value(1);
  }
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Eigen::Matrix<Scalar, 2, 1> value = f(mesh.centroid(t));
    for (int c = 0; c < 2; ++c) {
      const Scalar linear = (u(spaces.vel_dof(t, 0, c)) + u(spaces.vel_dof(t, 1, c)) + u(spaces.vel_dof(t, 2, c))) / Scalar(3);
      u(spaces.vel_dof(t, 3, c)) = value(c) - linear;
    }
  }
  return u;
}

/// Nodal P1 interpolant of a scalar field.
template <typename Scalar, typename Field>
Vector<Scalar> interpolate_pressure(const Field& f, const MixedSpaces<Scalar>& spaces) {
  const auto& mesh = spaces.mesh();
  Vector<Scalar> p(spaces.n_press_dofs());
  for (int v = 0; v < mesh.num_nodes(); ++v) {
    p(v) = f(mesh.node(v));
  }
  return p;
}

}  // namespace sstokes
