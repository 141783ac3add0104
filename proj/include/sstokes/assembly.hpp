#pragma once

#include "sstokes/femspace.hpp"
#include "sstokes/forcing.hpp"
#include "sstokes/quadrature.hpp"
#include "sstokes/stochastic.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <vector>

namespace sstokes {

template <typename Scalar>
using SparseOperator = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>;

/// Degree used for every assembled integral: bubble-bubble products are
/// polynomials of degree six.
inline constexpr int kAssemblyDegree = 6;

// Element kernels. Velocity blocks are per component; local index 3 is the bubble.

template <typename Scalar>
Eigen::Matrix<Scalar, 4, 4> element_mass(const ElementGeometry<Scalar>& g, const QuadratureRule<Scalar>& rule) {
  Eigen::Matrix<Scalar, 4, 4> m = Eigen::Matrix<Scalar, 4, 4>::Zero();
  for (int q = 0; q < rule.size(); ++q) {
    const Eigen::Matrix<Scalar, 4, 1> phi = mini_values<Scalar>(rule.points.row(q).transpose());
    m.noalias() += (rule.weights(q) * g.area) * phi * phi.transpose();
  }
  return m;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 4, 4> element_stiffness(const ElementGeometry<Scalar>& g, const QuadratureRule<Scalar>& rule) {
  Eigen::Matrix<Scalar, 4, 4> a = Eigen::Matrix<Scalar, 4, 4>::Zero();
  for (int q = 0; q < rule.size(); ++q) {
    const Eigen::Matrix<Scalar, 4, 2> grads = mini_gradients<Scalar>(g, rule.points.row(q).transpose());
    a.noalias() += (rule.weights(q) * g.area) * grads * grads.transpose();
  }
  return a;
}

/// Entry (a, 4c+b) is -(psi_a, d/dx_c phi_b): rows are the three pressure hats,
/// columns the eight local velocity functions (component-major).
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 8> element_divergence(const ElementGeometry<Scalar>& g, const QuadratureRule<Scalar>& rule) {
  Eigen::Matrix<Scalar, 3, 8> b = Eigen::Matrix<Scalar, 3, 8>::Zero();
  for (int q = 0; q < rule.size(); ++q) {
    const Eigen::Matrix<Scalar, 3, 1> lambda = rule.points.row(q).transpose();
    const Eigen::Matrix<Scalar, 4, 2> grads = mini_gradients<Scalar>(g, lambda);
    const Scalar wq = rule.weights(q) * g.area;
    for (int c = 0; c < 2; ++c) {
      b.template middleCols<4>(4 * c).noalias() -= wq * lambda * grads.col(c).transpose();
    }
  }
  return b;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> element_pressure_mass(const ElementGeometry<Scalar>& g) {
  Eigen::Matrix<Scalar, 3, 3> m;
  m.setConstant(g.area / Scalar(12));
  m.diagonal().setConstant(g.area / Scalar(6));
  return m;
}

namespace detail {

template <typename Scalar, typename Kernel>
SparseOperator<Scalar> assemble_velocity_block(const MixedSpaces<Scalar>& spaces, Kernel&& kernel) {
  const auto& mesh = spaces.mesh();
  std::vector<Eigen::Triplet<Scalar, int>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.num_triangles()) * 32);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Eigen::Matrix<Scalar, 4, 4> local = kernel(spaces.geometry(t));
    for (int c = 0; c < 2; ++c) {
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          triplets.emplace_back(spaces.vel_dof(t, a, c), spaces.vel_dof(t, b, c), local(a, b));
        }
      }
    }
  }
  SparseOperator<Scalar> op(spaces.n_vel_dofs(), spaces.n_vel_dofs());
  op.setFromTriplets(triplets.begin(), triplets.end());
  return op;
}

}  // namespace detail

template <typename Scalar>
SparseOperator<Scalar> assemble_mass(const MixedSpaces<Scalar>& spaces) {
  const auto rule = quadrature<Scalar>(kAssemblyDegree);
  return detail::assemble_velocity_block(spaces, [&](const ElementGeometry<Scalar>& g) { return element_mass(g, rule); });
}

template <typename Scalar>
SparseOperator<Scalar> assemble_stiffness(const MixedSpaces<Scalar>& spaces) {
  const auto rule = quadrature<Scalar>(kAssemblyDegree);
  return detail::assemble_velocity_block(spaces, [&](const ElementGeometry<Scalar>& g) { return element_stiffness(g, rule); });
}

/// Pressure-by-velocity operator B with (B u)_i = -(div u, psi_i).
template <typename Scalar>
SparseOperator<Scalar> assemble_divergence(const MixedSpaces<Scalar>& spaces) {
  const auto rule = quadrature<Scalar>(kAssemblyDegree);
  const auto& mesh = spaces.mesh();
  std::vector<Eigen::Triplet<Scalar, int>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.num_triangles()) * 24);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Eigen::Matrix<Scalar, 3, 8> local = element_divergence(spaces.geometry(t), rule);
    const auto dofs = spaces.element_vel_dofs(t);
    for (int a = 0; a < 3; ++a) {
      for (int j = 0; j < 8; ++j) {
        triplets.emplace_back(spaces.press_dof(t, a), dofs[j], local(a, j));
      }
    }
  }
  SparseOperator<Scalar> op(spaces.n_press_dofs(), spaces.n_vel_dofs());
  op.setFromTriplets(triplets.begin(), triplets.end());
  return op;
}

template <typename Scalar>
SparseOperator<Scalar> assemble_pressure_mass(const MixedSpaces<Scalar>& spaces) {
  const auto& mesh = spaces.mesh();
  std::vector<Eigen::Triplet<Scalar, int>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.num_triangles()) * 9);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Eigen::Matrix<Scalar, 3, 3> local = element_pressure_mass(spaces.geometry(t));
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        triplets.emplace_back(spaces.press_dof(t, a), spaces.press_dof(t, b), local(a, b));
      }
    }
  }
  SparseOperator<Scalar> op(spaces.n_press_dofs(), spaces.n_press_dofs());
  op.setFromTriplets(triplets.begin(), triplets.end());
  return op;
}

/// Every operator the time loop needs; assembled once per mesh.
template <typename Scalar = double>
struct StokesOperators {
  SparseOperator<Scalar> mass;
  SparseOperator<Scalar> stiffness;
  SparseOperator<Scalar> divergence;
  SparseOperator<Scalar> pressure_mass;
  /// c_i = integral of the i-th pressure hat, so c.dot(p) is the integral of p_h.
  Vector<Scalar> pressure_mean;
};

template <typename Scalar>
StokesOperators<Scalar> assemble_operators(const MixedSpaces<Scalar>& spaces) {
  StokesOperators<Scalar> ops;
  ops.mass = assemble_mass(spaces);
  ops.stiffness = assemble_stiffness(spaces);
  ops.divergence = assemble_divergence(spaces);
  ops.pressure_mass = assemble_pressure_mass(spaces);
  ops.pressure_mean = ops.pressure_mass * Vector<Scalar>::Ones(spaces.n_press_dofs());
  return ops;
}

/// Load vector b_i = (f, phi_i) for a vector field f(x).
template <typename Scalar, typename Field>
Vector<Scalar> assemble_field_load(const MixedSpaces<Scalar>& spaces, const Field& f, const QuadratureRule<Scalar>& rule) {
  const auto& mesh = spaces.mesh();
  Vector<Scalar> b = Vector<Scalar>::Zero(spaces.n_vel_dofs());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& g = spaces.geometry(t);
    const Eigen::Matrix<Scalar, 2, 1> a = mesh.vertex(t, 0);
    const Eigen::Matrix<Scalar, 2, 1> e1 = mesh.vertex(t, 1) - a;
    const Eigen::Matrix<Scalar, 2, 1> e2 = mesh.vertex(t, 2) - a;
    for (int q = 0; q < rule.size(); ++q) {
      const Eigen::Matrix<Scalar, 3, 1> lambda = rule.points.row(q).transpose();
      const Eigen::Matrix<Scalar, 2, 1> x = a + lambda(1) * e1 + lambda(2) * e2;
      const Eigen::Matrix<Scalar, 2, 1> fx = f(x);
      const Eigen::Matrix<Scalar, 4, 1> phi = mini_values<Scalar>(lambda);
      const Scalar wq = rule.weights(q) * g.area;
      for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < 4; ++i) {
          b(spaces.vel_dof(t, i, c)) += wq * fx(c) * phi(i);
        }
      }
    }
  }
  return b;
}

/// (f(t), phi_i) for the manufactured body force.
template <typename Scalar>
Vector<Scalar> assemble_load(const MixedSpaces<Scalar>& spaces, Scalar t, int degree = kAssemblyDegree) {
  const auto rule = degree <= 6 ? quadrature<Scalar>(degree) : collapsed_gauss_rule<Scalar>(degree);
  return assemble_field_load(
      spaces, [t](const Eigen::Matrix<Scalar, 2, 1>& x) { return ManufacturedForcing<Scalar>::eval(t, x); }, rule);
}

/// The load is cos(t) L_c + sin(t) L_s, so two assembled vectors give it at
/// any time.
template <typename Scalar = double>
struct LoadCache {
  Vector<Scalar> cos_part;
  Vector<Scalar> sin_part;

  explicit LoadCache(const MixedSpaces<Scalar>& spaces) {
    const auto rule = quadrature<Scalar>(kAssemblyDegree);
    cos_part = assemble_field_load(spaces, &ManufacturedForcing<Scalar>::cos_part, rule);
    sin_part = assemble_field_load(spaces, &ManufacturedForcing<Scalar>::sin_part, rule);
  }

  Vector<Scalar> at(Scalar t) const {
    using std::cos;
    using std::sin;
    return cos(t) * cos_part + sin(t) * sin_part;
  }
};

/// M (G(u) dW + 1/2 DG(u)G(u) ((dW)^2 - k)).
template <typename Scalar, typename Model>
  requires NoiseModel<Model, Scalar>
Vector<Scalar> noise_rhs(const SparseOperator<Scalar>& mass, const Vector<Scalar>& u, Scalar dW, Scalar k,
                         const Model& model) {
  const Vector<Scalar> field = model.diffusion(u) * dW + model.milstein_term(u) * milstein_weight(dW, k);
  return mass * field;
}

/// M G(u) dW, the Euler-Maruyama noise term.
template <typename Scalar, typename Model>
  requires NoiseModel<Model, Scalar>
Vector<Scalar> euler_maruyama_noise_rhs(const SparseOperator<Scalar>& mass, const Vector<Scalar>& u, Scalar dW,
                                        const Model& model) {
  return mass * (model.diffusion(u) * dW);
}

}  // namespace sstokes
