#pragma once

#include "sstokes/assembly.hpp"
#include "sstokes/femspace.hpp"
#include "sstokes/forcing.hpp"
#include "sstokes/quadrature.hpp"
#include "sstokes/stepper.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sstokes {

template <typename Scalar, typename Derived>
Scalar l2_norm(const Eigen::MatrixBase<Derived>& c, const SparseOperator<Scalar>& mass) {
  using std::sqrt;
  return sqrt(std::max<Scalar>(Scalar(0), c.dot(mass * c)));
}

/// Full H1 norm: sqrt(c^T M c + c^T A c).
template <typename Scalar, typename Derived>
Scalar h1_norm(const Eigen::MatrixBase<Derived>& c, const SparseOperator<Scalar>& mass,
               const SparseOperator<Scalar>& stiffness) {
  using std::sqrt;
  return sqrt(std::max<Scalar>(Scalar(0), c.dot(mass * c) + c.dot(stiffness * c)));
}

/// Squared norms of one difference at one time level.
template <typename Scalar = double>
struct LevelDifference {
  Scalar l2_sq = 0;
  Scalar h1_sq = 0;
  Scalar pressure_l2_sq = 0;
};

/// Per-sample error quantities, kept in the form the Monte Carlo averages need:
/// max_n ||e^n||^2, k sum_n ||e^n||_H1^2, k sum_n ||e^n||^2 for velocity and
/// k sum_n ||e_p^n|| for pressure.
template <typename Scalar = double>
struct PathErrors {
  Scalar linf_l2_sq = 0;
  Scalar l2_h1_sq = 0;
  Scalar l2_l2_sq = 0;
  Scalar pressure_l1_l2 = 0;

  Scalar linf_l2() const { using std::sqrt; return sqrt(linf_l2_sq); }
  Scalar l2_h1() const { using std::sqrt; return sqrt(l2_h1_sq); }
  Scalar l2_l2() const { using std::sqrt; return sqrt(l2_l2_sq); }
};

/// Accumulates the discrete time norms over n = 1..steps.
template <typename Scalar, typename LevelFn>
PathErrors<Scalar> accumulate_path_errors(int steps, Scalar k, LevelFn&& level) {
  using std::sqrt;
  PathErrors<Scalar> e;
  for (int n = 1; n <= steps; ++n) {
    const LevelDifference<Scalar> d = level(n);
    e.linf_l2_sq = std::max(e.linf_l2_sq, d.l2_sq);
    e.l2_h1_sq += k * d.h1_sq;
    e.l2_l2_sq += k * d.l2_sq;
    e.pressure_l1_l2 += k * sqrt(std::max<Scalar>(Scalar(0), d.pressure_l2_sq));
  }
  return e;
}

/// Compares a trajectory with step k against one on the same mesh with step
/// k/stride. Velocities are compared at the shared times t_n; the reference
/// pressure at coarse step n is the mean of its `stride` sub-step pressures.
template <typename Scalar>
PathErrors<Scalar> path_errors(const Trajectory<Scalar>& a, const Trajectory<Scalar>& b, int stride,
                               const StokesOperators<Scalar>& ops) {
  using std::abs;
  if (stride < 1 || b.steps() != stride * a.steps() || abs(a.k - stride * b.k) > Scalar(1e-12) * a.k ||
      a.velocity.rows() != b.velocity.rows()) {
    throw std::invalid_argument("path_errors: trajectories are not on nested grids with stride " +
                                std::to_string(stride));
  }
  return accumulate_path_errors<Scalar>(a.steps(), a.k, [&](int n) {
    const Vector<Scalar> du = a.u(n) - b.u(stride * n);
    const Vector<Scalar> pref = b.pressure.middleCols(stride * (n - 1), stride).rowwise().sum() / Scalar(stride);
    const Vector<Scalar> dp = a.p(n) - pref;
    const Vector<Scalar> mdu = ops.mass * du;
    LevelDifference<Scalar> d;
    d.l2_sq = du.dot(mdu);
    d.h1_sq = d.l2_sq + du.dot(ops.stiffness * du);
    d.pressure_l2_sq = dp.dot(ops.pressure_mass * dp);
    return d;
  });
}

/// Quadrature points of one mesh, used to compare finite element functions
/// that do not share a space.
template <typename Scalar = double>
struct QuadratureSampler {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 2> points;
  Vector<Scalar> weights;            // physical weights, sum = |D|
  std::vector<int> host_triangle;    // triangle of the sampling mesh
  Eigen::Matrix<Scalar, Eigen::Dynamic, 3> host_lambda;

  int size() const { return static_cast<int>(weights.size()); }
};

template <typename Scalar>
QuadratureSampler<Scalar> make_sampler(const Mesh<Scalar>& mesh, const QuadratureRule<Scalar>& rule) {
  const int nq = rule.size();
  const int total = mesh.num_triangles() * nq;
  QuadratureSampler<Scalar> s;
  s.points.resize(total, 2);
  s.weights.resize(total);
  s.host_triangle.resize(total);
  s.host_lambda.resize(total, 3);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Scalar area = mesh.signed_area(t);
    for (int q = 0; q < nq; ++q) {
      const int i = t * nq + q;
      const Eigen::Matrix<Scalar, 3, 1> lambda = rule.points.row(q).transpose();
      s.points.row(i) = (lambda(0) * mesh.vertex(t, 0) + lambda(1) * mesh.vertex(t, 1) + lambda(2) * mesh.vertex(t, 2)).transpose();
      s.weights(i) = rule.weights(q) * area;
      s.host_triangle[i] = t;
      s.host_lambda.row(i) = lambda.transpose();
    }
  }
  return s;
}

/// Linear maps from coefficient vectors to values at sampler points.
/// Row layout: velocity 2q+c, velocity gradient 4q+2c+d, pressure q.
template <typename Scalar = double>
struct EvaluationOperators {
  SparseOperator<Scalar> velocity;
  SparseOperator<Scalar> gradient;
  SparseOperator<Scalar> pressure;
};

/// Builds evaluation operators of `spaces` at the sampler points. When the
/// sampler comes from a finer nested mesh, each point is assigned to the
/// triangle of `spaces` that contains its host triangle.
template <typename Scalar>
EvaluationOperators<Scalar> build_evaluation(const MixedSpaces<Scalar>& spaces, const QuadratureSampler<Scalar>& sampler,
                                             const Mesh<Scalar>& sampling_mesh) {
  const auto& mesh = spaces.mesh();
  const bool same_mesh = (mesh.n == sampling_mesh.n);
  std::vector<Eigen::Triplet<Scalar, int>> val;
  std::vector<Eigen::Triplet<Scalar, int>> grad;
  std::vector<Eigen::Triplet<Scalar, int>> pres;
  const int nq = sampler.size();
  val.reserve(static_cast<std::size_t>(nq) * 8);
  grad.reserve(static_cast<std::size_t>(nq) * 16);
  pres.reserve(static_cast<std::size_t>(nq) * 3);
  for (int q = 0; q < nq; ++q) {
    int tri = sampler.host_triangle[q];
    Eigen::Matrix<Scalar, 3, 1> lambda = sampler.host_lambda.row(q).transpose();
    if (!same_mesh) {
      tri = mesh.locate(sampling_mesh.centroid(sampler.host_triangle[q]));
      lambda = mesh.barycentric(tri, sampler.points.row(q).transpose());
    }
    const Eigen::Matrix<Scalar, 4, 1> phi = mini_values<Scalar>(lambda);
    const Eigen::Matrix<Scalar, 4, 2> dphi = mini_gradients<Scalar>(spaces.geometry(tri), lambda);
    for (int c = 0; c < 2; ++c) {
      for (int a = 0; a < 4; ++a) {
        const int dof = spaces.vel_dof(tri, a, c);
        val.emplace_back(2 * q + c, dof, phi(a));
        grad.emplace_back(4 * q + 2 * c, dof, dphi(a, 0));
        grad.emplace_back(4 * q + 2 * c + 1, dof, dphi(a, 1));
      }
    }
    for (int a = 0; a < 3; ++a) {
      pres.emplace_back(q, spaces.press_dof(tri, a), lambda(a));
    }
  }
  EvaluationOperators<Scalar> ops;
  ops.velocity.resize(2 * nq, spaces.n_vel_dofs());
  ops.velocity.setFromTriplets(val.begin(), val.end());
  ops.gradient.resize(4 * nq, spaces.n_vel_dofs());
  ops.gradient.setFromTriplets(grad.begin(), grad.end());
  ops.pressure.resize(nq, spaces.n_press_dofs());
  ops.pressure.setFromTriplets(pres.begin(), pres.end());
  return ops;
}

namespace detail {

template <typename Scalar>
LevelDifference<Scalar> weighted_squares(const QuadratureSampler<Scalar>& s, const Vector<Scalar>& dv,
                                         const Vector<Scalar>& dg, const Vector<Scalar>& dp) {
  LevelDifference<Scalar> d;
  Scalar grad_sq = 0;
  for (int q = 0; q < s.size(); ++q) {
    d.l2_sq += s.weights(q) * dv.template segment<2>(2 * q).squaredNorm();
    grad_sq += s.weights(q) * dg.template segment<4>(4 * q).squaredNorm();
    d.pressure_l2_sq += s.weights(q) * dp(q) * dp(q);
  }
  d.h1_sq = d.l2_sq + grad_sq;
  return d;
}

}  // namespace detail

/// Errors between a coarse-mesh and a fine-mesh trajectory that share k and
/// the Wiener path. Requires nested meshes (fine n a multiple of coarse n).
///
/// On each fine triangle the difference lives in the span of 4 coarse and 4
/// fine basis functions per component, so its squared norms are quadratic
/// forms with small Gram matrices, integrated exactly at construction.
template <typename Scalar = double>
class MeshComparator {
 public:
  MeshComparator(const MixedSpaces<Scalar>& coarse, const MixedSpaces<Scalar>& fine) {
    if (fine.mesh().n % coarse.mesh().n != 0) {
      throw std::invalid_argument("MeshComparator: meshes are not nested");
    }
    const auto& cmesh = coarse.mesh();
    const auto& fmesh = fine.mesh();
    const QuadratureRule<Scalar> rule = quadrature<Scalar>(kAssemblyDegree);
    cells_.resize(static_cast<std::size_t>(fmesh.num_triangles()));
    for (int t = 0; t < fmesh.num_triangles(); ++t) {
      Cell& cell = cells_[static_cast<std::size_t>(t)];
      const int ct = cmesh.locate(fmesh.centroid(t));
      for (int c = 0; c < 2; ++c) {
        for (int a = 0; a < 4; ++a) {
          cell.vel[c][a] = coarse.vel_dof(ct, a, c);
          cell.vel[c][4 + a] = fine.vel_dof(t, a, c);
        }
      }
      for (int a = 0; a < 3; ++a) {
        cell.press[a] = coarse.press_dof(ct, a);
        cell.press[3 + a] = fine.press_dof(t, a);
      }
      const auto cgeo = coarse.geometry(ct);
      const auto fgeo = fine.geometry(t);
      const Scalar area = fmesh.signed_area(t);
      cell.mass.setZero();
      cell.grad.setZero();
      cell.pmass.setZero();
      for (int q = 0; q < rule.size(); ++q) {
        const Eigen::Matrix<Scalar, 3, 1> fl = rule.points.row(q).transpose();
        const Eigen::Matrix<Scalar, 2, 1> x =
            fl(0) * fmesh.vertex(t, 0) + fl(1) * fmesh.vertex(t, 1) + fl(2) * fmesh.vertex(t, 2);
        const Eigen::Matrix<Scalar, 3, 1> cl = cmesh.barycentric(ct, x);
        // Coarse minus fine.
        Eigen::Matrix<Scalar, 8, 1> v;
        Eigen::Matrix<Scalar, 8, 2> g;
        v.template head<4>() = mini_values<Scalar>(cl);
        v.template tail<4>() = -mini_values<Scalar>(fl);
        g.template topRows<4>() = mini_gradients<Scalar>(cgeo, cl);
        g.template bottomRows<4>() = -mini_gradients<Scalar>(fgeo, fl);
        Eigen::Matrix<Scalar, 6, 1> pv;
        pv.template head<3>() = cl;
        pv.template tail<3>() = -fl;
        const Scalar w = rule.weights(q) * area;
        cell.mass.noalias() += w * v * v.transpose();
        cell.grad.noalias() += w * g * g.transpose();
        cell.pmass.noalias() += w * pv * pv.transpose();
      }
    }
  }

  using ConstRef = Eigen::Ref<const Vector<Scalar>>;

  LevelDifference<Scalar> at(ConstRef uc, ConstRef pc, ConstRef uf, ConstRef pf) const {
    LevelDifference<Scalar> d;
    Scalar grad_sq = 0;
    for (const Cell& cell : cells_) {
      for (int c = 0; c < 2; ++c) {
        Eigen::Matrix<Scalar, 8, 1> x;
        for (int a = 0; a < 4; ++a) {
          x(a) = uc(cell.vel[c][a]);
          x(4 + a) = uf(cell.vel[c][4 + a]);
        }
        d.l2_sq += x.dot(cell.mass * x);
        grad_sq += x.dot(cell.grad * x);
      }
      Eigen::Matrix<Scalar, 6, 1> y;
      for (int a = 0; a < 3; ++a) {
        y(a) = pc(cell.press[a]);
        y(3 + a) = pf(cell.press[3 + a]);
      }
      d.pressure_l2_sq += y.dot(cell.pmass * y);
    }
    using std::max;
    d.l2_sq = max(d.l2_sq, Scalar(0));
    d.h1_sq = d.l2_sq + max(grad_sq, Scalar(0));
    d.pressure_l2_sq = max(d.pressure_l2_sq, Scalar(0));
    return d;
  }

  PathErrors<Scalar> operator()(const Trajectory<Scalar>& coarse, const Trajectory<Scalar>& fine) const {
    using std::abs;
    if (coarse.steps() != fine.steps() || abs(coarse.k - fine.k) > Scalar(1e-14)) {
      throw std::invalid_argument("MeshComparator: trajectories use different time grids");
    }
    return accumulate_path_errors<Scalar>(coarse.steps(), coarse.k, [&](int n) {
      return at(coarse.u(n), coarse.p(n), fine.u(n), fine.p(n));
    });
  }

 private:
  struct Cell {
    std::array<std::array<int, 8>, 2> vel;  // per component: 4 coarse then 4 fine
    std::array<int, 6> press;
    Eigen::Matrix<Scalar, 8, 8> mass;
    Eigen::Matrix<Scalar, 8, 8> grad;
    Eigen::Matrix<Scalar, 6, 6> pmass;
  };
  std::vector<Cell> cells_;
};

/// Errors against the closed-form manufactured solution, by degree-10 quadrature.
template <typename Scalar = double>
class ExactComparator {
 public:
  explicit ExactComparator(const MixedSpaces<Scalar>& spaces, int degree = 10) {
    sampler_ = make_sampler(spaces.mesh(), collapsed_gauss_rule<Scalar>(degree));
    eval_ = build_evaluation(spaces, sampler_, spaces.mesh());
    const int nq = sampler_.size();
    u_shape_.resize(2 * nq);
    grad_shape_.resize(4 * nq);
    p_shape_.resize(nq);
    for (int q = 0; q < nq; ++q) {
      const Eigen::Matrix<Scalar, 2, 1> x = sampler_.points.row(q).transpose();
      u_shape_.template segment<2>(2 * q) = ManufacturedSolution<Scalar>::velocity_shape(x);
      const Eigen::Matrix<Scalar, 2, 2> g = ManufacturedSolution<Scalar>::velocity_shape_gradient(x);
      grad_shape_.template segment<4>(4 * q) << g(0, 0), g(0, 1), g(1, 0), g(1, 1);
      p_shape_(q) = ManufacturedSolution<Scalar>::pressure_shape(x);
    }
  }

  LevelDifference<Scalar> at(Scalar t, const Vector<Scalar>& u, const Vector<Scalar>& p) const {
    const Scalar s = ManufacturedSolution<Scalar>::time_factor(t);
    const Vector<Scalar> dv = eval_.velocity * u - s * u_shape_;
    const Vector<Scalar> dg = eval_.gradient * u - s * grad_shape_;
    const Vector<Scalar> dp = eval_.pressure * p - s * p_shape_;
    return detail::weighted_squares(sampler_, dv, dg, dp);
  }

  PathErrors<Scalar> operator()(const Trajectory<Scalar>& traj) const {
    return accumulate_path_errors<Scalar>(traj.steps(), traj.k, [&](int n) {
      return at(Scalar(n) * traj.k, traj.u(n), traj.p(n));
    });
  }

 private:
  QuadratureSampler<Scalar> sampler_;
  EvaluationOperators<Scalar> eval_;
  Vector<Scalar> u_shape_;
  Vector<Scalar> grad_shape_;
  Vector<Scalar> p_shape_;
};

/// Monte Carlo estimates: root-mean-square over samples for the velocity
/// norms, plain mean for the pressure norm. Standard errors use the delta
/// method for the square roots. Sums run in sample order.
struct ErrorReport {
  double err_l2h1 = 0;
  double err_linfl2 = 0;
  double err_l2l2 = 0;
  double err_press = 0;
  double se_l2h1 = 0;
  double se_linfl2 = 0;
  double se_l2l2 = 0;
  double se_press = 0;
  std::vector<PathErrors<double>> samples;
};

namespace detail {

struct MeanAndError {
  double mean = 0;
  double se = 0;
};

inline MeanAndError mean_and_error(const std::vector<double>& x) {
  MeanAndError r;
  const auto n = static_cast<double>(x.size());
  if (x.empty()) return r;
  for (double v : x) r.mean += v;
  r.mean /= n;
  if (x.size() > 1) {
    double ss = 0;
    for (double v : x) ss += (v - r.mean) * (v - r.mean);
    r.se = std::sqrt(ss / (n - 1) / n);
  }
  return r;
}

inline void root_mean(const std::vector<double>& squares, double& value, double& se) {
  const MeanAndError m = mean_and_error(squares);
  value = std::sqrt(m.mean);
  se = value > 0 ? m.se / (2 * value) : 0.0;
}

}  // namespace detail

inline ErrorReport aggregate(std::vector<PathErrors<double>> samples) {
  ErrorReport r;
  std::vector<double> linf, h1, l2, pr;
  for (const auto& s : samples) {
    linf.push_back(s.linf_l2_sq);
    h1.push_back(s.l2_h1_sq);
    l2.push_back(s.l2_l2_sq);
    pr.push_back(s.pressure_l1_l2);
  }
  detail::root_mean(h1, r.err_l2h1, r.se_l2h1);
  detail::root_mean(linf, r.err_linfl2, r.se_linfl2);
  detail::root_mean(l2, r.err_l2l2, r.se_l2l2);
  const auto p = detail::mean_and_error(pr);
  r.err_press = p.mean;
  r.se_press = p.se;
  r.samples = std::move(samples);
  return r;
}

/// log2(e_coarse / e_fine).
inline double convergence_order(double e_coarse, double e_fine) {
  if (!(e_coarse > 0) || !(e_fine > 0)) {
    throw std::invalid_argument("convergence_order: errors must be positive");
  }
  return std::log2(e_coarse / e_fine);
}

}  // namespace sstokes
