#pragma once

#include "sstokes/assembly.hpp"
#include "sstokes/femspace.hpp"
#include "sstokes/linsolve.hpp"
#include "sstokes/mesh.hpp"
#include "sstokes/stochastic.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace sstokes {

enum class Scheme { Milstein, EulerMaruyama };

struct SchemeConfig {
  double nu = 1.0;
  double alpha = 0.5;
  double T = 1.0;
  int steps = 256;
  Scheme scheme = Scheme::Milstein;
  bool forcing = true;

  double k() const { return T / steps; }

  void validate() const {
    if (!(nu > 0)) throw std::invalid_argument("SchemeConfig: nu must be positive");
    if (!(T > 0)) throw std::invalid_argument("SchemeConfig: T must be positive");
    if (steps < 1) throw std::invalid_argument("SchemeConfig: step count must be >= 1");
  }
};

/// Mesh-dependent data shared by every run on that mesh.
template <typename Scalar = double>
struct Discretization {
  MixedSpaces<Scalar> spaces;
  StokesOperators<Scalar> ops;
  LoadCache<Scalar> load;

  explicit Discretization(int n)
      : spaces(build_uniform_mesh<Scalar>(n)), ops(assemble_operators(spaces)), load(spaces) {}
};

/// Coefficients u_h^n (columns 0..M) and p_h^n (column n-1 holds p_h^n,
/// n = 1..M), plus the worst structural defects seen along the way.
template <typename Scalar = double>
struct Trajectory {
  Scalar k = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> velocity;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> pressure;
  Scalar max_divergence = 0;     // max_n ||B u^n||_inf
  Scalar max_pressure_mean = 0;  // max_n |integral of p^n|
  Scalar max_residual = 0;       // max_n relative linear residual

  int steps() const { return static_cast<int>(pressure.cols()); }
  auto u(int n) const { return velocity.col(n); }
  auto p(int n) const { return pressure.col(n - 1); }
};

/// P_h^m = k * sum_{n<=m} p_h^n.
template <typename Scalar>
Vector<Scalar> time_averaged_pressure(const Trajectory<Scalar>& traj, int m) {
  if (m < 1 || m > traj.steps()) {
    throw std::out_of_range("time_averaged_pressure: m=" + std::to_string(m) + " outside [1, " +
                            std::to_string(traj.steps()) + "]");
  }
  return traj.k * traj.pressure.leftCols(m).rowwise().sum();
}

/// Fully discrete scheme on one mesh for one step size. run() is const and
/// touches no shared mutable state, so one Stepper serves many samples.
template <typename Scalar = double, typename Model = LinearNoise<Scalar>>
  requires NoiseModel<Model, Scalar>
class Stepper {
 public:
  Stepper(std::shared_ptr<const Discretization<Scalar>> disc, SchemeConfig config, Model model)
      : disc_(std::move(disc)), config_(config), model_(model) {
    config_.validate();
    fact_ = factorize(build_system(disc_->ops, disc_->spaces, Scalar(config_.nu), Scalar(config_.k())));
  }

  const SchemeConfig& config() const { return config_; }
  const Discretization<Scalar>& discretization() const { return *disc_; }
  const SaddleFactorization<Scalar>& factorization() const { return *fact_; }

  /// Solves (M + nu k A) u' + k B^T p' = M u + k f(t_next) + noise, B u' = 0.
  StepSolution<Scalar> milstein_step(const Vector<Scalar>& u, Scalar dW, Scalar t_next) const {
    Vector<Scalar> rhs = deterministic_rhs(u, t_next);
    rhs += noise_rhs(disc_->ops.mass, u, dW, Scalar(config_.k()), model_);
    return solve_step(*fact_, stack_rhs(fact_->system(), rhs));
  }

  StepSolution<Scalar> euler_maruyama_step(const Vector<Scalar>& u, Scalar dW, Scalar t_next) const {
    Vector<Scalar> rhs = deterministic_rhs(u, t_next);
    rhs += euler_maruyama_noise_rhs(disc_->ops.mass, u, dW, model_);
    return solve_step(*fact_, stack_rhs(fact_->system(), rhs));
  }

  StepSolution<Scalar> step(const Vector<Scalar>& u, Scalar dW, Scalar t_next) const {
    return config_.scheme == Scheme::Milstein ? milstein_step(u, dW, t_next) : euler_maruyama_step(u, dW, t_next);
  }

  Trajectory<Scalar> run(const Vector<Scalar>& u0, const Vector<Scalar>& increments) const {
    const int steps = config_.steps;
    if (increments.size() != steps) {
      throw std::invalid_argument("Stepper::run: got " + std::to_string(increments.size()) +
                                  " increments for " + std::to_string(steps) + " steps");
    }
    const auto& spaces = disc_->spaces;
    Trajectory<Scalar> traj;
    traj.k = Scalar(config_.k());
    traj.velocity.resize(spaces.n_vel_dofs(), steps + 1);
    traj.pressure.resize(spaces.n_press_dofs(), steps);
    traj.velocity.col(0) = u0;
    for (int n = 0; n < steps; ++n) {
      const Scalar t_next = Scalar(n + 1) * traj.k;
      StepSolution<Scalar> s = step(traj.velocity.col(n), increments(n), t_next);
      using std::abs;
      traj.max_divergence = std::max<Scalar>(traj.max_divergence,
                                             (disc_->ops.divergence * s.velocity).template lpNorm<Eigen::Infinity>());
      traj.max_pressure_mean = std::max<Scalar>(traj.max_pressure_mean, abs(disc_->ops.pressure_mean.dot(s.pressure)));
      traj.max_residual = std::max(traj.max_residual, s.residual);
      traj.velocity.col(n + 1) = std::move(s.velocity);
      traj.pressure.col(n) = std::move(s.pressure);
    }
    return traj;
  }

  Trajectory<Scalar> run(const Vector<Scalar>& increments) const {
    return run(Vector<Scalar>::Zero(disc_->spaces.n_vel_dofs()), increments);
  }

 private:
  Vector<Scalar> deterministic_rhs(const Vector<Scalar>& u, Scalar t_next) const {
    Vector<Scalar> rhs = disc_->ops.mass * u;
    if (config_.forcing) {
      rhs += Scalar(config_.k()) * disc_->load.at(t_next);
    }
    return rhs;
  }

  std::shared_ptr<const Discretization<Scalar>> disc_;
  SchemeConfig config_;
  Model model_;
  std::shared_ptr<const SaddleFactorization<Scalar>> fact_;
};

template <typename Scalar = double>
Stepper<Scalar> make_stepper(std::shared_ptr<const Discretization<Scalar>> disc, const SchemeConfig& config) {
  return Stepper<Scalar>(std::move(disc), config, LinearNoise<Scalar>{Scalar(config.alpha)});
}

}  // namespace sstokes
