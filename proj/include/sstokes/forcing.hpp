#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace sstokes {

/// Body force on the unit square, written as f(t,x) = cos(t) F_c(x) + sin(t) F_s(x).
///
/// It is the forcing that makes ManufacturedSolution an exact solution of the
/// deterministic Stokes problem with unit viscosity.
template <typename Scalar = double>
struct ManufacturedForcing {
  using Point = Eigen::Matrix<Scalar, 2, 1>;

  static Point cos_part(const Point& x) {
    using std::sin;
    constexpr Scalar pi = std::numbers::pi_v<Scalar>;
    const Scalar sx = sin(pi * x.x());
    const Scalar sy = sin(pi * x.y());
    return {pi * sin(2 * pi * x.y()) * sx * sx, -pi * sin(2 * pi * x.x()) * sy * sy};
  }

  static Point sin_part(const Point& x) {
    using std::cos;
    using std::sin;
    constexpr Scalar pi = std::numbers::pi_v<Scalar>;
    constexpr Scalar pi3 = pi * pi * pi;
    const Scalar f1 = -2 * pi3 * sin(2 * pi * x.y()) * (2 * cos(2 * pi * x.x()) - 1) - pi * sin(pi * x.x()) * sin(pi * x.y());
    const Scalar f2 = -2 * pi3 * sin(2 * pi * x.x()) * (1 - 2 * cos(2 * pi * x.y())) + pi * cos(pi * x.x()) * cos(pi * x.y());
    return {f1, f2};
  }

  static Point eval(Scalar t, const Point& x) {
    using std::cos;
    using std::sin;
    return cos(t) * cos_part(x) + sin(t) * sin_part(x);
  }
};

/// u*(t,x) = sin(t) U(x), p*(t,x) = sin(t) P(x) with
/// U = (pi sin(2 pi y) sin^2(pi x), -pi sin(2 pi x) sin^2(pi y)), P = cos(pi x) sin(pi y).
/// U vanishes on the boundary and is divergence free; P has zero mean.
template <typename Scalar = double>
struct ManufacturedSolution {
  using Point = Eigen::Matrix<Scalar, 2, 1>;

  static Scalar time_factor(Scalar t) {
    using std::sin;
    return sin(t);
  }

  static Point velocity_shape(const Point& x) {
    using std::sin;
    constexpr Scalar pi = std::numbers::pi_v<Scalar>;
    const Scalar sx = sin(pi * x.x());
    const Scalar sy = sin(pi * x.y());
    return {pi * sin(2 * pi * x.y()) * sx * sx, -pi * sin(2 * pi * x.x()) * sy * sy};
  }

  /// Row c is the gradient of component c.
  static Eigen::Matrix<Scalar, 2, 2> velocity_shape_gradient(const Point& x) {
    using std::cos;
    using std::sin;
    constexpr Scalar pi = std::numbers::pi_v<Scalar>;
    const Scalar sx = sin(pi * x.x());
    const Scalar sy = sin(pi * x.y());
    Eigen::Matrix<Scalar, 2, 2> g;
    g(0, 0) = pi * pi * sin(2 * pi * x.y()) * sin(2 * pi * x.x());
    g(0, 1) = 2 * pi * pi * cos(2 * pi * x.y()) * sx * sx;
    g(1, 0) = -2 * pi * pi * cos(2 * pi * x.x()) * sy * sy;
    g(1, 1) = -pi * pi * sin(2 * pi * x.x()) * sin(2 * pi * x.y());
    return g;
  }

  static Scalar pressure_shape(const Point& x) {
    using std::cos;
    using std::sin;
    constexpr Scalar pi = std::numbers::pi_v<Scalar>;
    return cos(pi * x.x()) * sin(pi * x.y());
  }

  static Point velocity(Scalar t, const Point& x) { return time_factor(t) * velocity_shape(x); }
  static Scalar pressure(Scalar t, const Point& x) { return time_factor(t) * pressure_shape(x); }
};

}  // namespace sstokes
