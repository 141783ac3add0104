#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace sstokes {

/// Triangle quadrature in barycentric coordinates. Weights are normalized to
/// sum to one, so the integral over a triangle K is |K| * sum_q w_q f(x_q).
template <typename Scalar = double>
struct QuadratureRule {
  int degree = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 3> points;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;

  int size() const { return static_cast<int>(weights.size()); }
};

/// Gauss-Legendre nodes and weights on [0, 1].
template <typename Scalar = double>
void gauss_legendre_unit(int m, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x,
                         Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& w) {
  using std::abs;
  using std::cos;
  // Legendre P_m and its derivative by the three-term recurrence.
  const auto legendre = [m](Scalar z) {
    Scalar p0 = 1;
    Scalar p1 = z;
    for (int k = 2; k <= m; ++k) {
      const Scalar pk = (Scalar(2 * k - 1) * z * p1 - Scalar(k - 1) * p0) / Scalar(k);
      p0 = p1;
      p1 = pk;
    }
    const Scalar dp = Scalar(m) * (z * p1 - p0) / (z * z - Scalar(1));
    return std::pair{p1, dp};
  };

  x.resize(m);
  w.resize(m);
  for (int i = 0; i < m; ++i) {
    Scalar z = cos(std::numbers::pi_v<Scalar> * (Scalar(i) + Scalar(0.75)) / (Scalar(m) + Scalar(0.5)));
    for (int iter = 0; iter < 100; ++iter) {
      const auto [p, dp] = legendre(z);
      const Scalar dz = p / dp;
      z -= dz;
      if (abs(dz) < Scalar(1e-16)) {
        break;
      }
    }
    const Scalar dp = legendre(z).second;
    x(i) = (Scalar(1) - z) / Scalar(2);
    w(i) = Scalar(1) / ((Scalar(1) - z * z) * dp * dp);
  }
}

/// Collapsed (Duffy) tensor Gauss rule, exact for polynomials of total degree
/// up to `degree` on any triangle. All weights are positive.
template <typename Scalar = double>
QuadratureRule<Scalar> collapsed_gauss_rule(int degree) {
  if (degree < 0) {
    throw std::invalid_argument("collapsed_gauss_rule: negative degree");
  }
  // Collapsing the square onto the triangle adds one to the degree in s.
  const int m = (degree + 3) / 2;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w;
  gauss_legendre_unit<Scalar>(m, x, w);

  QuadratureRule<Scalar> rule;
  rule.degree = degree;
  rule.points.resize(m * m, 3);
  rule.weights.resize(m * m);
  int q = 0;
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b, ++q) {
      const Scalar s = x(a);
      const Scalar t = x(b);
      const Scalar px = s;
      const Scalar py = t * (Scalar(1) - s);
      rule.points.row(q) << Scalar(1) - px - py, px, py;
      rule.weights(q) = Scalar(2) * w(a) * w(b) * (Scalar(1) - s);
    }
  }
  return rule;
}

/// Rules used for assembly; degrees 1 through 6.
template <typename Scalar = double>
QuadratureRule<Scalar> quadrature(int degree) {
  if (degree < 1 || degree > 6) {
    throw std::invalid_argument("quadrature: unsupported degree " + std::to_string(degree));
  }
  if (degree == 1) {
    QuadratureRule<Scalar> rule;
    rule.degree = 1;
    rule.points.resize(1, 3);
    rule.points.row(0).setConstant(Scalar(1) / Scalar(3));
    rule.weights.setOnes(1);
    return rule;
  }
  return collapsed_gauss_rule<Scalar>(degree);
}

}  // namespace sstokes
