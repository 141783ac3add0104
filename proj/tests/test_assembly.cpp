#include "sstokes/assembly.hpp"
#include "sstokes/forcing.hpp"
#include "symbolic.hpp"

#include <doctest.h>

#include <numbers>

using namespace sstokes;
using testing::mini_derivative;
using testing::mini_shape;
using testing::Poly;

namespace {

ElementGeometry<double> skewed() {
  return element_geometry<double>(Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(0.8, 0.35), Eigen::Vector2d(0.25, 0.9));
}

}  // namespace

TEST_CASE("element mass, stiffness, divergence against symbolic integration") {
  const auto rule = quadrature<double>(kAssemblyDegree);
  for (const auto& g : {skewed(), element_geometry<double>(Eigen::Vector2d(0, 0), Eigen::Vector2d(0.25, 0),
                                                         Eigen::Vector2d(0.25, 0.25))}) {
    const auto m = element_mass(g, rule);
    const auto a = element_stiffness(g, rule);
    const auto b = element_divergence(g, rule);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        CHECK(std::abs(m(i, j) - (mini_shape(i) * mini_shape(j)).integrate(g.area)) <= 1e-12);
        double s = 0;
        for (int d = 0; d < 2; ++d) s += (mini_derivative(g, i, d) * mini_derivative(g, j, d)).integrate(g.area);
        CHECK(std::abs(a(i, j) - s) <= 1e-12);
      }
    }
    for (int p = 0; p < 3; ++p) {
      for (int c = 0; c < 2; ++c) {
        for (int j = 0; j < 4; ++j) {
          const double exact = -(Poly::lambda(p) * mini_derivative(g, j, c)).integrate(g.area);
          CHECK(std::abs(b(p, 4 * c + j) - exact) <= 1e-12);
        }
      }
    }
    const auto pm = element_pressure_mass(g);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(std::abs(pm(i, j) - (Poly::lambda(i) * Poly::lambda(j)).integrate(g.area)) <= 1e-15);
  }
}

TEST_CASE("closed-form element entries") {
  const auto g = skewed();
  const auto m = element_mass(g, quadrature<double>(6));
  CHECK(m(0, 0) == doctest::Approx(g.area / 6));
  CHECK(m(0, 1) == doctest::Approx(g.area / 12));
  CHECK(m(0, 3) == doctest::Approx(3 * g.area / 20));
  CHECK(m(3, 3) == doctest::Approx(81 * g.area / 280));
  const auto a = element_stiffness(g, quadrature<double>(6));
  for (int i = 0; i < 3; ++i) CHECK(std::abs(a(i, 3)) < 1e-13);  // bubble is A-orthogonal to P1
}

TEST_CASE("global operator identities") {
  const auto s = build_mini_spaces(build_uniform_mesh<double>(5));
  const auto ops = assemble_operators(s);
  const int nv = s.n_vel_dofs();
  const int block = s.component_block();
  const int nn = s.mesh().num_nodes();

  CHECK((Eigen::MatrixXd(ops.mass) - Eigen::MatrixXd(ops.mass).transpose()).norm() < 1e-14);
  CHECK((Eigen::MatrixXd(ops.stiffness) - Eigen::MatrixXd(ops.stiffness).transpose()).norm() < 1e-12);

  // constant vector field (1, 1)
  Vector<double> ones = Vector<double>::Zero(nv);
  ones.segment(0, nn).setOnes();
  ones.segment(block, nn).setOnes();
  CHECK(ones.dot(ops.mass * ones) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK((ops.stiffness * ones).norm() < 1e-11);

  // (x, 0): L2 norm^2 = 1/3, gradient norm^2 = 1
  const Vector<double> ux = interpolate_velocity([](const Eigen::Vector2d& x) { return Eigen::Vector2d(x.x(), 0); }, s);
  CHECK(ux.dot(ops.mass * ux) == doctest::Approx(1.0 / 3).epsilon(1e-13));
  CHECK(ux.dot(ops.stiffness * ux) == doctest::Approx(1.0).epsilon(1e-13));

  // divergence-free linear field (x, -y) gives B u = 0; (x, 0) gives -(1, psi)
  const Vector<double> uxy = interpolate_velocity([](const Eigen::Vector2d& x) { return Eigen::Vector2d(x.x(), -x.y()); }, s);
  CHECK((ops.divergence * uxy).lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK((ops.divergence * ux + ops.pressure_mean).lpNorm<Eigen::Infinity>() < 1e-14);

  // constants in the kernel of B^T on unconstrained dofs
  const Vector<double> bt1 = ops.divergence.transpose() * Vector<double>::Ones(nn);
  for (int d : s.free_dofs()) CHECK(std::abs(bt1(d)) < 1e-14);
  CHECK(ops.pressure_mean.sum() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("load vector") {
  const auto s = build_mini_spaces(build_uniform_mesh<double>(4));
  const auto rule = quadrature<double>(6);
  const Vector<double> b = assemble_field_load(s, [](const Eigen::Vector2d&) { return Eigen::Vector2d(1, -1); }, rule);
  const int block = s.component_block();
  // hats sum to one, bubbles integrate to 9/20 |K| each
  double hats = 0, bubbles = 0;
  for (int v = 0; v < s.mesh().num_nodes(); ++v) hats += b(v);
  for (int t = 0; t < s.mesh().num_triangles(); ++t) bubbles += b(s.vel_dof(t, 3, 0));
  CHECK(hats == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(bubbles == doctest::Approx(0.45).epsilon(1e-13));
  CHECK(b.segment(block, block).sum() == doctest::Approx(-1.45).epsilon(1e-13));

  const LoadCache<double> cache(s);
  for (double t : {0.0, 0.3, 1.0}) CHECK((cache.at(t) - assemble_load(s, t)).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("load vector against a dense degree-10 oracle") {
  const auto s = build_mini_spaces(build_uniform_mesh<double>(2));
  const auto rule = collapsed_gauss_rule<double>(10);
  for (double t : {0.0, 0.5, 1.0}) {
    Eigen::VectorXd oracle = Eigen::VectorXd::Zero(s.n_vel_dofs());
    for (int tri = 0; tri < s.mesh().num_triangles(); ++tri) {
      for (int q = 0; q < rule.size(); ++q) {
        const Eigen::Vector3d l = rule.points.row(q);
        const Eigen::Vector2d x = l(0) * s.mesh().vertex(tri, 0) + l(1) * s.mesh().vertex(tri, 1) + l(2) * s.mesh().vertex(tri, 2);
        const Eigen::Vector2d f = ManufacturedForcing<double>::eval(t, x);
        const Eigen::Vector4d phi(l(0), l(1), l(2), 27 * l(0) * l(1) * l(2));
        for (int c = 0; c < 2; ++c)
          for (int a = 0; a < 4; ++a) oracle(s.vel_dof(tri, a, c)) += rule.weights(q) * s.mesh().signed_area(tri) * f(c) * phi(a);
      }
    }
    CHECK((assemble_load(s, t, 10) - oracle).norm() <= 1e-12 * oracle.norm());
  }
}

TEST_CASE("degree-6 load converges to the degree-10 load under refinement") {
  double previous = 0;
  for (int n : {2, 4, 8}) {
    const auto s = build_mini_spaces(build_uniform_mesh<double>(n));
    const Vector<double> hi = assemble_load(s, 0.5, 10);
    const double rel = (assemble_load(s, 0.5) - hi).norm() / hi.norm();
    if (previous > 0) CHECK(previous / rel > 12.0);
    previous = rel;
  }
  CHECK(previous < 1e-5);
}

TEST_CASE("forcing values") {
  using F = ManufacturedForcing<double>;
  const double pi = std::numbers::pi;
  const Eigen::Vector2d x(0.5, 0.25);
  // F_c(0.5, 0.25) = (pi, 0), F_c(0.25, 0.5) = (0, -pi)
  CHECK(F::cos_part(x)(0) == doctest::Approx(pi));
  CHECK(std::abs(F::cos_part(x)(1)) < 1e-14);
  CHECK(F::cos_part(Eigen::Vector2d(0.25, 0.5))(1) == doctest::Approx(-pi));
}

TEST_CASE("forcing equals u_t - laplace u + grad p for the manufactured pair") {
  using S = ManufacturedSolution<double>;
  const double h = 1e-4;
  for (const Eigen::Vector2d& x : {Eigen::Vector2d(0.3, 0.7), Eigen::Vector2d(0.61, 0.18), Eigen::Vector2d(0.5, 0.5)}) {
    for (double t : {0.2, 0.9}) {
      const Eigen::Vector2d ut = (S::velocity(t + h, x) - S::velocity(t - h, x)) / (2 * h);
      const Eigen::Vector2d ex(h, 0), ey(0, h);
      const Eigen::Vector2d lap = (S::velocity(t, x + ex) + S::velocity(t, x - ex) + S::velocity(t, x + ey) +
                                   S::velocity(t, x - ey) - 4 * S::velocity(t, x)) / (h * h);
      const Eigen::Vector2d gp((S::pressure(t, x + ex) - S::pressure(t, x - ex)) / (2 * h),
                               (S::pressure(t, x + ey) - S::pressure(t, x - ey)) / (2 * h));
      const Eigen::Vector2d f = ManufacturedForcing<double>::eval(t, x);
      CHECK((ut - lap + gp - f).norm() < 1e-4 * (1 + f.norm()));
      const double div = (S::velocity(t, x + ex)(0) - S::velocity(t, x - ex)(0) + S::velocity(t, x + ey)(1) -
                          S::velocity(t, x - ey)(1)) / (2 * h);
      CHECK(std::abs(div) < 1e-6);
    }
  }
}

TEST_CASE("noise right-hand sides") {
  const auto s = build_mini_spaces(build_uniform_mesh<double>(3));
  const auto ops = assemble_operators(s);
  const Vector<double> u = Vector<double>::LinSpaced(s.n_vel_dofs(), -1, 2);
  const LinearNoise<double> model{0.5};
  const double k = 1.0 / 64;
  // dW^2 = k: the Milstein correction vanishes
  const double dw = std::sqrt(k);
  CHECK((noise_rhs(ops.mass, u, dw, k, model) - euler_maruyama_noise_rhs(ops.mass, u, dw, model)).norm() < 1e-15);
  // dW = 0: -alpha^2 k/2 M u
  CHECK((noise_rhs(ops.mass, u, 0.0, k, model) + 0.25 * k / 2 * (ops.mass * u)).norm() < 1e-15);
  const double dw2 = 0.3;
  const Vector<double> diff = noise_rhs(ops.mass, u, dw2, k, model) - euler_maruyama_noise_rhs(ops.mass, u, dw2, model);
  CHECK((diff - 0.25 * milstein_weight(dw2, k) * (ops.mass * u)).norm() < 1e-14);
}
