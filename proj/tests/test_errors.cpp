#include "sstokes/errors.hpp"
#include "sstokes/stochastic.hpp"

#include <doctest.h>

using namespace sstokes;

namespace {

std::shared_ptr<const Discretization<double>> disc(int n) { return std::make_shared<const Discretization<double>>(n); }

Trajectory<double> run(const std::shared_ptr<const Discretization<double>>& d, int steps, std::uint64_t sample) {
  SchemeConfig c;
  c.steps = steps;
  return make_stepper(d, c).run(coarse_increments(generate_path(4, sample, 64, 1.0), steps));
}

}  // namespace

TEST_CASE("norms of simple fields") {
  const auto d = disc(4);
  const int nn = d->spaces.mesh().num_nodes();
  const int block = d->spaces.component_block();
  Vector<double> ones = Vector<double>::Zero(d->spaces.n_vel_dofs());
  ones.segment(0, nn).setOnes();
  CHECK(l2_norm(ones, d->ops.mass) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(h1_norm(ones, d->ops.mass, d->ops.stiffness) == doctest::Approx(1.0).epsilon(1e-12));
  ones.segment(block, nn).setOnes();
  CHECK(l2_norm(ones, d->ops.mass) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  const Vector<double> zero = Vector<double>::Zero(d->spaces.n_vel_dofs());
  CHECK(l2_norm(zero, d->ops.mass) == 0.0);
  // one bubble: ||27 l0 l1 l2||^2 = 81/280 |K|
  Vector<double> e = zero;
  e(d->spaces.vel_dof(5, 3, 1)) = 1.0;
  CHECK(l2_norm(e, d->ops.mass) == doctest::Approx(std::sqrt(81.0 / 280 / 32)).epsilon(1e-13));
  CHECK(l2_norm(e, d->ops.mass) <= h1_norm(e, d->ops.mass, d->ops.stiffness));
}

TEST_CASE("path errors of a trajectory with itself vanish") {
  const auto d = disc(4);
  const auto a = run(d, 16, 0);
  const auto e = path_errors(a, a, 1, d->ops);
  CHECK(e.linf_l2_sq == 0.0);
  CHECK(e.l2_h1_sq == 0.0);
  CHECK(e.pressure_l1_l2 == 0.0);
  const auto b = run(d, 32, 0);
  CHECK_THROWS_AS(path_errors(a, b, 3, d->ops), std::invalid_argument);
}

TEST_CASE("path errors: triangle inequality and norm ordering") {
  const auto d = disc(4);
  const auto a = run(d, 8, 1);
  const auto b = run(d, 16, 1);
  const auto c = run(d, 32, 1);
  const auto ab = path_errors(a, b, 2, d->ops);
  const auto bc = path_errors(b, c, 2, d->ops);
  const auto ac = path_errors(a, c, 4, d->ops);
  CHECK(ac.l2_l2() <= ab.l2_l2() + std::sqrt(2.0) * bc.l2_l2() + 1e-14);  // coarse grid sees every other fine level
  CHECK(ab.l2_l2() <= ab.l2_h1());
  CHECK(ab.l2_l2() <= ab.linf_l2() + 1e-15);
}

TEST_CASE("mesh comparator matches sampled evaluation") {
  const auto coarse = disc(2);
  const auto fine = disc(4);
  const auto a = run(coarse, 8, 2);
  const auto b = run(fine, 8, 2);
  const MeshComparator<double> cmp(coarse->spaces, fine->spaces);
  // independent route: pointwise evaluation on each fine triangle
  const auto rule = collapsed_gauss_rule<double>(8);
  const auto& fm = fine->spaces.mesh();
  const auto& cm = coarse->spaces.mesh();
  for (int n : {1, 5, 8}) {
    double l2 = 0, h1 = 0, pr = 0;
    for (int t = 0; t < fm.num_triangles(); ++t) {
      for (int q = 0; q < rule.size(); ++q) {
        const Eigen::Vector3d l = rule.points.row(q);
        const Eigen::Vector2d x = l(0) * fm.vertex(t, 0) + l(1) * fm.vertex(t, 1) + l(2) * fm.vertex(t, 2);
        const int ct = cm.locate(fm.centroid(t));
        const Eigen::Vector3d cl = cm.barycentric(ct, x);
        const Vector<double> ua = a.u(n), ub = b.u(n), pa = a.p(n), pb = b.p(n);
        const double w = rule.weights(q) * fm.signed_area(t);
        l2 += w * (coarse->spaces.eval_velocity(ua, ct, cl) - fine->spaces.eval_velocity(ub, t, l)).squaredNorm();
        h1 += w * (coarse->spaces.eval_velocity_gradient(ua, ct, cl) - fine->spaces.eval_velocity_gradient(ub, t, l)).squaredNorm();
        pr += w * std::pow(coarse->spaces.eval_pressure(pa, ct, cl) - fine->spaces.eval_pressure(pb, t, l), 2);
      }
    }
    const auto d = cmp.at(a.u(n), a.p(n), b.u(n), b.p(n));
    CHECK(d.l2_sq == doctest::Approx(l2).epsilon(1e-9));
    CHECK(d.h1_sq == doctest::Approx(l2 + h1).epsilon(1e-9));
    CHECK(d.pressure_l2_sq == doctest::Approx(pr).epsilon(1e-9));
  }
  CHECK_THROWS_AS(MeshComparator<double>(disc(3)->spaces, disc(4)->spaces), std::invalid_argument);
}

TEST_CASE("exact comparator: interpolation error under refinement") {
  std::vector<LevelDifference<double>> errs;
  for (int n : {8, 16, 32}) {
    const auto d = disc(n);
    const ExactComparator<double> cmp(d->spaces);
    const Vector<double> u = interpolate_velocity(
        [](const Eigen::Vector2d& x) { return ManufacturedSolution<double>::velocity_shape(x); }, d->spaces);
    const Vector<double> p = interpolate_pressure(
        [](const Eigen::Vector2d& x) { return ManufacturedSolution<double>::pressure_shape(x); }, d->spaces);
    errs.push_back(cmp.at(1.0, (std::sin(1.0) * u).eval(), (std::sin(1.0) * p).eval()));
    const auto at0 = cmp.at(0.0, Vector<double>::Zero(u.size()).eval(), Vector<double>::Zero(p.size()).eval());
    CHECK(at0.l2_sq == 0.0);
    CHECK(at0.h1_sq == 0.0);
  }
  for (std::size_t i = 1; i < errs.size(); ++i) {
    CHECK(std::sqrt(errs[i - 1].l2_sq / errs[i].l2_sq) == doctest::Approx(4.0).epsilon(0.15));
    CHECK(std::sqrt(errs[i - 1].h1_sq / errs[i].h1_sq) == doctest::Approx(2.0).epsilon(0.1));
    CHECK(std::sqrt(errs[i - 1].pressure_l2_sq / errs[i].pressure_l2_sq) == doctest::Approx(4.0).epsilon(0.15));
  }
}

TEST_CASE("aggregation and orders") {
  PathErrors<double> a, b;
  a.l2_h1_sq = 1.0;
  a.linf_l2_sq = 4.0;
  a.pressure_l1_l2 = 1.0;
  b.l2_h1_sq = 9.0;
  b.linf_l2_sq = 16.0;
  b.pressure_l1_l2 = 3.0;
  const auto r = aggregate({a, b});
  CHECK(r.err_l2h1 == doctest::Approx(std::sqrt(5.0)));
  CHECK(r.err_linfl2 == doctest::Approx(std::sqrt(10.0)));
  CHECK(r.err_press == doctest::Approx(2.0));
  CHECK(r.se_press > 0);

  CHECK(convergence_order(1.035310, 0.611458) == doctest::Approx(0.7597).epsilon(1e-4));
  CHECK(convergence_order(0.321795, 0.172365) == doctest::Approx(0.9007).epsilon(1e-4));
  CHECK(convergence_order(3.0, 1.5) == doctest::Approx(1.0));
  CHECK(convergence_order(7e-3, 3.5e-3) == doctest::Approx(convergence_order(7.0, 3.5)));
  CHECK_THROWS(convergence_order(0.0, 1.0));
  CHECK_THROWS(convergence_order(1.0, -1.0));
}
