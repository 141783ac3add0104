// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "sstokes/experiment.hpp"
#include "sstokes/stochastic.hpp"
#include "symbolic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

using namespace sstokes;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  int id;
  bool pass;
  std::string detail;
};

std::vector<Verdict> verdicts;

void report(int id, bool pass, const std::string& detail) {
  verdicts.push_back({id, pass, detail});
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* format, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, a);
  return buf;
}

bool within(double x, double lo, double hi) { return x >= lo && x <= hi; }

std::string csv(const ConvergenceTable& t) {
  std::ostringstream out;
  emit_csv(t, out);
  return out.str();
}

Diagnostics all_runs;

// Deterministic manufactured solution: spatial and temporal orders.
void criterion_1() {
  const auto start = Clock::now();
  bool pass = true;
  std::string detail = "space H1";

  ExperimentConfig sc = ExperimentConfig::desk(StudyKind::Deterministic);
  const auto space = run_deterministic_study(sc);
  std::string l2 = " L2";
  for (std::size_t i = 1; i < space.rows.size(); ++i) {
    const double h1 = *space.order_l2h1(i), ll = *space.order_linfl2(i);
    pass = pass && within(h1, 0.9, 1.1) && within(ll, 1.8, 2.2);
    detail += fmt(" %.3f", h1);
    l2 += fmt(" %.3f", ll);
  }
  detail += l2 + "; time";

  ExperimentConfig tc = ExperimentConfig::desk(StudyKind::Deterministic);
  tc.meshes = {64};
  tc.steps = {16, 32, 64, 128, 256};
  const auto time = run_deterministic_study(tc);
  for (std::size_t i = 1; i < time.rows.size(); ++i) {
    const double o = *time.order_linfl2(i);
    pass = pass && within(o, 0.85, 1.15);
    detail += fmt(" %.3f", o);
  }
  const double elapsed = seconds_since(start);
  pass = pass && elapsed < 300;
  report(1, pass, detail + fmt("; %.0f s", elapsed));
}

// Stochastic temporal convergence against the reference orders for k = 1/64 .. 1/512.
void criterion_2(const ConvergenceTable& t, double elapsed) {
  const double table_h1[] = {0.7597, 0.8430, 0.9416};
  const double table_linf[] = {0.6088, 0.7640, 0.8830};
  const double table_press[] = {0.8200, 0.8749, 0.9445};
  bool pass = t.rows.size() == 4;
  std::string h1 = "L2H1", linf = " LinfL2", press = " pressure";
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    const double o[] = {*t.order_l2h1(i), *t.order_linfl2(i), *t.order_press(i)};
    const double* ref[] = {table_h1, table_linf, table_press};
    for (int c = 0; c < 3; ++c) {
      if (std::abs(o[c] - ref[c][i - 1]) > 0.25) pass = false;
      if (i >= 2 && o[c] < 0.7) pass = false;
    }
    h1 += fmt(" %.3f", o[0]);
    linf += fmt(" %.3f", o[1]);
    press += fmt(" %.3f", o[2]);
  }
  pass = pass && elapsed < 1800;
  report(2, pass, h1 + linf + press + fmt("; %.0f s", elapsed));
}

void criterion_3(const ConvergenceTable& t) {
  bool pass = t.rows.size() == 3;
  std::string h1 = "H1", l2 = " L2", press = " pressure";
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    const double a = *t.order_l2h1(i), b = *t.order_linfl2(i), c = *t.order_press(i);
    pass = pass && a >= 0.8 && b >= 1.6 && c >= 1.2;
    h1 += fmt(" %.3f", a);
    l2 += fmt(" %.3f", b);
    press += fmt(" %.3f", c);
  }
  report(3, pass, h1 + l2 + press);
}

void criterion_4() {
  const auto& d = all_runs;
  const bool pass = d.max_divergence <= 1e-9 && d.max_pressure_mean <= 1e-10 && d.max_residual <= 1e-10;
  report(4, pass,
         fmt("max |Bu| %.2e", d.max_divergence) + fmt(", max |int p| %.2e", d.max_pressure_mean) +
             fmt(", max residual %.2e", d.max_residual));
}

void criterion_5() {
  bool pass = true;
  const int n = 100000;
  const double k = 1.0 / n;
  const auto path = generate_path(20240601, 0, n, 1.0);
  std::vector<double> z(n);
  double mean = 0, var = 0;
  for (int i = 0; i < n; ++i) mean += (z[i] = path.increments(i) / std::sqrt(k));
  mean /= n;
  for (double v : z) var += (v - mean) * (v - mean);
  var /= n - 1;
  pass = pass && std::abs(mean) < 4.0 / std::sqrt(double(n)) && within(var, 0.97, 1.03);
  std::sort(z.begin(), z.end());
  double ks = 0;
  for (int i = 0; i < n; ++i) {
    const double cdf = 0.5 * std::erfc(-z[i] / std::sqrt(2.0));
    ks = std::max({ks, std::abs(cdf - double(i) / n), std::abs(cdf - double(i + 1) / n)});
  }
  pass = pass && ks < 1.9495 / std::sqrt(double(n));

  const auto fine = generate_path(5, 9, 2048, 1.0);
  WienerPath half;
  half.increments = coarse_increments(fine, 1024);
  bool exact = coarse_increments(half, 256) == coarse_increments(fine, 256);
  exact = exact && coarse_increments(fine, 2048) == fine.increments;
  pass = pass && exact;

  const double kw = 1.0 / 256;
  const auto wp = generate_path(77, 0, n, n * kw);
  double wm = 0, wsq = 0;
  for (int i = 0; i < n; ++i) {
    const double w = milstein_weight(wp.increments(i), kw);
    wm += w;
    wsq += w * w;
  }
  wm /= n;
  const double sigma = std::sqrt((wsq / n - wm * wm) / n);
  pass = pass && std::abs(wm) <= 4 * sigma;
  report(5, pass,
         fmt("mean %.4f", mean) + fmt(", variance %.4f", var) + fmt(", KS %.5f", ks) +
             fmt(" (critical %.5f)", 1.9495 / std::sqrt(double(n))) + (exact ? ", coarsening exact" : ", coarsening inexact") +
             fmt(", weight mean %.2f sigma", wm / sigma));
}

void criterion_6(const EmComparisonTable& t) {
  const double critical = 1.6604;  // one-sided 95%, 99 degrees of freedom
  bool pass = t.rows.size() == 1;
  std::string detail;
  for (const auto& r : t.rows) {
    pass = pass && r.milstein.err_l2h1 <= r.euler_maruyama.err_l2h1 && r.paired_t_l2h1 > critical;
    detail = fmt("Milstein %.4e", r.milstein.err_l2h1) + fmt(" vs EM %.4e", r.euler_maruyama.err_l2h1) +
             fmt(", paired t %.2f", r.paired_t_l2h1) + fmt(" (critical %.4f)", critical);
  }
  report(6, pass, detail);
}

void criterion_7() {
  ExperimentConfig c;
  c.kind = StudyKind::Time;
  c.meshes = {6};
  c.steps = {16, 32, 64};
  c.samples = 12;
  c.fine_steps = 256;
  c.workers = 1;
  const std::string serial = csv(run_time_convergence(c));
  const bool repeat = csv(run_time_convergence(c)) == serial;
  c.workers = 4;
  const bool parallel = csv(run_time_convergence(c)) == serial;
  report(7, repeat && parallel,
         std::string("repeat ") + (repeat ? "identical" : "differs") + ", 4 workers " + (parallel ? "identical" : "differs"));
}

// One Milstein step on the n=1 mesh against dense elimination, and element
// blocks against exact monomial integration.
void criterion_8() {
  const auto disc = std::make_shared<const Discretization<double>>(1);
  const auto& spaces = disc->spaces;
  const auto& ops = disc->ops;
  SchemeConfig cfg;
  cfg.steps = 64;
  const double k = cfg.k(), alpha = cfg.alpha, dw = 0.137, t_next = k;
  const auto stepper = make_stepper(disc, cfg);
  const Vector<double> u0 = interpolate_velocity(
      [](const Eigen::Vector2d& x) { return ManufacturedSolution<double>::velocity_shape(x); }, spaces);
  const auto step = stepper.milstein_step(u0, dw, t_next);

  const auto& free = spaces.free_dofs();
  const int nf = static_cast<int>(free.size());
  const int np = spaces.n_press_dofs();
  const Eigen::MatrixXd m(ops.mass), a(ops.stiffness), b(ops.divergence);
  Eigen::MatrixXd big = Eigen::MatrixXd::Zero(nf + np + 1, nf + np + 1);
  for (int i = 0; i < nf; ++i) {
    for (int j = 0; j < nf; ++j) big(i, j) = m(free[i], free[j]) + cfg.nu * k * a(free[i], free[j]);
    for (int q = 0; q < np; ++q) {
      big(i, nf + q) = k * b(q, free[i]);
      big(nf + q, i) = b(q, free[i]);
    }
  }
  for (int q = 0; q < np; ++q) big(nf + q, nf + np) = big(nf + np, nf + q) = ops.pressure_mean(q);
  const Eigen::VectorXd full = m * u0 + k * assemble_load(spaces, t_next) +
                               m * (alpha * dw * u0 + 0.5 * alpha * alpha * (dw * dw - k) * u0);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf + np + 1);
  for (int i = 0; i < nf; ++i) rhs(i) = full(free[i]);
  const Eigen::VectorXd x = Eigen::FullPivLU<Eigen::MatrixXd>(big).solve(rhs);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(spaces.n_vel_dofs());
  for (int i = 0; i < nf; ++i) u(free[i]) = x(i);
  const double du = (step.velocity - u).lpNorm<Eigen::Infinity>();
  const double dp = (step.pressure - x.segment(nf, np)).lpNorm<Eigen::Infinity>();

  using testing::mini_derivative;
  using testing::mini_shape;
  using testing::Poly;
  const auto rule = quadrature<double>(kAssemblyDegree);
  double block = 0;
  for (const auto& g : {element_geometry<double>(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)),
                        element_geometry<double>(Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(0.8, 0.35),
                                                 Eigen::Vector2d(0.25, 0.9))}) {
    const auto em = element_mass(g, rule);
    const auto ea = element_stiffness(g, rule);
    const auto eb = element_divergence(g, rule);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        block = std::max(block, std::abs(em(i, j) - (mini_shape(i) * mini_shape(j)).integrate(g.area)));
        double s = 0;
        for (int d = 0; d < 2; ++d) s += (mini_derivative(g, i, d) * mini_derivative(g, j, d)).integrate(g.area);
        block = std::max(block, std::abs(ea(i, j) - s));
      }
      for (int p = 0; p < 3; ++p) {
        for (int c = 0; c < 2; ++c) {
          const double exact = -(Poly::lambda(p) * mini_derivative(g, i, c)).integrate(g.area);
          block = std::max(block, std::abs(eb(p, 4 * c + i) - exact));
        }
      }
    }
  }
  const bool pass = du <= 1e-12 && dp <= 1e-12 && block <= 1e-12 && u.norm() > 0;
  report(8, pass, fmt("step velocity %.1e", du) + fmt(", pressure %.1e", dp) + fmt(", element blocks %.1e", block));
}

}  // namespace

int main() {
  const auto start = Clock::now();
  criterion_1();

  auto t0 = Clock::now();
  const auto time = run_time_convergence(ExperimentConfig::desk(StudyKind::Time));
  const double time_elapsed = seconds_since(t0);
  all_runs.merge(time.diagnostics);
  std::printf("%s", format_table(time).c_str());
  criterion_2(time, time_elapsed);

  const auto space = run_space_convergence(ExperimentConfig::desk(StudyKind::Space));
  all_runs.merge(space.diagnostics);
  std::printf("%s", format_table(space).c_str());
  criterion_3(space);

  const auto em = run_em_comparison(ExperimentConfig::desk(StudyKind::EmComparison));
  all_runs.merge(em.diagnostics);
  std::printf("%s", format_table(em).c_str());

  criterion_4();
  criterion_5();
  criterion_6(em);
  criterion_7();
  criterion_8();

  std::sort(verdicts.begin(), verdicts.end(), [](const Verdict& a, const Verdict& b) { return a.id < b.id; });
  int failed = 0;
  std::printf("\nsummary (%.0f s)\n", seconds_since(start));
  for (const auto& v : verdicts) {
    std::printf("%s %d\n", v.pass ? "PASS" : "FAIL", v.id);
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
