#include "sstokes/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace sstokes {

namespace {

using Disc = Discretization<double>;
using DiscPtr = std::shared_ptr<const Disc>;

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

int worker_count(const ExperimentConfig& cfg) {
  if (cfg.workers > 0) return cfg.workers;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Runs fn(j) for j in [0, count) on `workers` threads; results are stored
/// by sample index, so their order does not depend on scheduling.
template <typename Fn>
auto for_each_sample(int count, int workers, Fn&& fn) {
  using Result = decltype(fn(0));
  std::vector<Result> results(count);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto work = [&] {
    for (int j = next++; j < count; j = next++) {
      try {
        results[j] = fn(j);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  const int threads = std::min(workers, count);
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

SchemeConfig scheme_config(const ExperimentConfig& cfg, int steps, Scheme scheme = Scheme::Milstein) {
  SchemeConfig sc;
  sc.nu = cfg.nu;
  sc.alpha = cfg.alpha;
  sc.T = cfg.T;
  sc.steps = steps;
  sc.scheme = scheme;
  sc.forcing = true;
  return sc;
}

std::map<std::string, std::string> common_metadata(const ExperimentConfig& cfg) {
  return {{"kind", to_string(cfg.kind)},
          {"samples", std::to_string(cfg.samples)},
          {"seed", std::to_string(cfg.seed)},
          {"alpha", fmt_double(cfg.alpha)},
          {"nu", fmt_double(cfg.nu)},
          {"T", fmt_double(cfg.T)},
          {"fine_steps", std::to_string(cfg.fine_steps)},
          {"rng", "mt19937_64 seeded by splitmix64(seed, sample); Box-Muller v1"},
          {"initial_velocity", "0"},
          {"load_time", "t_{n+1}"}};
}

struct SampleOutcome {
  std::vector<PathErrors<double>> errors;
  Diagnostics diagnostics;
};

ConvergenceTable collect(const std::vector<SampleOutcome>& outcomes, const std::vector<double>& resolutions,
                         std::string variable) {
  ConvergenceTable table;
  table.variable = std::move(variable);
  for (std::size_t r = 0; r < resolutions.size(); ++r) {
    std::vector<PathErrors<double>> per_sample;
    per_sample.reserve(outcomes.size());
    for (const auto& o : outcomes) per_sample.push_back(o.errors[r]);
    table.rows.push_back({resolutions[r], aggregate(std::move(per_sample))});
  }
  for (const auto& o : outcomes) table.diagnostics.merge(o.diagnostics);
  return table;
}

std::optional<double> row_order(const ConvergenceTable& t, std::size_t i, double ErrorReport::*field) {
  if (i == 0 || i >= t.rows.size()) return std::nullopt;
  const double e0 = t.rows[i - 1].report.*field;
  const double e1 = t.rows[i].report.*field;
  if (!(e0 > 0) || !(e1 > 0)) return std::nullopt;
  return convergence_order(e0, e1) / std::log2(t.rows[i - 1].resolution / t.rows[i].resolution);
}

}  // namespace

void Diagnostics::merge(const Diagnostics& other) {
  max_divergence = std::max(max_divergence, other.max_divergence);
  max_pressure_mean = std::max(max_pressure_mean, other.max_pressure_mean);
  max_residual = std::max(max_residual, other.max_residual);
}

std::optional<double> ConvergenceTable::order_l2h1(std::size_t i) const { return row_order(*this, i, &ErrorReport::err_l2h1); }
std::optional<double> ConvergenceTable::order_linfl2(std::size_t i) const { return row_order(*this, i, &ErrorReport::err_linfl2); }
std::optional<double> ConvergenceTable::order_l2l2(std::size_t i) const { return row_order(*this, i, &ErrorReport::err_l2l2); }
std::optional<double> ConvergenceTable::order_press(std::size_t i) const { return row_order(*this, i, &ErrorReport::err_press); }

ConvergenceTable run_time_convergence(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.kind = StudyKind::Time;
  c.validate();
  const std::vector<int> coarse = sorted_unique(c.steps);
  std::vector<int> all = coarse;
  for (int m : coarse) all.push_back(2 * m);
  all = sorted_unique(all);

  const auto disc = std::make_shared<const Disc>(c.meshes.front());
  std::map<int, std::unique_ptr<const Stepper<double>>> steppers;
  for (int m : all) steppers.emplace(m, std::make_unique<const Stepper<double>>(make_stepper(disc, scheme_config(c, m))));

  const auto outcomes = for_each_sample(c.samples, worker_count(c), [&](int j) {
    SampleOutcome out;
    out.errors.resize(coarse.size());
    const WienerPath path = generate_path(c.seed, static_cast<std::uint64_t>(j), c.fine_steps, c.T);
    std::map<int, Trajectory<double>> held;
    for (int m : all) {
      Trajectory<double> traj = steppers.at(m)->run(coarse_increments(path, m));
      out.diagnostics.merge(traj);
      if (m % 2 == 0) {
        if (const auto it = std::find(coarse.begin(), coarse.end(), m / 2); it != coarse.end()) {
          out.errors[static_cast<std::size_t>(it - coarse.begin())] = path_errors(held.at(m / 2), traj, 2, disc->ops);
        }
      }
      held.emplace(m, std::move(traj));
      std::erase_if(held, [&](const auto& kv) {
        const int key = kv.first;
        const bool awaits_partner = std::binary_search(coarse.begin(), coarse.end(), key) && 2 * key > m;
        return !awaits_partner;
      });
    }
    return out;
  });

  std::vector<double> ks;
  for (int m : coarse) ks.push_back(c.T / m);
  ConvergenceTable table = collect(outcomes, ks, "k");
  table.metadata = common_metadata(c);
  table.metadata["mesh_n"] = std::to_string(c.meshes.front());
  table.metadata["reference"] = "same mesh, step k/2, same Wiener path";
  table.metadata["pressure_alignment"] = "reference pressure = mean of its two sub-step pressures";
  return table;
}

ConvergenceTable run_space_convergence(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.kind = StudyKind::Space;
  c.validate();
  const std::vector<int> coarse = sorted_unique(c.meshes);
  std::vector<int> all = coarse;
  for (int n : coarse) all.push_back(2 * n);
  all = sorted_unique(all);
  const int steps = c.steps.front();

  std::map<int, DiscPtr> discs;
  std::map<int, std::unique_ptr<const Stepper<double>>> steppers;
  for (int n : all) {
    discs.emplace(n, std::make_shared<const Disc>(n));
    steppers.emplace(n, std::make_unique<const Stepper<double>>(make_stepper(discs.at(n), scheme_config(c, steps))));
  }
  std::map<int, std::unique_ptr<const MeshComparator<double>>> comparators;
  for (int n : coarse) {
    comparators.emplace(n, std::make_unique<const MeshComparator<double>>(discs.at(n)->spaces, discs.at(2 * n)->spaces));
  }

  const auto outcomes = for_each_sample(c.samples, worker_count(c), [&](int j) {
    SampleOutcome out;
    out.errors.resize(coarse.size());
    const WienerPath path = generate_path(c.seed, static_cast<std::uint64_t>(j), c.fine_steps, c.T);
    const Vector<double> dW = coarse_increments(path, steps);
    std::map<int, Trajectory<double>> held;
    for (int n : all) {
      Trajectory<double> traj = steppers.at(n)->run(dW);
      out.diagnostics.merge(traj);
      if (n % 2 == 0) {
        if (const auto it = std::find(coarse.begin(), coarse.end(), n / 2); it != coarse.end()) {
          out.errors[static_cast<std::size_t>(it - coarse.begin())] = (*comparators.at(n / 2))(held.at(n / 2), traj);
        }
      }
      held.emplace(n, std::move(traj));
      std::erase_if(held, [&](const auto& kv) {
        return !(std::binary_search(coarse.begin(), coarse.end(), kv.first) && 2 * kv.first > n);
      });
    }
    return out;
  });

  std::vector<double> hs;
  for (int n : coarse) hs.push_back(1.0 / n);
  ConvergenceTable table = collect(outcomes, hs, "h");
  table.metadata = common_metadata(c);
  table.metadata["steps"] = std::to_string(steps);
  table.metadata["reference"] = "mesh h/2, same step, same Wiener path";
  table.metadata["pressure_alignment"] = "same time levels";
  return table;
}

ConvergenceTable run_deterministic_study(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.kind = StudyKind::Deterministic;
  c.validate();
  Diagnostics diag;
  ConvergenceTable table;
  table.metadata = common_metadata(c);

  if (c.meshes.size() > 1) {
    const std::vector<int> meshes = sorted_unique(c.meshes);
    const int steps = c.steps.front();
    const Vector<double> dW = Vector<double>::Zero(steps);
    std::vector<PathErrors<double>> errors;
    std::vector<double> hs;
    for (int n : meshes) {
      const auto disc = std::make_shared<const Disc>(n);
      const auto traj = make_stepper(disc, scheme_config(c, steps)).run(dW);
      diag.merge(traj);
      errors.push_back(ExactComparator<double>(disc->spaces)(traj));
      hs.push_back(1.0 / n);
    }
    table = collect({SampleOutcome{errors, diag}}, hs, "h");
    table.metadata = common_metadata(c);
    table.metadata["steps"] = std::to_string(steps);
    table.metadata["reference"] = "closed-form manufactured solution, degree-10 quadrature";
    table.metadata["pressure_alignment"] = "exact pressure at t_n";
    return table;
  }

  const int n = c.meshes.front();
  const std::vector<int> coarse = sorted_unique(c.steps);
  const auto disc = std::make_shared<const Disc>(n);
  std::vector<PathErrors<double>> errors;
  std::vector<double> ks;
  std::map<int, Trajectory<double>> runs;
  const auto run = [&](int m) -> const Trajectory<double>& {
    auto it = runs.find(m);
    if (it == runs.end()) {
      it = runs.emplace(m, make_stepper(disc, scheme_config(c, m)).run(Vector<double>::Zero(m))).first;
      diag.merge(it->second);
    }
    return it->second;
  };
  for (int m : coarse) {
    errors.push_back(path_errors(run(m), run(2 * m), 2, disc->ops));
    ks.push_back(c.T / m);
  }
  table = collect({SampleOutcome{errors, diag}}, ks, "k");
  table.metadata = common_metadata(c);
  table.metadata["mesh_n"] = std::to_string(n);
  table.metadata["reference"] = "same mesh, step k/2 (spatial error cancels)";
  table.metadata["pressure_alignment"] = "reference pressure = mean of its two sub-step pressures";
  return table;
}

EmComparisonTable run_em_comparison(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.kind = StudyKind::EmComparison;
  c.validate();
  const std::vector<int> coarse = sorted_unique(c.steps);
  const auto disc = std::make_shared<const Disc>(c.meshes.front());
  const auto reference = make_stepper(disc, scheme_config(c, c.fine_steps));
  std::map<int, std::unique_ptr<const Stepper<double>>> milstein;
  std::map<int, std::unique_ptr<const Stepper<double>>> em;
  for (int m : coarse) {
    milstein.emplace(m, std::make_unique<const Stepper<double>>(make_stepper(disc, scheme_config(c, m, Scheme::Milstein))));
    em.emplace(m, std::make_unique<const Stepper<double>>(make_stepper(disc, scheme_config(c, m, Scheme::EulerMaruyama))));
  }

  struct Outcome {
    std::vector<PathErrors<double>> milstein;
    std::vector<PathErrors<double>> em;
    Diagnostics diagnostics;
  };
  const auto outcomes = for_each_sample(c.samples, worker_count(c), [&](int j) {
    Outcome out;
    const WienerPath path = generate_path(c.seed, static_cast<std::uint64_t>(j), c.fine_steps, c.T);
    const auto ref = reference.run(path.increments);
    out.diagnostics.merge(ref);
    for (int m : coarse) {
      const Vector<double> dW = coarse_increments(path, m);
      const auto a = milstein.at(m)->run(dW);
      const auto b = em.at(m)->run(dW);
      out.diagnostics.merge(a);
      out.diagnostics.merge(b);
      out.milstein.push_back(path_errors(a, ref, c.fine_steps / m, disc->ops));
      out.em.push_back(path_errors(b, ref, c.fine_steps / m, disc->ops));
    }
    return out;
  });

  const auto paired_t = [](const std::vector<double>& d) {
    const auto n = static_cast<double>(d.size());
    double mean = 0;
    for (double v : d) mean += v;
    mean /= n;
    double ss = 0;
    for (double v : d) ss += (v - mean) * (v - mean);
    const double se = d.size() > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
    return se > 0 ? mean / se : 0.0;
  };

  EmComparisonTable table;
  for (std::size_t r = 0; r < coarse.size(); ++r) {
    std::vector<PathErrors<double>> mil;
    std::vector<PathErrors<double>> eul;
    std::vector<double> d_h1;
    std::vector<double> d_linf;
    for (const auto& o : outcomes) {
      mil.push_back(o.milstein[r]);
      eul.push_back(o.em[r]);
      d_h1.push_back(o.em[r].l2_h1() - o.milstein[r].l2_h1());
      d_linf.push_back(o.em[r].linf_l2() - o.milstein[r].linf_l2());
    }
    EmComparisonRow row;
    row.resolution = c.T / coarse[r];
    row.milstein = aggregate(std::move(mil));
    row.euler_maruyama = aggregate(std::move(eul));
    row.paired_t_l2h1 = paired_t(d_h1);
    row.paired_t_linfl2 = paired_t(d_linf);
    table.rows.push_back(std::move(row));
  }
  for (const auto& o : outcomes) table.diagnostics.merge(o.diagnostics);
  table.metadata = common_metadata(c);
  table.metadata["mesh_n"] = std::to_string(c.meshes.front());
  table.metadata["reference"] = "Milstein at fine_steps on the same path";
  return table;
}

std::vector<SingleRunRecord> run_single(const ExperimentConfig& cfg, Diagnostics* diagnostics) {
  ExperimentConfig c = cfg;
  c.kind = StudyKind::Single;
  c.validate();
  const int steps = c.steps.front();
  const auto disc = std::make_shared<const Disc>(c.meshes.front());
  const WienerPath path = generate_path(c.seed, 0, c.fine_steps, c.T);
  const auto traj = make_stepper(disc, scheme_config(c, steps)).run(coarse_increments(path, steps));
  if (diagnostics) diagnostics->merge(traj);
  const auto& ops = disc->ops;
  std::vector<SingleRunRecord> out;
  for (int n = 0; n <= steps; ++n) {
    SingleRunRecord r;
    r.t = n * traj.k;
    r.velocity_l2 = l2_norm<double>(traj.u(n), ops.mass);
    r.velocity_h1 = h1_norm<double>(traj.u(n), ops.mass, ops.stiffness);
    r.divergence = (ops.divergence * traj.u(n)).lpNorm<Eigen::Infinity>();
    if (n >= 1) {
      r.pressure_l2 = l2_norm<double>(traj.p(n), ops.pressure_mass);
      r.averaged_pressure_l2 = l2_norm<double>(time_averaged_pressure(traj, n), ops.pressure_mass);
    }
    out.push_back(r);
  }
  return out;
}

void emit_csv(const ConvergenceTable& table, std::ostream& out) {
  out << "resolution,err_l2h1,order_l2h1,err_linfl2,order_linfl2,err_press,order_press,se_l2h1,se_linfl2,se_press\n";
  const auto opt = [](const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); };
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i].report;
    out << fmt_double(table.rows[i].resolution) << ',' << fmt_double(r.err_l2h1) << ',' << opt(table.order_l2h1(i)) << ','
        << fmt_double(r.err_linfl2) << ',' << opt(table.order_linfl2(i)) << ',' << fmt_double(r.err_press) << ','
        << opt(table.order_press(i)) << ',' << fmt_double(r.se_l2h1) << ',' << fmt_double(r.se_linfl2) << ','
        << fmt_double(r.se_press) << '\n';
  }
}

void emit_csv(const ConvergenceTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  emit_csv(table, out);
}

void emit_csv(const EmComparisonTable& table, std::ostream& out) {
  out << "resolution,milstein_l2h1,em_l2h1,ratio_l2h1,milstein_linfl2,em_linfl2,ratio_linfl2,"
         "milstein_press,em_press,ratio_press,paired_t_l2h1,paired_t_linfl2\n";
  const auto ratio = [](double a, double b) { return b > 0 ? fmt_double(a / b) : std::string(); };
  for (const auto& row : table.rows) {
    const auto& m = row.milstein;
    const auto& e = row.euler_maruyama;
    out << fmt_double(row.resolution) << ',' << fmt_double(m.err_l2h1) << ',' << fmt_double(e.err_l2h1) << ','
        << ratio(m.err_l2h1, e.err_l2h1) << ',' << fmt_double(m.err_linfl2) << ',' << fmt_double(e.err_linfl2) << ','
        << ratio(m.err_linfl2, e.err_linfl2) << ',' << fmt_double(m.err_press) << ',' << fmt_double(e.err_press) << ','
        << ratio(m.err_press, e.err_press) << ',' << fmt_double(row.paired_t_l2h1) << ','
        << fmt_double(row.paired_t_linfl2) << '\n';
  }
}

void emit_csv(const std::vector<SingleRunRecord>& records, std::ostream& out) {
  out << "t,velocity_l2,velocity_h1,pressure_l2,averaged_pressure_l2,divergence\n";
  for (const auto& r : records) {
    out << fmt_double(r.t) << ',' << fmt_double(r.velocity_l2) << ',' << fmt_double(r.velocity_h1) << ','
        << fmt_double(r.pressure_l2) << ',' << fmt_double(r.averaged_pressure_l2) << ',' << fmt_double(r.divergence)
        << '\n';
  }
}

void emit_plot_data(const ConvergenceTable& table, std::ostream& out) {
  out << "# log2(" << table.variable << ") log2(err_l2h1) log2(err_linfl2) log2(err_press)\n";
  for (const auto& row : table.rows) {
    const auto& r = row.report;
    out << fmt_double(std::log2(row.resolution)) << ' ' << fmt_double(std::log2(r.err_l2h1)) << ' '
        << fmt_double(std::log2(r.err_linfl2)) << ' ' << fmt_double(std::log2(r.err_press)) << '\n';
  }
}

void emit_metadata(const std::map<std::string, std::string>& metadata, std::ostream& out) {
  for (const auto& [key, value] : metadata) out << key << " = " << value << '\n';
}

std::string format_table(const ConvergenceTable& table) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-12s %-7s %-12s %-7s %-12s %-7s\n", table.variable.c_str(), "L2(H1) u",
                "order", "Linf(L2) u", "order", "L1(L2) p", "order");
  out << line;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i].report;
    const auto o = [](const std::optional<double>& v) {
      char b[32];
      if (v) std::snprintf(b, sizeof b, "%.4f", *v);
      else b[0] = '\0';
      return std::string(b);
    };
    std::snprintf(line, sizeof line, "1/%-10.0f %-12.6g %-7s %-12.6g %-7s %-12.6g %-7s\n", 1.0 / table.rows[i].resolution,
                  r.err_l2h1, o(table.order_l2h1(i)).c_str(), r.err_linfl2, o(table.order_linfl2(i)).c_str(),
                  r.err_press, o(table.order_press(i)).c_str());
    out << line;
  }
  return out.str();
}

std::string format_table(const EmComparisonTable& table) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %-12s %-12s %-12s %-12s %-9s\n", "k", "Mil L2(H1)", "EM L2(H1)",
                "Mil Linf(L2)", "EM Linf(L2)", "paired t");
  out << line;
  for (const auto& row : table.rows) {
    std::snprintf(line, sizeof line, "1/%-8.0f %-12.6g %-12.6g %-12.6g %-12.6g %-9.3f\n", 1.0 / row.resolution,
                  row.milstein.err_l2h1, row.euler_maruyama.err_l2h1, row.milstein.err_linfl2,
                  row.euler_maruyama.err_linfl2, row.paired_t_l2h1);
    out << line;
  }
  return out.str();
}

}  // namespace sstokes
