// Batch driver for the stochastic Stokes convergence studies.

#include "sstokes/experiment.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

std::string sidecar(const std::string& csv_path, const std::string& suffix) {
  std::filesystem::path p(csv_path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

void print_diagnostics(const sstokes::Diagnostics& d) {
  std::cerr << "max |B u|_inf = " << d.max_divergence << ", max |mean p| = " << d.max_pressure_mean
            << ", max residual = " << d.max_residual << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Milstein / MINI-element solver for the stochastic Stokes equations"};

  std::string test = "time";
  std::string config_path;
  std::string mesh_list;
  std::string k_list;
  std::optional<int> samples;
  std::optional<double> alpha;
  std::optional<double> nu;
  std::optional<double> horizon;
  std::optional<std::uint64_t> seed;
  std::optional<int> fine_steps;
  std::optional<int> workers;
  std::string out;
  bool desk = false;

  app.add_option("--test", test, "Study: time, space, det, em or single")
      ->check(CLI::IsMember({"time", "space", "det", "em", "single"}));
  app.add_option("--config", config_path, "Key = value config file; flags override it");
  app.add_option("--n", mesh_list, "Mesh subdivisions per side, comma separated (h = 1/n)");
  app.add_option("--klist", k_list, "Time steps, comma separated: 1/64, 0.015625 or 64");
  app.add_option("--samples", samples, "Monte Carlo samples J");
  app.add_option("--alpha", alpha, "Noise intensity in G(u) = alpha u");
  app.add_option("--nu", nu, "Viscosity");
  app.add_option("--T", horizon, "Final time");
  app.add_option("--seed", seed, "Base seed; sample j uses (seed, j)");
  app.add_option("--fine-steps", fine_steps, "Finest Wiener resolution M0 (k0 = T/M0)");
  app.add_option("--workers", workers, "Worker threads (0 = all cores)");
  app.add_option("--out", out, "CSV output path (stdout if omitted)");
  app.add_flag("--desk", desk, "Scaled-down preset for the chosen study");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const sstokes::StudyKind kind = sstokes::parse_study_kind(test);
    sstokes::ExperimentConfig cfg = desk ? sstokes::ExperimentConfig::desk(kind) : sstokes::ExperimentConfig{};
    cfg.kind = kind;
    if (kind == sstokes::StudyKind::Deterministic) cfg.alpha = 0.0;
    if (!config_path.empty()) cfg = sstokes::load_config_file(config_path, cfg);
    if (!mesh_list.empty()) cfg.meshes = sstokes::parse_int_list(mesh_list);
    if (samples) cfg.samples = *samples;
    if (alpha) cfg.alpha = *alpha;
    if (nu) cfg.nu = *nu;
    if (horizon) cfg.T = *horizon;
    if (seed) cfg.seed = *seed;
    if (fine_steps) cfg.fine_steps = *fine_steps;
    if (workers) cfg.workers = *workers;
    if (!out.empty()) cfg.output = out;
    if (!k_list.empty()) {
      std::istringstream in("klist = " + k_list);
      cfg = sstokes::parse_config(in, cfg);
    }
    cfg.validate();

    std::ofstream file;
    if (!cfg.output.empty()) {
      file.open(cfg.output);
      if (!file) throw std::runtime_error("cannot write '" + cfg.output + "'");
    }
    std::ostream& csv = cfg.output.empty() ? std::cout : file;

    const auto write_sidecars = [&](const auto& metadata, const sstokes::ConvergenceTable* table) {
      if (cfg.output.empty()) return;
      std::ofstream meta(sidecar(cfg.output, "_meta.txt"));
      sstokes::emit_metadata(metadata, meta);
      if (table) {
        std::ofstream plot(sidecar(cfg.output, "_loglog.dat"));
        sstokes::emit_plot_data(*table, plot);
      }
    };

    switch (cfg.kind) {
      case sstokes::StudyKind::Time:
      case sstokes::StudyKind::Space:
      case sstokes::StudyKind::Deterministic: {
        const auto table = cfg.kind == sstokes::StudyKind::Time    ? sstokes::run_time_convergence(cfg)
                           : cfg.kind == sstokes::StudyKind::Space ? sstokes::run_space_convergence(cfg)
                                                               : sstokes::run_deterministic_study(cfg);
        sstokes::emit_csv(table, csv);
        write_sidecars(table.metadata, &table);
        std::cerr << sstokes::format_table(table);
        print_diagnostics(table.diagnostics);
        break;
      }
      case sstokes::StudyKind::EmComparison: {
        const auto table = sstokes::run_em_comparison(cfg);
        sstokes::emit_csv(table, csv);
        write_sidecars(table.metadata, nullptr);
        std::cerr << sstokes::format_table(table);
        print_diagnostics(table.diagnostics);
        break;
      }
      case sstokes::StudyKind::Single: {
        sstokes::Diagnostics diag;
        sstokes::emit_csv(sstokes::run_single(cfg, &diag), csv);
        print_diagnostics(diag);
        break;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
