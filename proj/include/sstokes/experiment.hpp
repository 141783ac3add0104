#pragma once

#include "sstokes/errors.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sstokes {

enum class StudyKind { Time, Space, Deterministic, Single, EmComparison };

StudyKind parse_study_kind(const std::string& name);
std::string to_string(StudyKind kind);

/// Parameters of one batch study. Defaults give the full-scale
/// temporal study (h = 1/40, J = 300, k = 1/64 .. 1/1024, k0 = 1/2048, alpha = 1/2).
struct ExperimentConfig {
  StudyKind kind = StudyKind::Time;
  std::vector<int> meshes{40};                    // subdivisions per side, h = 1/n
  std::vector<int> steps{64, 128, 256, 512, 1024};  // step counts, k = T/M
  int samples = 300;
  std::uint64_t seed = 20240601;
  double alpha = 0.5;
  double nu = 1.0;
  double T = 1.0;
  int fine_steps = 2048;  // finest Wiener resolution M0
  int workers = 0;        // 0: hardware concurrency
  std::string output;

  /// Scaled-down preset for `kind`.
  static ExperimentConfig desk(StudyKind kind);

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

/// Applies `key = value` lines (keys are the field names above; `#` starts a
/// comment) on top of `base`.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base = {});

/// "1/64", "0.015625" or a bare denominator "64" -> step count T/k.
int parse_step_token(const std::string& token, double T);
std::vector<int> parse_int_list(const std::string& text);

/// Worst structural defects seen over every trajectory of a study.
struct Diagnostics {
  double max_divergence = 0;
  double max_pressure_mean = 0;
  double max_residual = 0;

  void merge(const Diagnostics& other);
  template <typename Scalar>
  void merge(const Trajectory<Scalar>& traj) {
    max_divergence = std::max(max_divergence, double(traj.max_divergence));
    max_pressure_mean = std::max(max_pressure_mean, double(traj.max_pressure_mean));
    max_residual = std::max(max_residual, double(traj.max_residual));
  }
};

struct ConvergenceRow {
  double resolution = 0;  // k or h
  ErrorReport report;
};

struct ConvergenceTable {
  std::string variable = "k";
  std::vector<ConvergenceRow> rows;
  Diagnostics diagnostics;
  std::map<std::string, std::string> metadata;

  /// Order between rows i-1 and i; empty for the first row.
  std::optional<double> order_l2h1(std::size_t i) const;
  std::optional<double> order_linfl2(std::size_t i) const;
  std::optional<double> order_l2l2(std::size_t i) const;
  std::optional<double> order_press(std::size_t i) const;
};

ConvergenceTable run_time_convergence(const ExperimentConfig& cfg);
ConvergenceTable run_space_convergence(const ExperimentConfig& cfg);
/// alpha must be zero. Several meshes: errors against the exact solution at
/// fixed k. One mesh: errors against the same-mesh k/2 run, which removes the
/// spatial error floor.
ConvergenceTable run_deterministic_study(const ExperimentConfig& cfg);

struct EmComparisonRow {
  double resolution = 0;
  ErrorReport milstein;
  ErrorReport euler_maruyama;
  /// Paired t statistic of (EM - Milstein) per-sample L2(H1) velocity errors.
  double paired_t_l2h1 = 0;
  double paired_t_linfl2 = 0;
};

struct EmComparisonTable {
  std::vector<EmComparisonRow> rows;
  Diagnostics diagnostics;
  std::map<std::string, std::string> metadata;
};

/// Both schemes at each k on the same paths, measured against a Milstein
/// reference at the finest Wiener resolution.
EmComparisonTable run_em_comparison(const ExperimentConfig& cfg);

struct SingleRunRecord {
  double t = 0;
  double velocity_l2 = 0;
  double velocity_h1 = 0;
  double pressure_l2 = 0;
  double averaged_pressure_l2 = 0;
  double divergence = 0;
};

/// One trajectory (sample 0) on meshes[0] with steps[0] steps.
std::vector<SingleRunRecord> run_single(const ExperimentConfig& cfg, Diagnostics* diagnostics = nullptr);

void emit_csv(const ConvergenceTable& table, std::ostream& out);
void emit_csv(const ConvergenceTable& table, const std::string& path);
void emit_csv(const EmComparisonTable& table, std::ostream& out);
void emit_csv(const std::vector<SingleRunRecord>& records, std::ostream& out);
/// log2(resolution) followed by log2 of the three errors, one line per row.
void emit_plot_data(const ConvergenceTable& table, std::ostream& out);
void emit_metadata(const std::map<std::string, std::string>& metadata, std::ostream& out);

std::string format_table(const ConvergenceTable& table);
std::string format_table(const EmComparisonTable& table);

}  // namespace sstokes
