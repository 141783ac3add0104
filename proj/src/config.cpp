#include "sstokes/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

namespace sstokes {

namespace {

std::string trim(const std::string& s) {
  const auto begin = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  const auto end = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
  return begin < end ? std::string(begin, end) : std::string();
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " expects a number, got '" + value + "'");
  }
  if (used != value.size()) {
    throw std::invalid_argument("config: " + key + " expects a number, got '" + value + "'");
  }
  return x;
}

long long parse_integer(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " expects an integer, got '" + value + "'");
  }
  if (used != value.size()) {
    throw std::invalid_argument("config: " + key + " expects an integer, got '" + value + "'");
  }
  return x;
}

}  // namespace

StudyKind parse_study_kind(const std::string& name) {
  if (name == "time" || name == "time-convergence") return StudyKind::Time;
  if (name == "space" || name == "space-convergence") return StudyKind::Space;
  if (name == "det" || name == "deterministic") return StudyKind::Deterministic;
  if (name == "single" || name == "single-run") return StudyKind::Single;
  if (name == "em" || name == "em-comparison") return StudyKind::EmComparison;
  throw std::invalid_argument("unknown study kind '" + name + "'");
}

std::string to_string(StudyKind kind) {
  switch (kind) {
    case StudyKind::Time: return "time";
    case StudyKind::Space: return "space";
    case StudyKind::Deterministic: return "det";
    case StudyKind::Single: return "single";
    case StudyKind::EmComparison: return "em";
  }
  return "time";
}

ExperimentConfig ExperimentConfig::desk(StudyKind kind) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case StudyKind::Time:
      cfg.meshes = {20};
      cfg.steps = {64, 128, 256, 512};
      cfg.samples = 100;
      break;
    case StudyKind::Space:
      cfg.meshes = {8, 16, 32};
      cfg.steps = {256};
      cfg.samples = 50;
      break;
    case StudyKind::Deterministic:
      cfg.meshes = {8, 16, 32};
      cfg.steps = {1024};
      cfg.samples = 1;
      cfg.alpha = 0.0;
      break;
    case StudyKind::EmComparison:
      cfg.meshes = {20};
      cfg.steps = {256};
      cfg.samples = 100;
      break;
    case StudyKind::Single:
      cfg.meshes = {20};
      cfg.steps = {256};
      cfg.samples = 1;
      break;
  }
  return cfg;
}

void ExperimentConfig::validate() const {
  if (meshes.empty()) throw std::invalid_argument("config: meshes must not be empty");
  if (steps.empty()) throw std::invalid_argument("config: steps must not be empty");
  for (int n : meshes) {
    if (n < 1) throw std::invalid_argument("config: mesh subdivisions must be >= 1");
  }
  if (samples < 1) throw std::invalid_argument("config: samples must be >= 1");
  if (!(T > 0)) throw std::invalid_argument("config: T must be positive");
  if (!(nu > 0)) throw std::invalid_argument("config: nu must be positive");
  if (fine_steps < 1) throw std::invalid_argument("config: fine_steps must be >= 1");
  if (workers < 0) throw std::invalid_argument("config: workers must be >= 0");
  for (int m : steps) {
    if (m < 1) throw std::invalid_argument("config: step counts must be >= 1");
    const bool needs_half = (kind == StudyKind::Time);
    const int finest = needs_half ? 2 * m : m;
    if (kind != StudyKind::Deterministic && fine_steps % finest != 0) {
      throw std::invalid_argument("config: step count " + std::to_string(finest) +
                                  " does not divide fine_steps " + std::to_string(fine_steps));
    }
  }
  if (kind == StudyKind::Deterministic && alpha != 0.0) {
    throw std::invalid_argument("config: the deterministic study requires alpha = 0");
  }
}

int parse_step_token(const std::string& token, double T) {
  const std::string t = trim(token);
  double k = 0;
  if (const auto slash = t.find('/'); slash != std::string::npos) {
    const double num = parse_double("k", trim(t.substr(0, slash)));
    const double den = parse_double("k", trim(t.substr(slash + 1)));
    if (!(den > 0)) throw std::invalid_argument("config: invalid step '" + token + "'");
    k = num / den;
  } else {
    const double x = parse_double("k", t);
    k = x >= 1.0 ? 1.0 / x : x;
  }
  if (!(k > 0)) throw std::invalid_argument("config: invalid step '" + token + "'");
  const double steps = T / k;
  const long long rounded = std::llround(steps);
  if (rounded < 1 || std::abs(steps - double(rounded)) > 1e-9 * steps) {
    throw std::invalid_argument("config: step '" + token + "' does not divide T into whole steps");
  }
  return static_cast<int>(rounded);
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& item : split_list(text)) {
    out.push_back(static_cast<int>(parse_integer("list", item)));
  }
  if (out.empty()) throw std::invalid_argument("config: empty list '" + text + "'");
  return out;
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig cfg) {
  std::string line;
  int lineno = 0;
  // Steps may be written as k values, which depend on T; resolve them last.
  std::optional<std::string> step_text;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "kind") cfg.kind = parse_study_kind(value);
    else if (key == "meshes" || key == "n") cfg.meshes = parse_int_list(value);
    else if (key == "steps") cfg.steps = parse_int_list(value);
    else if (key == "klist") step_text = value;
    else if (key == "samples") cfg.samples = static_cast<int>(parse_integer(key, value));
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_integer(key, value));
    else if (key == "alpha") cfg.alpha = parse_double(key, value);
    else if (key == "nu") cfg.nu = parse_double(key, value);
    else if (key == "T") cfg.T = parse_double(key, value);
    else if (key == "fine_steps") cfg.fine_steps = static_cast<int>(parse_integer(key, value));
    else if (key == "workers") cfg.workers = static_cast<int>(parse_integer(key, value));
    else if (key == "output") cfg.output = value;
    else throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  if (step_text) {
    cfg.steps.clear();
    for (const auto& item : split_list(*step_text)) cfg.steps.push_back(parse_step_token(item, cfg.T));
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
  return parse_config(in, std::move(base));
}

}  // namespace sstokes
