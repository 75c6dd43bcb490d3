// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <fstream>
#include <sstream>

#include "chanest/harness.hpp"

namespace chanest {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream stream(value);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::vector<double> parse_doubles(const std::string& value,
                                  const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split_list(value)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw std::invalid_argument("config: bad number '" + item + "' for " +
                                  key);
    }
  }
  if (out.empty()) throw std::invalid_argument("config: empty list for " + key);
  return out;
}

double parse_double(const std::string& value, const std::string& key) {
  try {
    return std::stod(trim(value));
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number '" + value + "' for " +
                                key);
  }
}

long parse_long(const std::string& value, const std::string& key) {
  try {
    return std::stol(trim(value));
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer '" + value + "' for " +
                                key);
  }
}

const std::vector<std::string> kKnownEstimators = {
    "ls",          "gmm",          "music-s-cov", "genie-omp",
    "genie-music", "genie-esprit", "genie-lmmse", "music-gmm"};

}  // namespace

void apply_config_line(ExperimentConfig& config, const std::string& key,
                       const std::string& value) {
  if (key == "antennas") {
    config.geometry.antennas = static_cast<int>(parse_long(value, key));
  } else if (key == "spacing") {
    config.geometry.spacing_ratio = parse_double(value, key);
  } else if (key == "snapshots") {
    config.snapshots = static_cast<int>(parse_long(value, key));
  } else if (key == "clusters") {
    config.clusters = static_cast<int>(parse_long(value, key));
  } else if (key == "angular_spread_deg") {
    config.angular_spread_deg = parse_double(value, key);
  } else if (key == "rician_k_db") {
    config.rician_k_db = parse_double(value, key);
  } else if (key == "sweep") {
    config.sweep = trim(value);
  } else if (key == "snr_db") {
    config.snr_db = parse_doubles(value, key);
  } else if (key == "rician_k_db_values") {
    config.rician_k_db_values = parse_doubles(value, key);
  } else if (key == "angular_spread_values") {
    config.angular_spread_values = parse_doubles(value, key);
  } else if (key == "snapshot_values") {
    config.snapshot_values.clear();
    for (double v : parse_doubles(value, key)) {
      config.snapshot_values.push_back(static_cast<int>(v));
    }
  } else if (key == "trials") {
    config.trials = static_cast<int>(parse_long(value, key));
  } else if (key == "seed") {
    config.seed = static_cast<std::uint64_t>(parse_long(value, key));
  } else if (key == "training_samples") {
    config.training_samples = parse_long(value, key);
  } else if (key == "components") {
    config.components = static_cast<int>(parse_long(value, key));
  } else if (key == "grid_multiplier") {
    config.grid_multiplier = static_cast<int>(parse_long(value, key));
  } else if (key == "em_max_iterations") {
    config.em_max_iterations = static_cast<int>(parse_long(value, key));
  } else if (key == "em_tolerance") {
    config.em_tolerance = parse_double(value, key);
  } else if (key == "estimators") {
    config.estimators = split_list(value);
  } else if (key == "omp_max_sparsity") {
    config.omp_max_sparsity = static_cast<int>(parse_long(value, key));
  } else if (key == "parametric_max_paths") {
    config.parametric_max_paths = static_cast<int>(parse_long(value, key));
  } else if (key == "threads") {
    config.threads = static_cast<int>(parse_long(value, key));
  } else if (key == "output") {
    config.output = trim(value);
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

namespace {

void validate_config(const ExperimentConfig& config) {
  if (config.geometry.antennas < 2) {
    throw std::invalid_argument("config: antennas must be >= 2");
  }
  if (config.snapshots < 1 || config.trials < 1 ||
      config.training_samples < 1 || config.components < 1 ||
      config.grid_multiplier < 1 || config.clusters < 1) {
    throw std::invalid_argument("config: counts must be positive");
  }
  if (config.sweep != "snr" && config.sweep != "rician_k" &&
      config.sweep != "angular_spread" && config.sweep != "snapshots") {
    throw std::invalid_argument("config: unknown sweep '" + config.sweep + "'");
  }
  if (config.snr_db.empty()) {
    throw std::invalid_argument("config: snr_db must not be empty");
  }
  if (config.sweep == "rician_k" && config.rician_k_db_values.empty()) {
    throw std::invalid_argument("config: rician_k sweep needs values");
  }
  if (config.sweep == "angular_spread" &&
      config.angular_spread_values.empty()) {
    throw std::invalid_argument("config: angular_spread sweep needs values");
  }
  if (config.sweep == "snapshots" && config.snapshot_values.empty()) {
    throw std::invalid_argument("config: snapshots sweep needs values");
  }
  for (const auto& tag : config.estimators) {
    if (std::find(kKnownEstimators.begin(), kKnownEstimators.end(), tag) ==
        kKnownEstimators.end()) {
      throw std::invalid_argument("config: unknown estimator '" + tag + "'");
    }
  }
  if (config.estimators.empty()) {
    throw std::invalid_argument("config: estimator list must not be empty");
  }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig config;
  std::stringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  " is not key = value");
    }
    apply_config_line(config, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  validate_config(config);
  return config;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::vector<std::string> preset_names() {
  return {"fig2a", "fig2b", "fig3", "fig4", "table1"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig config;  // defaults carry the reference scale
  if (name == "fig2a") {
    config.sweep = "snr";
    config.rician_k_db = 10.0;
  } else if (name == "fig2b") {
    config.sweep = "snr";
    config.rician_k_db = 0.0;
  } else if (name == "fig3") {
    config.sweep = "rician_k";
    config.snr_db = {0.0};
    config.rician_k_db_values = {-6, -4, -2, 0, 2, 4, 6, 8, 10};
  } else if (name == "fig4") {
    config.sweep = "angular_spread";
    config.snr_db = {0.0};
    config.rician_k_db = 0.0;
    config.angular_spread_values = {0.2, 0.5, 1, 2, 5};
  } else if (name == "table1") {
    config.sweep = "snapshots";
    config.snr_db = {0.0, -10.0};
    config.rician_k_db = 0.0;
    config.snapshot_values = {1, 3, 5, 10, 20, 100};
    config.estimators = {"music-gmm"};
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  config.output = name + ".csv";
  return config;
}

std::uint64_t training_config_hash(const ExperimentConfig& config) {
  std::ostringstream canon;
  canon << "M=" << config.geometry.antennas
        << ";d=" << config.geometry.spacing_ratio
        << ";clusters=" << config.clusters
        << ";spread=" << config.angular_spread_deg
        << ";k=" << config.rician_k_db
        << ";L=" << config.training_samples
        << ";J=" << config.components
        << ";G=" << config.grid_size()
        << ";seed=" << config.seed
        << ";em_it=" << config.em_max_iterations
        << ";em_tol=" << config.em_tolerance;
  // FNV-1a
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (char c : canon.str()) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ull;
  }
  return hash;
}

}  // namespace chanest
