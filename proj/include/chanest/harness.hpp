// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "chanest/estimators.hpp"
#include "chanest/gmm_cme.hpp"
#include "chanest/types.hpp"

namespace chanest {

// Everything a run needs; parsed from a flat key = value file, overridable
// from the command line.  Defaults reproduce the reference experiment scale.
struct ExperimentConfig {
  ArrayGeometry geometry{64, 0.5};
  int snapshots = 10;            // T
  int clusters = 3;
  double angular_spread_deg = 2.0;
  double rician_k_db = 0.0;

  std::string sweep = "snr";     // snr | rician_k | angular_spread | snapshots
  std::vector<double> snr_db = {-15, -10, -5, 0, 5, 10, 15, 20};
  std::vector<double> rician_k_db_values;
  std::vector<double> angular_spread_values;
  std::vector<int> snapshot_values;

  int trials = 1000;
  std::uint64_t seed = 20250817;
  long training_samples = 150000;
  int components = 128;          // J
  int grid_multiplier = 16;      // grid size = multiplier * M
  int em_max_iterations = 200;
  double em_tolerance = 1e-6;
  std::vector<std::string> estimators = {"ls",          "gmm",
                                         "music-s-cov", "genie-omp",
                                         "genie-music", "genie-esprit",
                                         "genie-lmmse", "music-gmm"};
  int omp_max_sparsity = 16;
  int parametric_max_paths = 8;
  int threads = 0;               // 0 -> hardware concurrency
  std::string output = "results.csv";

  int grid_size() const { return grid_multiplier * geometry.antennas; }
};

ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);
void apply_config_line(ExperimentConfig& config, const std::string& key,
                       const std::string& value);

// Built-in experiment definitions (fig2a, fig2b, fig3, fig4, table1).
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Hash over the fields that influence training; artifact files carry it so a
// run can refuse stale models.
std::uint64_t training_config_hash(const ExperimentConfig& config);

struct ResultRow {
  std::string sweep_param;
  double sweep_value = 0.0;
  std::string estimator;
  double nmse = 0.0;
  double doa_rmse_deg = 0.0;  // NaN when the estimator has no DoA stage
  long trials = 0;
  long failures = 0;
  double wall_s = 0.0;
};

struct ResultTable {
  std::vector<ResultRow> rows;
};

// (1/(N M)) sum ||h_n - hhat_n||^2.
double nmse(const std::vector<CVector>& estimates,
            const std::vector<CVector>& truths, int dimension);

// sqrt((1/N) sum |theta_n - thetahat_n|^2), degrees.
double rmse_deg(const std::vector<double>& estimated,
                const std::vector<double>& truth);

struct TrainedArtifacts {
  GmmModel nlos_gmm;   // fitted on steering-projected samples
  GmmModel full_gmm;   // fitted on raw channel samples
  CMatrix nlos_scov;   // global sample covariance of the projected set
  LosPrior prior;
  std::uint64_t config_hash = 0;
};

// Draws the training set (one channel per random scenario), builds the
// projected set, fits both mixtures, and computes the LoS power prior.
TrainedArtifacts train_pipeline(const ExperimentConfig& config,
                                std::ostream* log = nullptr);

void save_artifacts(const TrainedArtifacts& artifacts, const std::string& dir);
TrainedArtifacts load_artifacts(const std::string& dir,
                                const ExperimentConfig& config);

// Monte-Carlo sweep over the configured parameter.  Rician-factor and
// angular-spread sweeps retrain per point; the provided artifacts are reused
// whenever their config hash matches the point.
ResultTable run_sweep(const ExperimentConfig& config,
                      const TrainedArtifacts* artifacts,
                      std::ostream* log = nullptr);

void emit_csv(const ResultTable& table, const std::string& path);
std::string format_csv(const ResultTable& table);
ResultTable parse_csv_text(const std::string& text);

// Property / oracle suite on small sizes; returns the number of failures.
int run_validate(std::uint64_t seed, int threads, std::ostream& out);

}  // namespace chanest
