// SPDX-License-Identifier: Apache-2.0
//
// chanest command line: train models, run configured experiments, run the
// built-in experiment presets, or validate the numerical properties.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "chanest/harness.hpp"

namespace {

struct CommonOptions {
  std::int64_t seed = -1;
  int threads = 0;
  int trials = -1;
};

void apply_common(chanest::ExperimentConfig& config,
                  const CommonOptions& options) {
  if (options.seed >= 0) {
    config.seed = static_cast<std::uint64_t>(options.seed);
  }
  if (options.threads > 0) config.threads = options.threads;
  if (options.trials > 0) config.trials = options.trials;
}

int do_train(const std::string& config_path, const std::string& out_dir,
             const CommonOptions& options) {
  chanest::ExperimentConfig config = chanest::parse_config_file(config_path);
  apply_common(config, options);
  const chanest::TrainedArtifacts artifacts =
      chanest::train_pipeline(config, &std::cerr);
  chanest::save_artifacts(artifacts, out_dir);
  std::cerr << "artifacts written to " << out_dir << "\n";
  return 0;
}

int do_run(const std::string& config_path, const std::string& models_dir,
           const std::string& out_csv, const CommonOptions& options) {
  chanest::ExperimentConfig config = chanest::parse_config_file(config_path);
  apply_common(config, options);
  if (!out_csv.empty()) config.output = out_csv;
  const chanest::TrainedArtifacts artifacts =
      chanest::load_artifacts(models_dir, config);
  const chanest::ResultTable table =
      chanest::run_sweep(config, &artifacts, &std::cerr);
  chanest::emit_csv(table, config.output);
  std::cerr << "results written to " << config.output << "\n";
  return 0;
}

int do_sweep(const std::string& preset_name, const std::string& out_csv,
             const std::string& models_dir, bool paper_scale,
             long training_samples, int components,
             const CommonOptions& options) {
  chanest::ExperimentConfig config = chanest::preset(preset_name);
  apply_common(config, options);
  if (training_samples > 0) config.training_samples = training_samples;
  if (components > 0) config.components = components;
  if (paper_scale) {
    config.trials = 1000;
    config.training_samples = 150000;
    config.components = 128;
  }
  if (!out_csv.empty()) config.output = out_csv;

  const chanest::TrainedArtifacts* artifacts = nullptr;
  chanest::TrainedArtifacts storage;
  if (!models_dir.empty()) {
    namespace fs = std::filesystem;
    bool loaded = false;
    if (fs::exists(fs::path(models_dir) / "nlos_gmm.bin")) {
      try {
        storage = chanest::load_artifacts(models_dir, config);
        loaded = true;
        std::cerr << "reusing artifacts from " << models_dir << "\n";
      } catch (const std::exception& e) {
        std::cerr << "cannot reuse " << models_dir << ": " << e.what() << "\n";
      }
    }
    if (!loaded) {
      storage = chanest::train_pipeline(config, &std::cerr);
      chanest::save_artifacts(storage, models_dir);
      std::cerr << "artifacts cached in " << models_dir << "\n";
    }
    artifacts = &storage;
  }

  const chanest::ResultTable table =
      chanest::run_sweep(config, artifacts, &std::cerr);
  chanest::emit_csv(table, config.output);
  std::cerr << "results written to " << config.output << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chanest: two-stage DoA + Gaussian-mixture channel estimation workbench"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  CommonOptions options;
  app.add_option("--seed", options.seed, "master seed override");
  app.add_option("--threads", options.threads, "worker thread count");
  app.add_option("--trials", options.trials, "Monte-Carlo trials override");

  auto* train = app.add_subcommand("train", "fit and persist the models");
  std::string train_config;
  std::string train_out = "models";
  train->add_option("--config", train_config, "experiment config file")
      ->required();
  train->add_option("--out", train_out, "output directory for artifacts");

  auto* run = app.add_subcommand("run", "run a configured experiment");
  std::string run_config;
  std::string run_models;
  std::string run_out;
  run->add_option("--config", run_config, "experiment config file")->required();
  run->add_option("--models", run_models, "directory with trained artifacts")
      ->required();
  run->add_option("--out", run_out, "output CSV path");

  auto* sweep = app.add_subcommand("sweep", "run a built-in preset");
  std::string preset_name;
  std::string sweep_out;
  std::string sweep_models;
  bool paper_scale = false;
  long sweep_training = -1;
  int sweep_components = -1;
  sweep->add_option("--preset", preset_name,
                    "one of: fig2a, fig2b, fig3, fig4, table1")
      ->required();
  sweep->add_option("--out", sweep_out, "output CSV path");
  sweep->add_option("--models", sweep_models,
                    "cache directory for trained artifacts");
  sweep->add_option("--training-samples", sweep_training,
                    "training set size override");
  sweep->add_option("--components", sweep_components,
                    "mixture component count override");
  sweep->add_flag("--paper-scale", paper_scale,
                  "force reference scale (trials 1e3, L 1.5e5, J 128)");

  auto* validate =
      app.add_subcommand("validate", "run the property and oracle suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train->parsed()) return do_train(train_config, train_out, options);
    if (run->parsed()) return do_run(run_config, run_models, run_out, options);
    if (sweep->parsed()) {
      return do_sweep(preset_name, sweep_out, sweep_models, paper_scale,
                      sweep_training, sweep_components, options);
    }
    if (validate->parsed()) {
      const std::uint64_t seed =
          options.seed >= 0 ? static_cast<std::uint64_t>(options.seed)
                            : 20250817ull;
      return chanest::run_validate(seed, options.threads, std::cout) == 0 ? 0
                                                                          : 1;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
