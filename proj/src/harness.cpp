// SPDX-License-Identifier: Apache-2.0

#include "chanest/harness.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "chanest/numerics.hpp"
#include "chanest/parallel.hpp"
#include "chanest/rng.hpp"

namespace chanest {

namespace {

// Seed-stream tags so training, trials, and EM never share a stream.
constexpr std::uint64_t kTagTrainingSample = 0x54524149ull;  // "TRAI"
constexpr std::uint64_t kTagNlosEm = 0x474d4d31ull;
constexpr std::uint64_t kTagFullEm = 0x474d4d32ull;

double snr_db_to_noise_var(double snr_db) {
  return 1.0 / std::pow(10.0, snr_db / 10.0);
}

std::string format_double(double value) {
  char buffer[64];
  const auto result =
      std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

ScenarioConfig scenario_config(const ExperimentConfig& config) {
  ScenarioConfig scen;
  scen.geometry = config.geometry;
  scen.cluster_count = config.clusters;
  scen.rician_k_db = config.rician_k_db;
  scen.angular_spread_deg = config.angular_spread_deg;
  return scen;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

}  // namespace

double nmse(const std::vector<CVector>& estimates,
            const std::vector<CVector>& truths, int dimension) {
  if (estimates.empty() || estimates.size() != truths.size()) {
    throw std::invalid_argument("nmse: lists must be nonempty and equal-sized");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    total += (truths[i] - estimates[i]).squaredNorm();
  }
  return total / (static_cast<double>(estimates.size()) * dimension);
}

double rmse_deg(const std::vector<double>& estimated,
                const std::vector<double>& truth) {
  if (estimated.empty() || estimated.size() != truth.size()) {
    throw std::invalid_argument(
        "rmse_deg: lists must be nonempty and equal-sized");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    const double diff = estimated[i] - truth[i];
    total += diff * diff;
  }
  return std::sqrt(total / static_cast<double>(estimated.size()));
}

TrainedArtifacts train_pipeline(const ExperimentConfig& config,
                                std::ostream* log) {
  const int m = config.geometry.antennas;
  const long count = config.training_samples;
  if (count < config.components) {
    throw std::invalid_argument(
        "train_pipeline: training set smaller than component count");
  }
  const SteeringGrid grid =
      make_steering_grid(config.geometry, config.grid_size());
  const ScenarioConfig scen = scenario_config(config);

  Stopwatch watch;
  CMatrix channels(m, count);
  parallel_for(
      static_cast<std::size_t>(count),
      [&](std::size_t i) {
        Rng rng(derive_seed(config.seed, kTagTrainingSample, i));
        const ChannelScenario scenario = draw_scenario(rng, scen);
        const CMatrix cov =
            nlos_covariance(scenario.clusters, scenario.geometry);
        channels.col(i) =
            draw_channels(scenario, 1, rng, make_nlos_sampler(cov));
      },
      config.threads);
  if (log) {
    *log << "training set: " << count << " samples drawn in "
         << format_double(watch.seconds()) << " s\n";
  }

  TrainedArtifacts artifacts;
  artifacts.prior = estimate_plos(channels, grid, config.threads);

  const CMatrix projected = build_training_set(channels, grid, config.threads);
  artifacts.nlos_scov = CMatrix::Zero(m, m);
  artifacts.nlos_scov.selfadjointView<Eigen::Lower>().rankUpdate(
      projected, 1.0 / static_cast<double>(count));
  artifacts.nlos_scov.triangularView<Eigen::StrictlyUpper>() =
      artifacts.nlos_scov.adjoint().triangularView<Eigen::StrictlyUpper>();

  EmConfig em;
  em.max_iterations = config.em_max_iterations;
  em.tolerance = config.em_tolerance;

  Stopwatch nlos_watch;
  em.seed = derive_seed(config.seed, kTagNlosEm);
  std::vector<double> trace;
  artifacts.nlos_gmm =
      fit_gmm(projected, config.components, em, config.threads, &trace);
  artifacts.nlos_gmm.noise_rule = NoiseRule::projected;
  artifacts.nlos_gmm.grid_id = static_cast<std::uint32_t>(grid.size());
  artifacts.nlos_gmm.angular_spread_deg = config.angular_spread_deg;
  artifacts.nlos_gmm.rician_k_db = config.rician_k_db;
  artifacts.nlos_gmm.seed = config.seed;
  if (log) {
    *log << "projected mixture: J = " << config.components << ", "
         << trace.size() << " EM iterations, "
         << format_double(nlos_watch.seconds()) << " s\n";
  }

  Stopwatch full_watch;
  em.seed = derive_seed(config.seed, kTagFullEm);
  trace.clear();
  artifacts.full_gmm =
      fit_gmm(channels, config.components, em, config.threads, &trace);
  artifacts.full_gmm.noise_rule = NoiseRule::full;
  artifacts.full_gmm.grid_id = 0;
  artifacts.full_gmm.angular_spread_deg = config.angular_spread_deg;
  artifacts.full_gmm.rician_k_db = config.rician_k_db;
  artifacts.full_gmm.seed = config.seed;
  if (log) {
    *log << "full mixture: J = " << config.components << ", " << trace.size()
         << " EM iterations, " << format_double(full_watch.seconds()) << " s\n";
  }

  artifacts.config_hash = training_config_hash(config);
  return artifacts;
}

namespace {

constexpr char kExtrasMagic[8] = {'C', 'H', 'E', 'S', 'T', 'E', 'X', 'T'};
constexpr std::uint32_t kExtrasVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "artifact files are little-endian");

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("artifact file truncated: " + path);
  return value;
}

}  // namespace

void save_artifacts(const TrainedArtifacts& artifacts, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_gmm(artifacts.nlos_gmm, (fs::path(dir) / "nlos_gmm.bin").string());
  save_gmm(artifacts.full_gmm, (fs::path(dir) / "full_gmm.bin").string());

  const std::string extras_path = (fs::path(dir) / "extras.bin").string();
  std::ofstream out(extras_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + extras_path);
  out.write(kExtrasMagic, sizeof(kExtrasMagic));
  write_pod(out, kExtrasVersion);
  write_pod(out, static_cast<std::uint32_t>(artifacts.nlos_scov.rows()));
  write_pod(out, artifacts.config_hash);
  write_pod(out, artifacts.prior.los_power);
  for (Eigen::Index row = 0; row < artifacts.nlos_scov.rows(); ++row) {
    for (Eigen::Index col = 0; col < artifacts.nlos_scov.cols(); ++col) {
      write_pod(out, artifacts.nlos_scov(row, col).real());
      write_pod(out, artifacts.nlos_scov(row, col).imag());
    }
  }
  if (!out) throw std::runtime_error("write failed: " + extras_path);

  std::ofstream meta((fs::path(dir) / "meta.txt").string(), std::ios::trunc);
  meta << "config_hash = " << artifacts.config_hash << "\n"
       << "antennas = " << artifacts.nlos_gmm.dimension << "\n"
       << "components = " << artifacts.nlos_gmm.components() << "\n"
       << "training_samples = " << artifacts.nlos_gmm.sample_count << "\n"
       << "grid_size = " << artifacts.nlos_gmm.grid_id << "\n"
       << "los_power = " << format_double(artifacts.prior.los_power) << "\n";
}

TrainedArtifacts load_artifacts(const std::string& dir,
                                const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  TrainedArtifacts artifacts;
  artifacts.nlos_gmm = load_gmm((fs::path(dir) / "nlos_gmm.bin").string());
  artifacts.full_gmm = load_gmm((fs::path(dir) / "full_gmm.bin").string());

  const std::string extras_path = (fs::path(dir) / "extras.bin").string();
  std::ifstream in(extras_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + extras_path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kExtrasMagic, sizeof(kExtrasMagic)) != 0) {
    throw std::runtime_error("not an artifact file: " + extras_path);
  }
  const auto version = read_pod<std::uint32_t>(in, extras_path);
  if (version != kExtrasVersion) {
    throw std::runtime_error("unsupported artifact version in " + extras_path);
  }
  const auto m = read_pod<std::uint32_t>(in, extras_path);
  artifacts.config_hash = read_pod<std::uint64_t>(in, extras_path);
  artifacts.prior.los_power = read_pod<double>(in, extras_path);
  artifacts.nlos_scov.resize(m, m);
  for (std::uint32_t row = 0; row < m; ++row) {
    for (std::uint32_t col = 0; col < m; ++col) {
      const double re = read_pod<double>(in, extras_path);
      const double im = read_pod<double>(in, extras_path);
      artifacts.nlos_scov(row, col) = cd(re, im);
    }
  }

  if (artifacts.nlos_gmm.dimension != config.geometry.antennas ||
      artifacts.full_gmm.dimension != config.geometry.antennas ||
      static_cast<int>(m) != config.geometry.antennas) {
    throw std::runtime_error(
        "artifacts were trained for a different antenna count");
  }
  if (artifacts.config_hash != training_config_hash(config)) {
    throw std::runtime_error(
        "artifacts were trained under a different configuration "
        "(config hash mismatch)");
  }
  return artifacts;
}

namespace {

struct SweepPoint {
  std::string param;
  double value = 0.0;
  double snr_db = 0.0;
  ExperimentConfig cfg;
};

std::vector<SweepPoint> enumerate_points(const ExperimentConfig& config) {
  std::vector<SweepPoint> points;
  if (config.sweep == "snr") {
    for (double snr : config.snr_db) {
      points.push_back({"snr_db", snr, snr, config});
    }
  } else if (config.sweep == "rician_k") {
    for (double k : config.rician_k_db_values) {
      SweepPoint point{"rician_k_db", k, config.snr_db.front(), config};
      point.cfg.rician_k_db = k;
      points.push_back(std::move(point));
    }
  } else if (config.sweep == "angular_spread") {
    for (double spread : config.angular_spread_values) {
      SweepPoint point{"angular_spread_deg", spread, config.snr_db.front(),
                       config};
      point.cfg.angular_spread_deg = spread;
      points.push_back(std::move(point));
    }
  } else if (config.sweep == "snapshots") {
    for (double snr : config.snr_db) {
      for (int t : config.snapshot_values) {
        SweepPoint point{"snapshots@snr" + format_double(snr) + "dB",
                         static_cast<double>(t), snr, config};
        point.cfg.snapshots = t;
        points.push_back(std::move(point));
      }
    }
  } else {
    throw std::invalid_argument("run_sweep: unknown sweep " + config.sweep);
  }
  return points;
}

bool needs_training(const ExperimentConfig& config) {
  for (const auto& tag : config.estimators) {
    if (tag == "music-gmm" || tag == "gmm" || tag == "music-s-cov") return true;
  }
  return false;
}

struct TrialAccumulator {
  std::vector<double> sq_err;
  std::vector<double> doa_sq_err;  // NaN when absent
  std::vector<char> failed;
  std::vector<double> wall;

  explicit TrialAccumulator(int trials)
      : sq_err(trials, 0.0),
        doa_sq_err(trials, std::numeric_limits<double>::quiet_NaN()),
        failed(trials, 0),
        wall(trials, 0.0) {}
};

}  // namespace

ResultTable run_sweep(const ExperimentConfig& config,
                      const TrainedArtifacts* artifacts, std::ostream* log) {
  const std::vector<SweepPoint> points = enumerate_points(config);
  const SteeringGrid grid =
      make_steering_grid(config.geometry, config.grid_size());
  const bool trained_needed = needs_training(config);
  const bool retrain_per_point =
      config.sweep == "rician_k" || config.sweep == "angular_spread";

  TrainedArtifacts base_storage;
  const TrainedArtifacts* base = artifacts;
  if (trained_needed && !retrain_per_point) {
    if (base == nullptr) {
      if (log) *log << "no artifacts supplied, training now\n";
      base_storage = train_pipeline(config, log);
      base = &base_storage;
    } else if (base->config_hash != training_config_hash(config)) {
      throw std::runtime_error(
          "run_sweep: supplied artifacts do not match the configuration");
    }
  }

  ResultTable table;
  for (std::size_t point_index = 0; point_index < points.size();
       ++point_index) {
    const SweepPoint& point = points[point_index];
    Stopwatch point_watch;

    TrainedArtifacts point_storage;
    const TrainedArtifacts* point_artifacts = base;
    if (trained_needed && retrain_per_point) {
      const std::uint64_t point_hash = training_config_hash(point.cfg);
      if (artifacts != nullptr && artifacts->config_hash == point_hash) {
        point_artifacts = artifacts;
      } else {
        if (log) {
          *log << "retraining for " << point.param << " = "
               << format_double(point.value) << "\n";
        }
        point_storage = train_pipeline(point.cfg, log);
        point_artifacts = &point_storage;
      }
    }

    const double noise_var = snr_db_to_noise_var(point.snr_db);
    const ScenarioConfig scen = scenario_config(point.cfg);

    // Per-noise-level precomputation shared read-only by all trial workers.
    FilterBank nlos_bank;
    FilterBank full_bank;
    CMatrix scov_filter;
    bool want_music_gmm = false;
    bool want_full_gmm = false;
    bool want_scov = false;
    for (const auto& tag : point.cfg.estimators) {
      want_music_gmm |= tag == "music-gmm";
      want_full_gmm |= tag == "gmm";
      want_scov |= tag == "music-s-cov";
    }
    if (want_music_gmm) {
      nlos_bank = precompute_filters(point_artifacts->nlos_gmm, noise_var);
    }
    if (want_full_gmm) {
      full_bank = precompute_filters(point_artifacts->full_gmm, noise_var);
    }
    if (want_scov) {
      scov_filter = scov_nlos_filter(point_artifacts->nlos_scov, noise_var);
    }

    const int trials = point.cfg.trials;
    const auto& tags = point.cfg.estimators;
    std::vector<TrialAccumulator> acc(tags.size(), TrialAccumulator(trials));

    parallel_for(
        static_cast<std::size_t>(trials),
        [&](std::size_t trial) {
          Rng rng(derive_seed(config.seed, point_index, trial));
          const ChannelScenario scenario = draw_scenario(rng, scen);
          const CMatrix nlos_cov =
              nlos_covariance(scenario.clusters, scenario.geometry);
          const CMatrix channels = draw_channels(
              scenario, point.cfg.snapshots, rng, make_nlos_sampler(nlos_cov));
          const ObservationBlock block =
              add_noise(channels, noise_var, rng);

          for (std::size_t e = 0; e < tags.size(); ++e) {
            Stopwatch watch;
            try {
              EstimatorOutput out;
              const std::string& tag = tags[e];
              if (tag == "ls") {
                out = ls_estimate(block.pilot);
              } else if (tag == "gmm") {
                out = full_gmm(block.pilot, point_artifacts->full_gmm,
                               &full_bank);
              } else if (tag == "music-s-cov") {
                out = music_scov(block.pilot, point_artifacts->nlos_scov,
                                 point_artifacts->prior, grid, &scov_filter);
              } else if (tag == "genie-omp") {
                out = genie_omp(block.pilot, block.target, grid,
                                point.cfg.omp_max_sparsity);
              } else if (tag == "genie-music") {
                out = genie_parametric(block.pilot, block.target,
                                       SubspaceMethod::music,
                                       point.cfg.parametric_max_paths, grid);
              } else if (tag == "genie-esprit") {
                out = genie_parametric(block.pilot, block.target,
                                       SubspaceMethod::esprit,
                                       point.cfg.parametric_max_paths, grid);
              } else if (tag == "genie-lmmse") {
                out = genie_lmmse(block.pilot, scenario, &nlos_cov);
              } else if (tag == "music-gmm") {
                out = music_gmm(block.pilot, point_artifacts->nlos_gmm,
                                point_artifacts->prior, grid, &nlos_bank);
              } else {
                throw std::invalid_argument("unknown estimator tag " + tag);
              }
              acc[e].sq_err[trial] =
                  (block.target - out.channel_estimate).squaredNorm();
              if (out.doa_estimate_deg) {
                const double diff =
                    *out.doa_estimate_deg - scenario.los_angle_deg;
                acc[e].doa_sq_err[trial] = diff * diff;
              }
            } catch (const std::exception&) {
              acc[e].failed[trial] = 1;
            }
            acc[e].wall[trial] = watch.seconds();
          }
        },
        config.threads);

    for (std::size_t e = 0; e < tags.size(); ++e) {
      ResultRow row;
      row.sweep_param = point.param;
      row.sweep_value = point.value;
      row.estimator = tags[e];

      long ok = 0;
      long failures = 0;
      double total_sq = 0.0;
      double total_doa_sq = 0.0;
      long doa_count = 0;
      double wall = 0.0;
      for (int t = 0; t < trials; ++t) {
        wall += acc[e].wall[t];
        if (acc[e].failed[t]) {
          ++failures;
          continue;
        }
        ++ok;
        total_sq += acc[e].sq_err[t];
        if (!std::isnan(acc[e].doa_sq_err[t])) {
          total_doa_sq += acc[e].doa_sq_err[t];
          ++doa_count;
        }
      }
      row.trials = ok;
      row.failures = failures;
      row.wall_s = wall;
      row.nmse = ok > 0 ? total_sq / (static_cast<double>(ok) *
                                      config.geometry.antennas)
                        : std::numeric_limits<double>::quiet_NaN();
      row.doa_rmse_deg =
          doa_count > 0 ? std::sqrt(total_doa_sq / doa_count)
                        : std::numeric_limits<double>::quiet_NaN();
      if (log && failures > trials / 100) {
        *log << "warning: " << tags[e] << " failed " << failures << "/"
             << trials << " trials at " << point.param << " = "
             << format_double(point.value) << "\n";
      }
      table.rows.push_back(std::move(row));
    }

    if (log) {
      *log << "[" << (point_index + 1) << "/" << points.size() << "] "
           << point.param << " = " << format_double(point.value) << " done in "
           << format_double(point_watch.seconds()) << " s\n";
    }
  }
  return table;
}

std::string format_csv(const ResultTable& table) {
  std::vector<const ResultRow*> rows;
  rows.reserve(table.rows.size());
  for (const auto& row : table.rows) rows.push_back(&row);
  std::sort(rows.begin(), rows.end(),
            [](const ResultRow* lhs, const ResultRow* rhs) {
              if (lhs->sweep_param != rhs->sweep_param) {
                return lhs->sweep_param < rhs->sweep_param;
              }
              if (lhs->sweep_value != rhs->sweep_value) {
                return lhs->sweep_value < rhs->sweep_value;
              }
              return lhs->estimator < rhs->estimator;
            });

  std::string out =
      "sweep_param,sweep_value,estimator,nmse,doa_rmse_deg,trials,failures,"
      "wall_s\n";
  for (const ResultRow* row : rows) {
    out += row->sweep_param;
    out += ',';
    out += format_double(row->sweep_value);
    out += ',';
    out += row->estimator;
    out += ',';
    out += format_double(row->nmse);
    out += ',';
    out += format_double(row->doa_rmse_deg);
    out += ',';
    out += std::to_string(row->trials);
    out += ',';
    out += std::to_string(row->failures);
    out += ',';
    out += format_double(row->wall_s);
    out += '\n';
  }
  return out;
}

void emit_csv(const ResultTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << format_csv(table);
  if (!out) throw std::runtime_error("write failed: " + path);
}

ResultTable parse_csv_text(const std::string& text) {
  ResultTable table;
  std::stringstream stream(text);
  std::string line;
  bool first = true;
  while (std::getline(stream, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      continue;  // header
    }
    std::stringstream fields(line);
    std::string field;
    ResultRow row;
    std::getline(fields, row.sweep_param, ',');
    std::getline(fields, field, ',');
    row.sweep_value = std::stod(field);
    std::getline(fields, row.estimator, ',');
    std::getline(fields, field, ',');
    row.nmse = std::stod(field);
    std::getline(fields, field, ',');
    row.doa_rmse_deg = std::stod(field);
    std::getline(fields, field, ',');
    row.trials = std::stol(field);
    std::getline(fields, field, ',');
    row.failures = std::stol(field);
    std::getline(fields, field, ',');
    row.wall_s = std::stod(field);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace chanest
