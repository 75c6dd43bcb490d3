// SPDX-License-Identifier: Apache-2.0

#include "chanest/gmm_cme.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "chanest/numerics.hpp"
#include "chanest/parallel.hpp"
#include "chanest/rng.hpp"

namespace chanest {

namespace {

constexpr double kLogPi = 1.1447298858494001741;
constexpr double kCollapseWeight = 1e-12;
constexpr double kCollapseTrace = 1e-12;
constexpr Eigen::Index kColumnBlock = 4096;

// Responsibilities below this are flushed to exact zero.  Specialised
// components drive most posteriors into the subnormal range, where every
// multiply-accumulate of the M-step costs a microcode trap; the statistical
// effect of the flush is orders of magnitude below the covariance ridge.
constexpr double kResponsibilityFloor = 1e-12;

double noise_scale(NoiseRule rule, int dimension) {
  return rule == NoiseRule::projected
             ? (dimension - 1) / static_cast<double>(dimension)
             : 1.0;
}

// Lower-triangular inverse of a Cholesky factor; turns the per-sample
// triangular solves of the E-step into one dense product per component.
CMatrix triangular_inverse(const CMatrix& factor) {
  CMatrix inv = CMatrix::Identity(factor.rows(), factor.cols());
  factor.triangularView<Eigen::Lower>().solveInPlace(inv);
  return inv;
}

void require_model(const GmmModel& model) {
  if (model.components() < 1 || model.dimension < 1) {
    throw std::invalid_argument("gmm: model is empty");
  }
}

}  // namespace

double effective_noise_variance(const GmmModel& model, double noise_var) {
  return noise_var * noise_scale(model.noise_rule, model.dimension);
}

double label_doa(const CVector& h, const SteeringGrid& grid) {
  if (grid.size() < 1) throw std::invalid_argument("label_doa: empty grid");
  const CVector corr = grid.steering.adjoint() * h;
  int best = 0;
  double best_power = std::norm(corr(0));
  for (int g = 1; g < grid.size(); ++g) {
    const double power = std::norm(corr(g));
    if (power > best_power) {
      best_power = power;
      best = g;
    }
  }
  return grid.angles_deg(best);
}

CVector project_nlos(const CVector& h, double angle_deg,
                     const ArrayGeometry& geometry) {
  const CVector a = steering_vector(angle_deg, geometry);
  return h - a * (a.dot(h));
}

void label_max(const CMatrix& channels, const SteeringGrid& grid,
               std::vector<int>* labels, std::vector<double>* peak_power,
               int threads) {
  const Eigen::Index count = channels.cols();
  if (labels) labels->assign(count, 0);
  if (peak_power) peak_power->assign(count, 0.0);

  const Eigen::Index blocks = (count + kColumnBlock - 1) / kColumnBlock;
  parallel_for(
      static_cast<std::size_t>(blocks),
      [&](std::size_t b) {
        const Eigen::Index begin = static_cast<Eigen::Index>(b) * kColumnBlock;
        const Eigen::Index width = std::min(kColumnBlock, count - begin);
        const CMatrix corr =
            grid.steering.adjoint() * channels.middleCols(begin, width);
        for (Eigen::Index c = 0; c < width; ++c) {
          int best = 0;
          double best_power = std::norm(corr(0, c));
          for (int g = 1; g < grid.size(); ++g) {
            const double power = std::norm(corr(g, c));
            if (power > best_power) {
              best_power = power;
              best = g;
            }
          }
          if (labels) (*labels)[begin + c] = best;
          if (peak_power) (*peak_power)[begin + c] = best_power;
        }
      },
      threads);
}

CMatrix build_training_set(const CMatrix& channels, const SteeringGrid& grid,
                           int threads) {
  if (channels.cols() < 1) {
    throw std::invalid_argument("build_training_set: no samples");
  }
  std::vector<int> labels;
  label_max(channels, grid, &labels, nullptr, threads);

  CMatrix projected(channels.rows(), channels.cols());
  const Eigen::Index blocks =
      (channels.cols() + kColumnBlock - 1) / kColumnBlock;
  parallel_for(
      static_cast<std::size_t>(blocks),
      [&](std::size_t b) {
        const Eigen::Index begin = static_cast<Eigen::Index>(b) * kColumnBlock;
        const Eigen::Index end =
            std::min<Eigen::Index>(begin + kColumnBlock, channels.cols());
        for (Eigen::Index c = begin; c < end; ++c) {
          const auto a = grid.steering.col(labels[c]);
          projected.col(c) = channels.col(c) - a * a.dot(channels.col(c));
        }
      },
      threads);
  return projected;
}

double log_gaussian(const CVector& x, const CVector& mean, const CMatrix& cov) {
  if (x.size() != mean.size() || x.size() != cov.rows()) {
    throw std::invalid_argument("log_gaussian: dimension mismatch");
  }
  const CMatrix factor = cholesky_hpd(cov);
  const double logdet = 2.0 * factor.diagonal().real().array().log().sum();
  CVector z = x - mean;
  factor.triangularView<Eigen::Lower>().solveInPlace(z);
  return -static_cast<double>(x.size()) * kLogPi - logdet - z.squaredNorm();
}

namespace {

struct EmState {
  CMatrix global_cov;  // sample covariance of the full training set
  double ridge = 0.0;
};

void reseed_component(GmmModel& model, int j, const CMatrix& samples, Rng& rng,
                      const EmState& state) {
  const Eigen::Index pick =
      static_cast<Eigen::Index>(rng.next_u64() % samples.cols());
  model.means[j] = samples.col(pick);
  model.covariances[j] = state.global_cov;
  model.covariances[j].diagonal().array() += state.ridge;
  model.weights[j] = 1.0 / model.components();
  double total = 0.0;
  for (double w : model.weights) total += w;
  for (double& w : model.weights) w /= total;
}

}  // namespace

GmmModel fit_gmm(const CMatrix& samples, int components, const EmConfig& config,
                 int threads, std::vector<double>* loglik_trace) {
  const Eigen::Index m = samples.rows();
  const Eigen::Index count = samples.cols();
  if (components < 1) {
    throw std::invalid_argument("fit_gmm: need at least one component");
  }
  if (count < components) {
    throw std::invalid_argument("fit_gmm: fewer samples than components");
  }
  if (config.init != "farthest-point") {
    throw std::invalid_argument("fit_gmm: unknown init strategy " + config.init);
  }
  if (config.max_iterations < 1 || !(config.tolerance > 0.0) ||
      config.covariance_ridge < 0.0) {
    throw std::invalid_argument("fit_gmm: EM configuration must be positive");
  }

  EmState state;
  state.ridge = config.covariance_ridge > 0.0
                    ? config.covariance_ridge
                    : 1e-6 * static_cast<double>(m);

  const CVector global_mean = samples.rowwise().mean();
  state.global_cov = CMatrix::Zero(m, m);
  {
    CMatrix centered = samples.colwise() - global_mean;
    state.global_cov.selfadjointView<Eigen::Lower>().rankUpdate(
        centered, 1.0 / static_cast<double>(count));
    state.global_cov.triangularView<Eigen::StrictlyUpper>() =
        state.global_cov.adjoint().triangularView<Eigen::StrictlyUpper>();
  }

  GmmModel model;
  model.dimension = static_cast<int>(m);
  model.sample_count = static_cast<std::uint64_t>(count);
  model.seed = config.seed;
  model.weights.assign(components, 1.0 / components);
  model.means.resize(components);
  model.covariances.resize(components);

  Rng rng(derive_seed(config.seed, 0xe11u));

  // Farthest-point seeding: first mean random, each further mean the sample
  // farthest from all chosen ones.
  {
    std::vector<Eigen::Index> centers;
    centers.push_back(static_cast<Eigen::Index>(rng.next_u64() % count));
    RVector dist2(count);
    for (Eigen::Index c = 0; c < count; ++c) {
      dist2(c) = (samples.col(c) - samples.col(centers[0])).squaredNorm();
    }
    while (static_cast<int>(centers.size()) < components) {
      Eigen::Index best = 0;
      dist2.maxCoeff(&best);
      centers.push_back(best);
      for (Eigen::Index c = 0; c < count; ++c) {
        dist2(c) = std::min(
            dist2(c), (samples.col(c) - samples.col(best)).squaredNorm());
      }
    }
    for (int j = 0; j < components; ++j) {
      model.means[j] = samples.col(centers[j]);
      model.covariances[j] = state.global_cov;
      model.covariances[j].diagonal().array() += state.ridge;
    }
  }

  Eigen::MatrixXd resp(components, count);
  const Eigen::Index blocks = (count + kColumnBlock - 1) / kColumnBlock;
  std::vector<double> block_ll(blocks);
  int reseed_events = 0;
  double previous_ll = -std::numeric_limits<double>::infinity();

  for (int iteration = 0; iteration < config.max_iterations; ++iteration) {
    // E-step: log joint densities per component.
    parallel_for(
        static_cast<std::size_t>(components),
        [&](std::size_t j) {
          const CMatrix factor = cholesky_hpd(model.covariances[j]);
          const double logdet =
              2.0 * factor.diagonal().real().array().log().sum();
          const CMatrix white = triangular_inverse(factor);
          const CVector shift = white * model.means[j];
          const double offset =
              std::log(model.weights[j]) - m * kLogPi - logdet;
          Eigen::RowVectorXd row(count);
          for (Eigen::Index begin = 0; begin < count; begin += kColumnBlock) {
            const Eigen::Index width = std::min(kColumnBlock, count - begin);
            CMatrix z = white * samples.middleCols(begin, width);
            z.colwise() -= shift;
            row.segment(begin, width) =
                offset - z.colwise().squaredNorm().array();
          }
          resp.row(j) = row;
        },
        threads);

    // Normalize per sample in the log domain.
    parallel_for(
        static_cast<std::size_t>(blocks),
        [&](std::size_t b) {
          const Eigen::Index begin =
              static_cast<Eigen::Index>(b) * kColumnBlock;
          const Eigen::Index end =
              std::min<Eigen::Index>(begin + kColumnBlock, count);
          double partial = 0.0;
          for (Eigen::Index c = begin; c < end; ++c) {
            const double peak = resp.col(c).maxCoeff();
            const double lse =
                peak + std::log((resp.col(c).array() - peak).exp().sum());
            resp.col(c) = (resp.col(c).array() - lse).exp();
            resp.col(c) = (resp.col(c).array() < kResponsibilityFloor)
                              .select(0.0, resp.col(c));
            partial += lse;
          }
          block_ll[b] = partial;
        },
        threads);
    double loglik = 0.0;
    for (double partial : block_ll) loglik += partial;
    if (loglik_trace) loglik_trace->push_back(loglik);

    // M-step; only the columns a component is actually responsible for take
    // part, which cuts the rank updates by the specialisation factor.
    parallel_for(
        static_cast<std::size_t>(components),
        [&](std::size_t j) {
          const Eigen::RowVectorXd weights_row = resp.row(j);
          std::vector<Eigen::Index> active;
          active.reserve(count / components * 4 + 16);
          double mass = 0.0;
          for (Eigen::Index c = 0; c < count; ++c) {
            if (weights_row(c) > 0.0) {
              active.push_back(c);
              mass += weights_row(c);
            }
          }
          if (!(mass > 0.0)) {
            model.weights[j] = 0.0;  // collapse handled below
            return;
          }
          model.weights[j] = mass / static_cast<double>(count);

          CVector mean = CVector::Zero(m);
          for (Eigen::Index c : active) mean += weights_row(c) * samples.col(c);
          mean /= mass;
          model.means[j] = mean;

          CMatrix cov = CMatrix::Zero(m, m);
          CMatrix buffer(m, std::min<Eigen::Index>(
                                kColumnBlock,
                                static_cast<Eigen::Index>(active.size())));
          Eigen::Index filled = 0;
          for (Eigen::Index c : active) {
            buffer.col(filled) =
                std::sqrt(weights_row(c)) * (samples.col(c) - mean);
            if (++filled == buffer.cols()) {
              cov.selfadjointView<Eigen::Lower>().rankUpdate(buffer, 1.0);
              filled = 0;
            }
          }
          if (filled > 0) {
            cov.selfadjointView<Eigen::Lower>().rankUpdate(
                buffer.leftCols(filled), 1.0);
          }
          cov /= mass;
          cov.diagonal().array() += state.ridge;
          cov.triangularView<Eigen::StrictlyUpper>() =
              cov.adjoint().triangularView<Eigen::StrictlyUpper>();
          model.covariances[j] = cov;
        },
        threads);

    {
      double total = 0.0;
      for (double w : model.weights) total += w;
      for (double& w : model.weights) w /= total;
    }

    for (int j = 0; j < components; ++j) {
      if (model.weights[j] < kCollapseWeight ||
          model.covariances[j].trace().real() < kCollapseTrace) {
        if (++reseed_events > components) {
          throw training_error(
              "fit_gmm: mixture keeps collapsing; data cannot support the "
              "requested component count");
        }
        reseed_component(model, j, samples, rng, state);
      }
    }

    if (iteration > 0 &&
        std::abs(loglik - previous_ll) <
            config.tolerance * std::max(1.0, std::abs(previous_ll))) {
      break;
    }
    previous_ll = loglik;
  }

  return model;
}

namespace {

// Shared core of responsibilities / gmm_estimate: per-component squared
// Mahalanobis distances and log densities at y, banked or not.
struct ComponentStats {
  RVector log_joint;     // log w_j + log N(y; mu_j, C_j + C_n)
  std::vector<CVector> residuals;  // y - mu_j
};

ComponentStats component_stats(const GmmModel& model, const CVector& y,
                               double noise_var, const FilterBank* bank) {
  require_model(model);
  if (!(noise_var > 0.0)) {
    throw std::invalid_argument("gmm: noise variance must be positive");
  }
  if (y.size() != model.dimension) {
    throw std::invalid_argument("gmm: observation dimension mismatch");
  }
  const int j_count = model.components();
  const double effective = effective_noise_variance(model, noise_var);
  if (bank && std::abs(bank->noise_var - noise_var) >
                  1e-12 * std::max(1.0, noise_var)) {
    throw std::invalid_argument(
        "gmm: filter bank was built for a different noise variance");
  }

  ComponentStats stats;
  stats.log_joint.resize(j_count);
  stats.residuals.resize(j_count);
  for (int j = 0; j < j_count; ++j) {
    stats.residuals[j] = y - model.means[j];
    double logdet;
    double quad;
    if (bank) {
      CVector z = stats.residuals[j];
      bank->chol[j].triangularView<Eigen::Lower>().solveInPlace(z);
      quad = z.squaredNorm();
      logdet = bank->logdets[j];
    } else {
      CMatrix shifted = model.covariances[j];
      shifted.diagonal().array() += effective;
      const CMatrix factor = cholesky_hpd(shifted);
      logdet = 2.0 * factor.diagonal().real().array().log().sum();
      CVector z = stats.residuals[j];
      factor.triangularView<Eigen::Lower>().solveInPlace(z);
      quad = z.squaredNorm();
    }
    stats.log_joint(j) = std::log(model.weights[j]) -
                         model.dimension * kLogPi - logdet - quad;
  }
  return stats;
}

RVector normalize_log(const RVector& log_joint) {
  const double peak = log_joint.maxCoeff();
  if (!std::isfinite(peak)) {
    throw numerical_error(
        "responsibilities: every component has vanishing density");
  }
  RVector out = (log_joint.array() - peak).exp();
  out = (out.array() < kResponsibilityFloor).select(0.0, out);
  out /= out.sum();
  return out;
}

}  // namespace

RVector responsibilities(const GmmModel& model, const CVector& y,
                         double noise_var, const FilterBank* bank) {
  return normalize_log(component_stats(model, y, noise_var, bank).log_joint);
}

CVector component_lmmse(const GmmModel& model, int component, const CVector& y,
                        double noise_var, const FilterBank* bank) {
  require_model(model);
  if (component < 0 || component >= model.components()) {
    throw std::invalid_argument("component_lmmse: component out of range");
  }
  const CVector residual = y - model.means[component];
  if (bank) {
    if (std::abs(bank->noise_var - noise_var) >
        1e-12 * std::max(1.0, noise_var)) {
      throw std::invalid_argument(
          "gmm: filter bank was built for a different noise variance");
    }
    return bank->filters[component] * residual + model.means[component];
  }
  const double effective = effective_noise_variance(model, noise_var);
  CMatrix shifted = model.covariances[component];
  shifted.diagonal().array() += effective;
  return model.covariances[component] * solve_hpd(shifted, residual) +
         model.means[component];
}

CVector gmm_estimate(const GmmModel& model, const CVector& y, double noise_var,
                     const FilterBank* bank) {
  const ComponentStats stats = component_stats(model, y, noise_var, bank);
  const RVector posterior = normalize_log(stats.log_joint);

  CVector estimate = CVector::Zero(model.dimension);
  for (int j = 0; j < model.components(); ++j) {
    if (posterior(j) == 0.0) continue;
    if (bank) {
      estimate += posterior(j) *
                  (bank->filters[j] * stats.residuals[j] + model.means[j]);
    } else {
      const double effective = effective_noise_variance(model, noise_var);
      CMatrix shifted = model.covariances[j];
      shifted.diagonal().array() += effective;
      estimate += posterior(j) *
                  (model.covariances[j] * solve_hpd(shifted, stats.residuals[j]) +
                   model.means[j]);
    }
  }
  return estimate;
}

FilterBank precompute_filters(const GmmModel& model, double noise_var) {
  require_model(model);
  if (!(noise_var > 0.0)) {
    throw std::invalid_argument(
        "precompute_filters: noise variance must be positive");
  }
  FilterBank bank;
  bank.noise_var = noise_var;
  bank.effective_noise = effective_noise_variance(model, noise_var);
  const int j_count = model.components();
  bank.filters.resize(j_count);
  bank.chol.resize(j_count);
  bank.logdets.resize(j_count);
  for (int j = 0; j < j_count; ++j) {
    CMatrix shifted = model.covariances[j];
    shifted.diagonal().array() += bank.effective_noise;
    const CMatrix factor = cholesky_hpd(shifted);
    bank.logdets[j] = 2.0 * factor.diagonal().real().array().log().sum();

    // W = C (C + C_n)^{-1} = ((C + C_n)^{-1} C)^H, with the same refinement
    // step as solve_hpd so banked and unbanked estimates coincide.
    CMatrix solved = model.covariances[j];
    factor.triangularView<Eigen::Lower>().solveInPlace(solved);
    factor.adjoint().triangularView<Eigen::Upper>().solveInPlace(solved);
    CMatrix residual = model.covariances[j] - shifted * solved;
    factor.triangularView<Eigen::Lower>().solveInPlace(residual);
    factor.adjoint().triangularView<Eigen::Upper>().solveInPlace(residual);
    solved += residual;
    bank.filters[j] = solved.adjoint();
    bank.chol[j] = factor;
  }
  return bank;
}

}  // namespace chanest
