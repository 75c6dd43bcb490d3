// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chanest/doa.hpp"
#include "chanest/types.hpp"

namespace chanest {

// How observation noise enters the per-component filters: models fitted on
// steering-projected samples see sigma^2 (M-1)/M I, models fitted on full
// channels see sigma^2 I.
enum class NoiseRule { projected, full };

struct GmmModel {
  int dimension = 0;            // M
  NoiseRule noise_rule = NoiseRule::projected;
  std::vector<double> weights;  // J entries, simplex
  std::vector<CVector> means;
  std::vector<CMatrix> covariances;

  // training metadata
  std::uint32_t grid_id = 0;  // grid size used for projection labels, 0 = none
  std::uint64_t sample_count = 0;
  double angular_spread_deg = 0.0;
  double rician_k_db = 0.0;
  std::uint64_t seed = 0;

  int components() const { return static_cast<int>(weights.size()); }
};

// Per-noise-level cache: filters W_j = C_j (C_j + C_n)^{-1} plus the Cholesky
// factors and log-determinants needed for the responsibilities, so estimation
// runs on matrix-vector products only.
struct FilterBank {
  double noise_var = 0.0;        // observation noise variance the bank is for
  double effective_noise = 0.0;  // scalar actually added to the diagonal
  std::vector<CMatrix> filters;
  std::vector<CMatrix> chol;     // lower factors of C_j + C_n (+ ridge)
  std::vector<double> logdets;
};

struct EmConfig {
  int max_iterations = 200;
  double tolerance = 1e-6;        // relative log-likelihood change
  double covariance_ridge = 0.0;  // 0 -> 1e-6 * dimension
  std::string init = "farthest-point";
  std::uint64_t seed = 0;
};

// Grid angle maximizing |a(theta)^H h|, ties toward the smaller angle.
double label_doa(const CVector& h, const SteeringGrid& grid);

// (I - a a^H) h for a = steering_vector(angle).
CVector project_nlos(const CVector& h, double angle_deg,
                     const ArrayGeometry& geometry);

// Projects every channel column into the orthogonal complement of its own
// labeled steering vector.  Columns are samples.
CMatrix build_training_set(const CMatrix& channels, const SteeringGrid& grid,
                           int threads = 0);

// Per-sample labels and squared peak correlations max_g |a_g^H h|^2, shared
// by build_training_set and the LoS power estimate.
void label_max(const CMatrix& channels, const SteeringGrid& grid,
               std::vector<int>* labels, std::vector<double>* peak_power,
               int threads = 0);

// Log of the circular complex Gaussian density
// -M log pi - logdet(C) - (x - mu)^H C^{-1} (x - mu).
double log_gaussian(const CVector& x, const CVector& mean, const CMatrix& cov);

// Expectation-maximization fit of a complex Gaussian mixture; samples are
// columns.  Means seeded by a farthest-point sweep, covariances by the global
// sample covariance; every M-step covariance gets + ridge I.  Collapsed
// components are re-seeded from a random sample, at most J times.
GmmModel fit_gmm(const CMatrix& samples, int components, const EmConfig& config,
                 int threads = 0, std::vector<double>* loglik_trace = nullptr);

// Posterior component probabilities for an observation y = x + noise.
RVector responsibilities(const GmmModel& model, const CVector& y,
                         double noise_var, const FilterBank* bank = nullptr);

// Affine per-component estimate C_j (C_j + C_n)^{-1} (y - mu_j) + mu_j.
CVector component_lmmse(const GmmModel& model, int component, const CVector& y,
                        double noise_var, const FilterBank* bank = nullptr);

// Responsibility-weighted convex combination of the per-component estimates.
CVector gmm_estimate(const GmmModel& model, const CVector& y, double noise_var,
                     const FilterBank* bank = nullptr);

FilterBank precompute_filters(const GmmModel& model, double noise_var);

// Versioned binary model file; little-endian, weights then means then
// covariances as (re, im) doubles, covariance entries row-major.
void save_gmm(const GmmModel& model, const std::string& path);
GmmModel load_gmm(const std::string& path);

double effective_noise_variance(const GmmModel& model, double noise_var);

}  // namespace chanest
