// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "chanest/channel_model.hpp"
#include "chanest/doa.hpp"
#include "chanest/gmm_cme.hpp"
#include "chanest/types.hpp"

namespace chanest {

struct EstimatorOutput {
  CVector channel_estimate;
  std::optional<double> doa_estimate_deg;  // LoS angle, when the method has one
  std::string tag;
};

// Empirical LoS power, learned from the same training set as the mixture.
struct LosPrior {
  double los_power = 0.0;
};

// Mean over the training set of max_g |a_g^H h|^2.
LosPrior estimate_plos(const CMatrix& channels, const SteeringGrid& grid,
                       int threads = 0);

// Scalar-LMMSE LoS estimate P/(P + sigma^2) a(theta) a(theta)^H y.
CVector los_estimate(const CVector& y, double angle_deg, const LosPrior& prior,
                     double noise_var, const ArrayGeometry& geometry);

// Proposed two-stage estimator: MUSIC LoS stage plus mixture-CME estimate of
// the steering-projected remainder, applied to the latest snapshot.
EstimatorOutput music_gmm(const PilotObservation& obs, const GmmModel& model,
                          const LosPrior& prior, const SteeringGrid& grid,
                          const FilterBank* bank = nullptr);

// h_hat = y.
EstimatorOutput ls_estimate(const PilotObservation& obs);

// Mixture CME fitted on unprojected channels, noise sigma^2 I.
EstimatorOutput full_gmm(const PilotObservation& obs, const GmmModel& model,
                         const FilterBank* bank = nullptr);

// MUSIC LoS stage plus a single global-covariance LMMSE filter for the
// projected remainder.  scov_filter, when given, must be
// scov (scov + sigma^2 (M-1)/M I)^{-1} at the observation's noise level.
EstimatorOutput music_scov(const PilotObservation& obs, const CMatrix& scov,
                           const LosPrior& prior, const SteeringGrid& grid,
                           const CMatrix* scov_filter = nullptr);

// Helper for music_scov callers that precompute per noise level.
CMatrix scov_nlos_filter(const CMatrix& scov, double noise_var);

// Orthogonal matching pursuit over the steering dictionary, least-squares
// refit on the selected atoms each iteration.
CVector omp(const CVector& y, const SteeringGrid& dictionary, int sparsity);

// Runs OMP for sparsity 1..max_sparsity and keeps the estimate closest to the
// true channel.
EstimatorOutput genie_omp(const PilotObservation& obs,
                          const CVector& true_channel,
                          const SteeringGrid& dictionary,
                          int max_sparsity = 16);

// LS projection of y onto span{a(theta_p)}.  Nearly duplicate angles are
// dropped once if the Gram matrix is ill-conditioned.
CVector parametric_ls(const std::vector<double>& angles_deg, const CVector& y,
                      const ArrayGeometry& geometry);

enum class SubspaceMethod { music, esprit };

// Parametric LS with subspace DoAs, path count chosen against the true
// channel.  ESPRIT runs on the forward-backward averaged covariance.
EstimatorOutput genie_parametric(const PilotObservation& obs,
                                 const CVector& true_channel,
                                 SubspaceMethod method, int max_paths,
                                 const SteeringGrid& grid);

// Wiener filter with the true per-scenario covariance.
EstimatorOutput genie_lmmse(const PilotObservation& obs,
                            const ChannelScenario& scenario,
                            const CMatrix* nlos_cov = nullptr);

}  // namespace chanest
