// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "chanest/rng.hpp"
#include "chanest/types.hpp"

namespace chanest {

struct ArrayGeometry {
  int antennas = 64;          // M
  double spacing_ratio = 0.5; // element spacing over carrier wavelength
};

// One scattering cluster of the angular power density.
struct ClusterParams {
  double center_angle_deg = 0.0;  // in [-60, 60]
  double power = 1.0;             // fraction of the NLoS power, sums to 1
  double angular_spread_deg = 2.0;
};

// Ground truth for one coherence block; all parameters stay fixed over the
// block's snapshots.
struct ChannelScenario {
  double los_angle_deg = 0.0;
  double los_phase_rad = 0.0;
  double rician_k = 1.0;  // linear power ratio LoS/NLoS, >= 0
  std::vector<ClusterParams> clusters;
  ArrayGeometry geometry;
};

// What an estimator is allowed to see: noisy snapshots and the noise level.
struct PilotObservation {
  CMatrix y;               // M x T
  double noise_var = 1.0;  // per-entry complex noise variance

  int snapshots() const { return static_cast<int>(y.cols()); }
  CVector latest() const { return y.col(y.cols() - 1); }
};

// Observation plus ground truth; the truth fields are handed to genie
// estimators and to the metrics explicitly, never through PilotObservation.
struct ObservationBlock {
  PilotObservation pilot;
  CVector target;        // h(T), the estimation target
  CMatrix all_channels;  // M x T noiseless channels
};

struct ScenarioConfig {
  ArrayGeometry geometry;
  int cluster_count = 3;
  double rician_k_db = 0.0;
  double angular_spread_deg = 2.0;
  double sector_half_angle_deg = 60.0;
};

// Unit-norm ULA steering vector, entry m = exp(-j 2 pi (d/lambda) m sin
// theta) / sqrt(M).
CVector steering_vector(double angle_deg, const ArrayGeometry& geometry);

// Angular power density at psi (radians): weighted sum of Laplace densities,
// each truncated to [-pi, pi] and renormalized so cluster c integrates to its
// power fraction.
double nlos_power_density(double psi_rad,
                          const std::vector<ClusterParams>& clusters);

// M * integral of g(psi) a(psi) a(psi)^H over [-pi, pi] by composite
// trapezoidal quadrature (quadrature_points panels), rescaled so the trace is
// exactly M.  Exploits the ULA Toeplitz structure: only 2M-1 lags are
// integrated.
CMatrix nlos_covariance(const std::vector<ClusterParams>& clusters,
                        const ArrayGeometry& geometry,
                        int quadrature_points = 4096);

// K M/(K+1) a(theta) a(theta)^H + 1/(K+1) C_nlos; trace M.
CMatrix channel_covariance(const ChannelScenario& scenario);
CMatrix channel_covariance(const ChannelScenario& scenario,
                           const CMatrix& nlos_cov);

// theta ~ U[-sector, sector], phase ~ U[0, 2pi), cluster centers i.i.d.
// uniform over the sector, powers uniform then normalized to sum 1.
ChannelScenario draw_scenario(Rng& rng, const ScenarioConfig& config);

// Square root of an NLoS covariance for sampling, via eigendecomposition
// with negative eigenvalues clamped to zero.
struct NlosSampler {
  CMatrix factor;  // V diag(sqrt(max(lambda, 0)))
};
NlosSampler make_nlos_sampler(const CMatrix& nlos_cov);

// T channel snapshots; the LoS term sqrt(K/(K+1)) rho a(theta) with
// rho = sqrt(M) e^{j phi} is fixed across the block, the NLoS part is drawn
// i.i.d. complex Gaussian with covariance C_nlos.
CMatrix draw_channels(const ChannelScenario& scenario, int snapshots,
                      Rng& rng);
CMatrix draw_channels(const ChannelScenario& scenario, int snapshots, Rng& rng,
                      const NlosSampler& sampler);

// y(t) = h(t) + n(t) with i.i.d. circular complex noise of per-entry
// variance noise_var.
ObservationBlock add_noise(const CMatrix& channels, double noise_var,
                           Rng& rng);

}  // namespace chanest
