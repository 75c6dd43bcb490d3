// SPDX-License-Identifier: Apache-2.0

#include "chanest/channel_model.hpp"

#include <algorithm>
#include <cmath>

#include "chanest/numerics.hpp"

namespace chanest {

namespace {

void require_geometry(const ArrayGeometry& geometry) {
  if (geometry.antennas < 2) {
    throw std::invalid_argument("array needs at least 2 antennas");
  }
  if (!(geometry.spacing_ratio > 0.0)) {
    throw std::invalid_argument("antenna spacing ratio must be positive");
  }
}

// Mass of a Laplace(center, scale) density inside [-pi, pi].
double truncation_mass(double center, double scale) {
  return 1.0 - 0.5 * std::exp(-(kPi - center) / scale) -
         0.5 * std::exp(-(center + kPi) / scale);
}

}  // namespace

CVector steering_vector(double angle_deg, const ArrayGeometry& geometry) {
  require_geometry(geometry);
  const int m = geometry.antennas;
  const double phase_step =
      -2.0 * kPi * geometry.spacing_ratio * std::sin(deg2rad(angle_deg));
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  CVector a(m);
  for (int i = 0; i < m; ++i) a(i) = std::polar(scale, phase_step * i);
  return a;
}

double nlos_power_density(double psi_rad,
                          const std::vector<ClusterParams>& clusters) {
  double density = 0.0;
  for (const auto& cluster : clusters) {
    const double scale = deg2rad(cluster.angular_spread_deg) / std::sqrt(2.0);
    const double center = deg2rad(cluster.center_angle_deg);
    const double mass = truncation_mass(center, scale);
    density += cluster.power / (2.0 * scale * mass) *
               std::exp(-std::abs(psi_rad - center) / scale);
  }
  return density;
}

CMatrix nlos_covariance(const std::vector<ClusterParams>& clusters,
                        const ArrayGeometry& geometry,
                        int quadrature_points) {
  require_geometry(geometry);
  if (clusters.empty()) {
    throw std::invalid_argument("nlos_covariance: need at least one cluster");
  }
  if (quadrature_points < 8) {
    throw std::invalid_argument("nlos_covariance: quadrature too coarse");
  }

  const int m = geometry.antennas;

  // The density has a kink at every cluster center, so the composite rule is
  // applied per smooth segment; panels are spread across segments by length.
  std::vector<double> breaks = {-kPi, kPi};
  for (const auto& cluster : clusters) {
    const double center = deg2rad(cluster.center_angle_deg);
    if (center > -kPi && center < kPi) breaks.push_back(center);
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  // C[i,k] depends only on the lag i-k for a ULA, so integrate the 2M-1 lag
  // values instead of full rank-one outer products.
  CVector lags = CVector::Zero(m);
  double mass = 0.0;
  auto accumulate = [&](double psi, double weight) {
    const double wg = weight * nlos_power_density(psi, clusters);
    if (wg == 0.0) return;
    mass += wg;
    const cd phasor =
        std::polar(1.0, -2.0 * kPi * geometry.spacing_ratio * std::sin(psi));
    cd power(1.0, 0.0);
    for (int lag = 0; lag < m; ++lag) {
      lags(lag) += wg * power;
      power *= phasor;
    }
  };

  // Composite Boole rule per segment: the steering phase oscillates at rate
  // pi (M-1), and a lower-order rule leaves boundary terms at the kinks that
  // grow with the array size.
  for (std::size_t seg = 0; seg + 1 < breaks.size(); ++seg) {
    const double lo = breaks[seg];
    const double hi = breaks[seg + 1];
    int panels = static_cast<int>(
        std::lround(quadrature_points * (hi - lo) / (2.0 * kPi)));
    panels = std::max(4, (panels + 3) / 4 * 4);
    const double step = (hi - lo) / panels;
    for (int k = 0; k <= panels; ++k) {
      double weight;
      switch (k % 4) {
        case 0:
          weight = (k == 0 || k == panels) ? 7.0 : 14.0;
          break;
        case 2:
          weight = 12.0;
          break;
        default:
          weight = 32.0;
          break;
      }
      accumulate(lo + k * step, weight * step * 2.0 / 45.0);
    }
  }
  if (!(mass > 0.0)) {
    throw numerical_error("nlos_covariance: quadrature mass vanished");
  }

  // Rescale by the discrete density mass; this keeps trace exactly M and is
  // equivalent to normalizing the quadrature weights.
  lags /= mass;
  CMatrix cov(m, m);
  for (int col = 0; col < m; ++col) {
    for (int row = 0; row < m; ++row) {
      cov(row, col) = row >= col ? lags(row - col) : std::conj(lags(col - row));
    }
  }
  return cov;
}

CMatrix channel_covariance(const ChannelScenario& scenario) {
  return channel_covariance(
      scenario, nlos_covariance(scenario.clusters, scenario.geometry));
}

CMatrix channel_covariance(const ChannelScenario& scenario,
                           const CMatrix& nlos_cov) {
  const double k = scenario.rician_k;
  const int m = scenario.geometry.antennas;
  const CVector a = steering_vector(scenario.los_angle_deg, scenario.geometry);
  CMatrix cov = (k * m / (k + 1.0)) * (a * a.adjoint());
  cov += nlos_cov / (k + 1.0);
  return cov;
}

ChannelScenario draw_scenario(Rng& rng, const ScenarioConfig& config) {
  require_geometry(config.geometry);
  if (config.cluster_count < 1) {
    throw std::invalid_argument("draw_scenario: need at least one cluster");
  }

  ChannelScenario scenario;
  scenario.geometry = config.geometry;
  const double sector = config.sector_half_angle_deg;
  scenario.los_angle_deg = rng.uniform(-sector, sector);
  scenario.los_phase_rad = rng.uniform(0.0, 2.0 * kPi);
  scenario.rician_k = std::pow(10.0, config.rician_k_db / 10.0);

  scenario.clusters.resize(config.cluster_count);
  for (auto& cluster : scenario.clusters) {
    cluster.center_angle_deg = rng.uniform(-sector, sector);
    cluster.angular_spread_deg = config.angular_spread_deg;
  }
  double total = 0.0;
  for (auto& cluster : scenario.clusters) {
    cluster.power = 1.0 - rng.uniform();  // (0, 1], powers stay positive
    total += cluster.power;
  }
  for (auto& cluster : scenario.clusters) cluster.power /= total;
  return scenario;
}

NlosSampler make_nlos_sampler(const CMatrix& nlos_cov) {
  const EigDecomposition eig = hermitian_eig(nlos_cov);
  const int m = static_cast<int>(nlos_cov.rows());
  CMatrix factor = eig.eigenvectors;
  for (int i = 0; i < m; ++i) {
    factor.col(i) *= std::sqrt(std::max(eig.eigenvalues(i), 0.0));
  }
  return {std::move(factor)};
}

CMatrix draw_channels(const ChannelScenario& scenario, int snapshots,
                      Rng& rng) {
  return draw_channels(
      scenario, snapshots, rng,
      make_nlos_sampler(
          nlos_covariance(scenario.clusters, scenario.geometry)));
}

CMatrix draw_channels(const ChannelScenario& scenario, int snapshots, Rng& rng,
                      const NlosSampler& sampler) {
  if (snapshots < 1) {
    throw std::invalid_argument("draw_channels: need at least one snapshot");
  }
  const int m = scenario.geometry.antennas;
  const double k = scenario.rician_k;
  const cd rho =
      std::polar(std::sqrt(static_cast<double>(m)), scenario.los_phase_rad);
  const CVector los = std::sqrt(k / (k + 1.0)) * rho *
                      steering_vector(scenario.los_angle_deg,
                                      scenario.geometry);
  const double nlos_scale = std::sqrt(1.0 / (k + 1.0));

  CMatrix channels(m, snapshots);
  CVector white(m);
  for (int t = 0; t < snapshots; ++t) {
    for (int i = 0; i < m; ++i) white(i) = rng.complex_gaussian();
    channels.col(t) = los + nlos_scale * (sampler.factor * white);
  }
  return channels;
}

ObservationBlock add_noise(const CMatrix& channels, double noise_var,
                           Rng& rng) {
  if (!(noise_var > 0.0)) {
    throw std::invalid_argument("add_noise: noise variance must be positive");
  }
  const double sigma = std::sqrt(noise_var);
  ObservationBlock block;
  block.all_channels = channels;
  block.target = channels.col(channels.cols() - 1);
  block.pilot.noise_var = noise_var;
  block.pilot.y = channels;
  for (Eigen::Index t = 0; t < channels.cols(); ++t) {
    for (Eigen::Index i = 0; i < channels.rows(); ++i) {
      block.pilot.y(i, t) += sigma * rng.complex_gaussian();
    }
  }
  return block;
}

}  // namespace chanest
