// SPDX-License-Identifier: Apache-2.0
//
// Property and oracle suite behind the `validate` subcommand.  Sizes are kept
// small so the whole sweep finishes in well under five minutes.

#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>
#include <vector>

#include "chanest/harness.hpp"
#include "chanest/numerics.hpp"
#include "chanest/rng.hpp"

namespace chanest {

namespace {

struct CheckContext {
  std::uint64_t seed;
  int threads;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw std::runtime_error(message);
}

std::string num(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

CMatrix random_hermitian(Rng& rng, int n) {
  CMatrix a(n, n);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) a(r, c) = rng.complex_gaussian();
  }
  return CMatrix((a + a.adjoint()) / 2.0);
}

CMatrix random_hpd(Rng& rng, int n) {
  CMatrix a(n, n);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) a(r, c) = rng.complex_gaussian();
  }
  CMatrix hpd = a * a.adjoint();
  hpd.diagonal().array() += 0.5;
  return CMatrix((hpd + hpd.adjoint()) / 2.0);
}

std::vector<ClusterParams> random_clusters(Rng& rng, int count,
                                           double spread_deg) {
  std::vector<ClusterParams> clusters(count);
  double total = 0.0;
  for (auto& c : clusters) {
    c.center_angle_deg = rng.uniform(-60.0, 60.0);
    c.angular_spread_deg = spread_deg;
    c.power = rng.uniform(0.1, 1.0);
    total += c.power;
  }
  for (auto& c : clusters) c.power /= total;
  return clusters;
}

void check_steering(const CheckContext& ctx) {
  Rng rng(derive_seed(ctx.seed, 1));
  for (int m : {2, 16, 64}) {
    const ArrayGeometry geom{m, 0.5};
    for (int i = 0; i < 20; ++i) {
      const CVector a = steering_vector(rng.uniform(-90.0, 90.0), geom);
      require(std::abs(a.norm() - 1.0) < 1e-12, "steering norm drifts");
    }
    const CVector broadside = steering_vector(0.0, geom);
    require((broadside.array() - cd(1.0 / std::sqrt(double(m)), 0.0))
                    .abs()
                    .maxCoeff() < 1e-14,
            "broadside steering should be constant");
  }
  const CVector endfire = steering_vector(90.0, ArrayGeometry{2, 0.5});
  require(std::abs(endfire(0) - cd(1 / std::sqrt(2.0), 0)) < 1e-12 &&
              std::abs(endfire(1) - cd(-1 / std::sqrt(2.0), 0)) < 1e-12,
          "endfire steering for M = 2 should be (1, -1)/sqrt(2)");
}

void check_density(const CheckContext& ctx) {
  Rng rng(derive_seed(ctx.seed, 2));
  for (int trial = 0; trial < 3; ++trial) {
    const auto clusters = random_clusters(rng, 3, rng.uniform(0.5, 6.0));
    // Simpson quadrature as the independent integration oracle.
    const int n = 200001;
    const double h = 2.0 * kPi / (n - 1);
    double integral = 0.0;
    for (int i = 0; i < n; ++i) {
      const double psi = -kPi + i * h;
      const double w = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      integral += w * nlos_power_density(psi, clusters);
    }
    integral *= h / 3.0;
    require(std::abs(integral - 1.0) < 1e-6,
            "density should integrate to 1, got " + num(integral));
  }
  // mirrored clusters give an even density
  std::vector<ClusterParams> mirrored = {{25.0, 0.5, 2.0}, {-25.0, 0.5, 2.0}};
  for (double psi : {0.1, 0.4, 1.0}) {
    require(std::abs(nlos_power_density(psi, mirrored) -
                     nlos_power_density(-psi, mirrored)) < 1e-12,
            "mirrored clusters should give an even density");
  }
}

void check_nlos_covariance(const CheckContext& ctx) {
  Rng rng(derive_seed(ctx.seed, 3));
  const ArrayGeometry geom{32, 0.5};
  for (int trial = 0; trial < 3; ++trial) {
    // resolution of the fixed panel budget is calibrated for the spreads the
    // channel model actually uses (>= 2 degrees)
    const auto clusters = random_clusters(rng, 3, rng.uniform(2.0, 6.0));
    const CMatrix cov = nlos_covariance(clusters, geom);
    require(hermitian_defect(cov) < 1e-12, "covariance must be Hermitian");
    require(std::abs(cov.trace().real() - geom.antennas) <
                1e-4 * geom.antennas,
            "covariance trace must equal M");
    const EigDecomposition eig = hermitian_eig(cov);
    require(eig.eigenvalues.minCoeff() > -1e-8 * geom.antennas,
            "covariance must be positive semidefinite");
    const CMatrix fine = nlos_covariance(clusters, geom, 8192);
    require((fine - cov).norm() < 1e-6,
            "quadrature must be resolved at 4096 panels");
  }
}

void check_channel_covariance(const CheckContext& ctx) {
  Rng rng(derive_seed(ctx.seed, 4));
  const ArrayGeometry geom{16, 0.5};
  ChannelScenario scenario;
  scenario.geometry = geom;
  scenario.los_angle_deg = rng.uniform(-60.0, 60.0);
  scenario.los_phase_rad = rng.uniform(0.0, 2 * kPi);
  scenario.clusters = random_clusters(rng, 3, 2.0);

  const CMatrix nlos = nlos_covariance(scenario.clusters, geom);
  scenario.rician_k = 0.0;
  require((channel_covariance(scenario, nlos) - nlos).norm() < 1e-12,
          "K = 0 must reduce to the NLoS covariance");
  scenario.rician_k = 1e9;
  const CVector a = steering_vector(scenario.los_angle_deg, geom);
  const CMatrix rank1 = geom.antennas * (a * a.adjoint());
  require((channel_covariance(scenario, nlos) - rank1).norm() <
              1e-6 * rank1.norm(),
          "large K must approach the rank-one LoS covariance");
  scenario.rician_k = 1.0;
  const CMatrix cov = channel_covariance(scenario, nlos);
  require(std::abs(cov.trace().real() - geom.antennas) < 1e-10 * geom.antennas,
          "trace must stay M for K = 1");
}

void check_channel_energy(const CheckContext& ctx) {
  const ArrayGeometry geom{16, 0.5};
  ScenarioConfig scen;
  scen.geometry = geom;
  scen.rician_k_db = 0.0;
  double energy = 0.0;
  const int scenarios = 400;
  const int draws = 25;
  for (int s = 0; s < scenarios; ++s) {
    Rng rng(derive_seed(ctx.seed, 5, s));
    const ChannelScenario scenario = draw_scenario(rng, scen);
    const NlosSampler sampler =
        make_nlos_sampler(nlos_covariance(scenario.clusters, geom));
    const CMatrix h = draw_channels(scenario, draws, rng, sampler);
    energy += h.squaredNorm();
  }
  energy /= static_cast<double>(scenarios) * draws;
  require(std::abs(energy - geom.antennas) < 0.02 * geom.antennas,
          "mean channel energy should be M, got " + num(energy));
}

void check_noise(const CheckContext& ctx) {
  Rng rng(derive_seed(ctx.seed, 6));
  const CMatrix zeros = CMatrix::Zero(32, 4000);
  const double noise_var = 0.37;
  const ObservationBlock block = add_noise(zeros, noise_var, rng);
  const double mean_var =
      block.pilot.y.squaredNorm() / static_cast<double>(zeros.size());
  require(std::abs(mean_var - noise_var) < 0.02 * noise_var,
          "noise variance off: " + num(mean_var));
}

void check_sample_covariance(const CheckContext& ctx) {
  Rng rng(derive_seed(ctx.seed, 7));
  const int m = 8;
  const CMatrix base = random_hpd(rng, m);
  const NlosSampler sampler = make_nlos_sampler(base);
  const int snapshots = 20000;
  CMatrix draws(m, snapshots);
  CVector white(m);
  for (int t = 0; t < snapshots; ++t) {
    for (int i = 0; i < m; ++i) white(i) = rng.complex_gaussian();
    draws.col(t) = sampler.factor * white;
  }
  const CMatrix cov = sample_covariance(draws);
  require((cov - base).norm() < 0.05 * base.norm(),
          "sample covariance should approach the truth");

  // recursive mean identity
  CMatrix recursive = CMatrix::Zero(m, m);
  const int count = 50;
  for (int t = 1; t <= count; ++t) {
    recursive = update_covariance(recursive, draws.col(t - 1),
                                  t == 1 ? 1e-300 : (t - 1.0) / t, 1.0 / t);
  }
  const CMatrix batch = sample_covariance(draws.leftCols(count));
  require((recursive - batch).norm() < 1e-10 * batch.norm(),
          "recursive update must reproduce the batch covariance");
}

void check_music(const CheckContext&) {
  const ArrayGeometry geom{32, 0.5};
  const SteeringGrid grid = make_steering_grid(geom, 16 * geom.antennas);
  const double target = grid.angles_deg(137);
  const CVector a = steering_vector(target, geom);
  CMatrix cov = a * a.adjoint();
  cov.diagonal().array() += 1e-6;
  cov = (cov + cov.adjoint()) / 2.0;
  const MusicSpectrum spectrum = music_spectrum(cov, 1, grid);
  require(std::abs(top_peaks(spectrum, 1).front() - target) < 1e-12,
          "rank-one spectrum must peak at the construction angle");

  // positive scaling: identical argmax, and identical values away from the
  // roundoff-dominated peak of this nearly singular construction
  const MusicSpectrum scaled = music_spectrum(CMatrix(7.5 * cov), 1, grid);
  Eigen::Index peak_base, peak_scaled;
  spectrum.values.maxCoeff(&peak_base);
  scaled.values.maxCoeff(&peak_scaled);
  require(peak_base == peak_scaled, "scaling must not move the peak");
  Rng scale_rng(derive_seed(123, 45));
  CMatrix generic(geom.antennas, geom.antennas);
  for (int c = 0; c < geom.antennas; ++c) {
    for (int r = 0; r < geom.antennas; ++r) {
      generic(r, c) = scale_rng.complex_gaussian();
    }
  }
  generic = generic * generic.adjoint();
  generic.diagonal().array() += 0.5;
  generic = (generic + generic.adjoint()) / 2.0;
  const MusicSpectrum g1 = music_spectrum(generic, 2, grid);
  const MusicSpectrum g2 = music_spectrum(CMatrix(7.5 * generic), 2, grid);
  require((g1.values - g2.values).cwiseAbs().maxCoeff() <
              1e-6 * g1.values.cwiseAbs().maxCoeff(),
          "spectrum must be scale invariant");

  const MusicSpectrum flat =
      music_spectrum(CMatrix(CMatrix::Identity(geom.antennas, geom.antennas)),
                     1, grid);
  require((flat.values.maxCoeff() - flat.values.minCoeff()) <
              1e-6 * flat.values.maxCoeff(),
          "isotropic covariance must give a flat spectrum");

  const double t1 = grid.angles_deg(100);
  const double t2 = grid.angles_deg(400);
  const CVector a1 = steering_vector(t1, geom);
  const CVector a2 = steering_vector(t2, geom);
  CMatrix two = a1 * a1.adjoint() + 1.5 * (a2 * a2.adjoint());
  two = (two + two.adjoint()) / 2.0;
  const auto peaks = top_peaks(music_spectrum(two, 2, grid), 2);
  const double lo = std::min(peaks[0], peaks[1]);
  const double hi = std::max(peaks[0], peaks[1]);
  require(std::abs(lo - t1) < 1e-9 && std::abs(hi - t2) < 1e-9,
          "two-path spectrum must peak at both construction angles");
}

void check_forward_backward(const CheckContext& ctx) {
  Rng rng(derive_seed(ctx.seed, 8));
  const ArrayGeometry geom{16, 0.5};
  const auto clusters = random_clusters(rng, 3, 2.0);
  const CMatrix truth = nlos_covariance(clusters, geom);  // Toeplitz
  require((forward_backward(truth) - truth).norm() < 1e-12 * truth.norm(),
          "persymmetric matrices are fixed points");

  const NlosSampler sampler = make_nlos_sampler(truth);
  for (int trial = 0; trial < 100; ++trial) {
    CMatrix draws(geom.antennas, 10);
    CVector white(geom.antennas);
    for (int t = 0; t < 10; ++t) {
      for (int i = 0; i < geom.antennas; ++i) white(i) = rng.complex_gaussian();
      draws.col(t) = sampler.factor * white;
    }
    const CMatrix noisy = sample_covariance(draws);
    const CMatrix averaged = forward_backward(noisy);
    require((forward_backward(averaged) - averaged).norm() <
                1e-12 * averaged.norm(),
            "forward-backward averaging must be idempotent");
    require((averaged - truth).norm() <= (noisy - truth).norm() + 1e-12,
            "averaging must not move away from a persymmetric truth");
  }
}

void check_esprit(const CheckContext&) {
  const ArrayGeometry geom{16, 0.5};
  const CVector one = steering_vector(17.3, geom);
  CMatrix cov = one * one.adjoint();
  cov = (cov + cov.adjoint()) / 2.0;
  const auto single = esprit(cov, 1, geom);
  require(std::abs(single.front() - 17.3) < 1e-6,
          "esprit must recover an off-grid path, got " + num(single.front()));

  const CVector p1 = steering_vector(-25.0, geom);
  const CVector p2 = steering_vector(25.0, geom);
  CMatrix two = p1 * p1.adjoint() + p2 * p2.adjoint();
  two = (two + two.adjoint()) / 2.0;
  const auto pair = esprit(two, 2, geom);
  require(std::abs(pair[0] + 25.0) < 1e-6 && std::abs(pair[1] - 25.0) < 1e-6,
          "esprit must recover both paths");
}

void check_projector(const CheckContext& ctx) {
  Rng rng(derive_seed(ctx.seed, 9));
  const ArrayGeometry geom{16, 0.5};
  const double angle = rng.uniform(-60.0, 60.0);
  const CVector a = steering_vector(angle, geom);
  require(project_nlos(a, angle, geom).norm() < 1e-12,
          "steering vector must project to zero");
  CVector h(geom.antennas);
  for (int i = 0; i < geom.antennas; ++i) h(i) = rng.complex_gaussian();
  const CVector once = project_nlos(h, angle, geom);
  require(std::abs(a.dot(once)) <= 1e-10 * h.norm(),
          "projection must be orthogonal to the steering vector");
  require((project_nlos(once, angle, geom) - once).norm() < 1e-12 * h.norm(),
          "projection must be idempotent");
}

void check_em(const CheckContext& ctx) {
  Rng rng(derive_seed(ctx.seed, 10));
  const int m = 4;
  const int count = 4000;
  const CMatrix truth = random_hpd(rng, m);
  const NlosSampler sampler = make_nlos_sampler(truth);
  CMatrix samples(m, count);
  CVector white(m);
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < m; ++j) white(j) = rng.complex_gaussian();
    samples.col(i) = sampler.factor * white;
  }

  EmConfig em;
  em.seed = derive_seed(ctx.seed, 11);
  const GmmModel single = fit_gmm(samples, 1, em, ctx.threads);
  const CVector sample_mean = samples.rowwise().mean();
  CMatrix sample_cov = CMatrix::Zero(m, m);
  {
    CMatrix centered = samples.colwise() - sample_mean;
    sample_cov.selfadjointView<Eigen::Lower>().rankUpdate(centered,
                                                          1.0 / count);
    sample_cov.triangularView<Eigen::StrictlyUpper>() =
        sample_cov.adjoint().triangularView<Eigen::StrictlyUpper>();
  }
  require((single.means[0] - sample_mean).norm() < 0.05 * std::sqrt(double(m)),
          "single-component mean must match the sample mean");
  require((single.covariances[0] - sample_cov).norm() < 0.05 * sample_cov.norm(),
          "single-component covariance must match the sample covariance");

  std::vector<double> trace;
  const GmmModel mixture = fit_gmm(samples, 3, em, ctx.threads, &trace);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    require(trace[i] >= trace[i - 1] - 1e-9 * std::abs(trace[i - 1]),
            "EM log-likelihood must be non-decreasing");
  }
  double weight_sum = 0.0;
  for (double w : mixture.weights) weight_sum += w;
  require(std::abs(weight_sum - 1.0) < 1e-10, "weights must form a simplex");

  for (int i = 0; i < 10; ++i) {
    CVector y(m);
    for (int j = 0; j < m; ++j) y(j) = rng.complex_gaussian();
    const RVector post = responsibilities(mixture, y, 0.5);
    require(post.minCoeff() >= 0.0 && std::abs(post.sum() - 1.0) < 1e-10,
            "responsibilities must form a simplex");
  }
}

void check_cme(const CheckContext& ctx) {
  Rng rng(derive_seed(ctx.seed, 12));
  const int m = 6;
  GmmModel model;
  model.dimension = m;
  model.noise_rule = NoiseRule::projected;
  model.weights = {0.3, 0.7};
  for (int j = 0; j < 2; ++j) {
    CVector mean(m);
    for (int i = 0; i < m; ++i) mean(i) = rng.complex_gaussian();
    model.means.push_back(mean);
    model.covariances.push_back(random_hpd(rng, m));
  }

  const double noise_var = 0.8;
  const FilterBank bank = precompute_filters(model, noise_var);
  for (int i = 0; i < 10; ++i) {
    CVector y(m);
    for (int j = 0; j < m; ++j) y(j) = rng.complex_gaussian();
    const CVector banked = gmm_estimate(model, y, noise_var, &bank);
    const CVector plain = gmm_estimate(model, y, noise_var);
    require((banked - plain).norm() < 1e-10 * (plain.norm() + 1.0),
            "banked and unbanked estimates must agree");
  }

  // scalar covariance: the filter must be the scalar shrinkage
  GmmModel scalar = model;
  scalar.covariances[0] = 2.5 * CMatrix::Identity(m, m);
  const FilterBank scalar_bank = precompute_filters(scalar, noise_var);
  const double shrink =
      2.5 / (2.5 + noise_var * (m - 1) / static_cast<double>(m));
  require((scalar_bank.filters[0] - shrink * CMatrix::Identity(m, m)).norm() <
              1e-10,
          "isotropic covariance must give a scalar filter");

  // shrinkage toward the mean grows with the noise level, per eigenmode
  CVector y(m);
  for (int j = 0; j < m; ++j) y(j) = rng.complex_gaussian();
  const EigDecomposition basis = hermitian_eig(model.covariances[1]);
  const CVector low = component_lmmse(model, 1, y, 0.2);
  const CVector high = component_lmmse(model, 1, y, 5.0);
  const CVector low_coord = basis.eigenvectors.adjoint() * (low - model.means[1]);
  const CVector high_coord =
      basis.eigenvectors.adjoint() * (high - model.means[1]);
  for (int i = 0; i < m; ++i) {
    require(std::abs(high_coord(i)) <= std::abs(low_coord(i)) + 1e-12,
            "higher noise must shrink every eigencoordinate");
  }
}

void check_numerics(const CheckContext& ctx) {
  Rng rng(derive_seed(ctx.seed, 13));
  for (int n : {4, 16, 64}) {
    const CMatrix a = random_hermitian(rng, n);
    const EigDecomposition eig = hermitian_eig(a);
    const CMatrix rebuilt = eig.eigenvectors *
                            eig.eigenvalues.asDiagonal().toDenseMatrix().cast<cd>() *
                            eig.eigenvectors.adjoint();
    require((rebuilt - a).norm() <= 1e-8 * a.norm() + 1e-12,
            "eigendecomposition must reconstruct the input");
    require((eig.eigenvectors.adjoint() * eig.eigenvectors -
             CMatrix::Identity(n, n))
                    .norm() < 1e-8,
            "eigenvectors must be unitary");
  }
  const CMatrix hpd = random_hpd(rng, 24);
  CMatrix rhs(24, 3);
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < 24; ++r) rhs(r, c) = rng.complex_gaussian();
  }
  const CMatrix solution = solve_hpd(hpd, rhs);
  require((hpd * solution - rhs).norm() <= 1e-8 * rhs.norm(),
          "solve residual too large");
  double eig_logdet = 0.0;
  for (double v : hermitian_eig(hpd).eigenvalues) eig_logdet += std::log(v);
  require(std::abs(logdet_hpd(hpd) - eig_logdet) < 1e-8 * std::abs(eig_logdet),
          "logdet must match the eigenvalue sum");
}

void check_omp(const CheckContext& ctx) {
  Rng rng(derive_seed(ctx.seed, 14));
  const ArrayGeometry geom{16, 0.5};
  const SteeringGrid grid = make_steering_grid(geom, 128);
  const CVector atom = grid.steering.col(40);
  require((omp(CVector(3.0 * atom), grid, 1) - 3.0 * atom).norm() < 1e-10,
          "single atom must be recovered exactly");

  const CVector mix = 2.0 * grid.steering.col(10) +
                      cd(0.0, 1.5) * grid.steering.col(60) +
                      0.8 * grid.steering.col(110);
  const CVector rebuilt = omp(mix, grid, 3);
  require((rebuilt - mix).norm() < 1e-8 * mix.norm(),
          "well-separated atoms must be recovered");
  (void)rng;
}

void check_parametric_ls(const CheckContext& ctx) {
  Rng rng(derive_seed(ctx.seed, 15));
  const ArrayGeometry geom{16, 0.5};
  CVector y(geom.antennas);
  for (int i = 0; i < geom.antennas; ++i) y(i) = rng.complex_gaussian();
  const std::vector<double> angles = {-31.0, 4.0, 22.0};
  const CVector proj = parametric_ls(angles, y, geom);
  require(proj.norm() <= y.norm() + 1e-12, "projection must contract");
  require((parametric_ls(angles, proj, geom) - proj).norm() < 1e-8 * y.norm(),
          "projection must be idempotent");
  const CVector in_span = cd(1.0, -2.0) * steering_vector(4.0, geom);
  require((parametric_ls(angles, in_span, geom) - in_span).norm() <
              1e-8 * in_span.norm(),
          "vectors in the span must pass through");
}

void check_ls_noise_floor(const CheckContext& ctx) {
  const ArrayGeometry geom{16, 0.5};
  ScenarioConfig scen;
  scen.geometry = geom;
  double total = 0.0;
  const int trials = 3000;
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(ctx.seed, 16, t));
    const ChannelScenario scenario = draw_scenario(rng, scen);
    const NlosSampler sampler =
        make_nlos_sampler(nlos_covariance(scenario.clusters, geom));
    const CMatrix h = draw_channels(scenario, 1, rng, sampler);
    const ObservationBlock block = add_noise(h, 1.0, rng);
    const EstimatorOutput out = ls_estimate(block.pilot);
    total += (block.target - out.channel_estimate).squaredNorm();
  }
  const double measured = total / (static_cast<double>(trials) * geom.antennas);
  require(std::abs(measured - 1.0) < 0.05,
          "LS error at SNR 0 dB should be the noise power, got " +
              num(measured));
}

ExperimentConfig tiny_config(std::uint64_t seed, int threads) {
  ExperimentConfig config;
  config.geometry = {8, 0.5};
  config.snapshots = 4;
  config.trials = 20;
  config.training_samples = 600;
  config.components = 4;
  config.grid_multiplier = 16;
  config.em_max_iterations = 40;
  config.snr_db = {0.0};
  config.estimators = {"ls", "music-gmm", "genie-lmmse"};
  config.seed = seed;
  config.threads = threads;
  return config;
}

bool tables_match(const ResultTable& lhs, const ResultTable& rhs) {
  if (lhs.rows.size() != rhs.rows.size()) return false;
  for (std::size_t i = 0; i < lhs.rows.size(); ++i) {
    const ResultRow& a = lhs.rows[i];
    const ResultRow& b = rhs.rows[i];
    const bool doa_equal =
        (std::isnan(a.doa_rmse_deg) && std::isnan(b.doa_rmse_deg)) ||
        a.doa_rmse_deg == b.doa_rmse_deg;
    if (a.sweep_param != b.sweep_param || a.sweep_value != b.sweep_value ||
        a.estimator != b.estimator || a.nmse != b.nmse || !doa_equal ||
        a.trials != b.trials || a.failures != b.failures) {
      return false;
    }
  }
  return true;
}

void check_pipeline_determinism(const CheckContext& ctx) {
  const ExperimentConfig config = tiny_config(ctx.seed, ctx.threads);
  const TrainedArtifacts first = train_pipeline(config);
  const TrainedArtifacts second = train_pipeline(config);
  require((first.nlos_scov - second.nlos_scov).norm() == 0.0 &&
              first.prior.los_power == second.prior.los_power,
          "training must be deterministic");
  for (int j = 0; j < first.nlos_gmm.components(); ++j) {
    require((first.nlos_gmm.covariances[j] - second.nlos_gmm.covariances[j])
                    .norm() == 0.0,
            "fitted covariances must be bit-identical across runs");
  }

  const ResultTable once = run_sweep(config, &first);
  const ResultTable twice = run_sweep(config, &first);
  require(tables_match(once, twice), "sweep results must be deterministic");

  // thread count must not change any value; reductions are index-ordered
  ExperimentConfig serial = config;
  serial.threads = 1;
  const TrainedArtifacts serial_artifacts = train_pipeline(serial);
  const ResultTable serial_table = run_sweep(serial, &serial_artifacts);
  require(tables_match(once, serial_table),
          "results must not depend on the worker count");
}

struct Check {
  const char* name;
  std::function<void(const CheckContext&)> run;
};

}  // namespace

int run_validate(std::uint64_t seed, int threads, std::ostream& out) {
  const CheckContext ctx{seed, threads};
  const std::vector<Check> checks = {
      {"steering vectors", check_steering},
      {"angular power density", check_density},
      {"nlos covariance", check_nlos_covariance},
      {"channel covariance", check_channel_covariance},
      {"channel energy normalization", check_channel_energy},
      {"noise statistics", check_noise},
      {"sample covariance", check_sample_covariance},
      {"music spectrum", check_music},
      {"forward-backward averaging", check_forward_backward},
      {"esprit", check_esprit},
      {"nlos projector", check_projector},
      {"em fitting", check_em},
      {"mixture cme identities", check_cme},
      {"dense numerics", check_numerics},
      {"matching pursuit", check_omp},
      {"parametric least squares", check_parametric_ls},
      {"ls noise floor", check_ls_noise_floor},
      {"pipeline determinism", check_pipeline_determinism},
  };

  int failures = 0;
  for (const auto& check : checks) {
    const auto start = std::chrono::steady_clock::now();
    std::string error;
    try {
      check.run(ctx);
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (error.empty()) {
      out << "[ ok ] " << check.name << " (" << elapsed << " s)\n";
    } else {
      ++failures;
      out << "[FAIL] " << check.name << ": " << error << "\n";
    }
  }
  out << (failures == 0 ? "validate: all checks passed\n"
                        : "validate: " + std::to_string(failures) +
                              " check(s) failed\n");
  return failures;
}

}  // namespace chanest
