// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "chanest/estimators.hpp"
#include "chanest/numerics.hpp"
#include "chanest/parallel.hpp"
#include "test_util.hpp"

using namespace chanest;

namespace {

const ArrayGeometry kGeom{16, 0.5};

SteeringGrid grid16() { return make_steering_grid(kGeom, 256); }

ObservationBlock make_block(Rng& rng, const ChannelScenario& scenario,
                            int snapshots, double noise_var) {
  const CMatrix h = draw_channels(
      scenario, snapshots, rng,
      make_nlos_sampler(nlos_covariance(scenario.clusters, scenario.geometry)));
  return add_noise(h, noise_var, rng);
}

}  // namespace

TEST_CASE("estimate_plos closed forms") {
  const SteeringGrid grid = grid16();
  Rng rng(601);

  // pure-LoS samples of power M land exactly at M
  CMatrix pure(16, 8);
  for (int c = 0; c < 8; ++c) {
    pure.col(c) = std::polar(std::sqrt(16.0), rng.uniform(0.0, 2 * kPi)) *
                  grid.steering.col(30 * c % 256);
  }
  CHECK(estimate_plos(pure, grid).los_power ==
        doctest::Approx(16.0).epsilon(1e-10));

  CHECK(estimate_plos(CMatrix(CMatrix::Zero(16, 4)), grid).los_power == 0.0);
}

TEST_CASE("estimate_plos approaches M K/(K+1) (Monte Carlo)") {
  // leakage from the clusters into the LoS beam shrinks like 1/M, so this
  // needs the full-size array for the 5% band to hold
  const ArrayGeometry geom{64, 0.5};
  const SteeringGrid grid = make_steering_grid(geom, 16 * 64);
  ScenarioConfig scen;
  scen.geometry = geom;
  scen.rician_k_db = 0.0;  // K = 1
  const int count = 5000;
  CMatrix channels(64, count);
  parallel_for(count, [&](std::size_t i) {
    Rng rng(derive_seed(602, i));
    const ChannelScenario scenario = draw_scenario(rng, scen);
    channels.col(i) = draw_channels(scenario, 1, rng);
  });
  const double plos = estimate_plos(channels, grid).los_power;
  CHECK(std::abs(plos - 32.0) < 0.05 * 32.0);
}

TEST_CASE("los_estimate shrinkage and projection behaviour") {
  Rng rng(603);
  const double angle = 12.3;
  const CVector a = steering_vector(angle, kGeom);
  const cd rho(1.4, -0.6);

  const LosPrior strong{16.0};
  const CVector recovered =
      los_estimate(CVector(rho * a), angle, strong, 1e-12, kGeom);
  CHECK((recovered - rho * a).norm() < 1e-6);

  CVector orthogonal = test::random_cvector(rng, 16);
  orthogonal -= a * a.dot(orthogonal);
  CHECK(los_estimate(orthogonal, angle, strong, 1.0, kGeom).norm() < 1e-10);

  const CVector y = test::random_cvector(rng, 16);
  const CVector estimate = los_estimate(y, angle, strong, 0.5, kGeom);
  // output parallel to the steering vector
  CHECK((estimate - a * a.dot(estimate)).norm() < 1e-10 * estimate.norm());
}

TEST_CASE("ls estimator returns the last snapshot") {
  Rng rng(604);
  const ChannelScenario scenario = test::fixed_scenario(kGeom);
  const ObservationBlock block = make_block(rng, scenario, 4, 1.0);
  const EstimatorOutput out = ls_estimate(block.pilot);
  CHECK((out.channel_estimate - block.pilot.y.col(3)).norm() == 0.0);
  CHECK(out.tag == "ls");
}

TEST_CASE("ls error matches the analytic noise floor (Monte Carlo)") {
  ScenarioConfig scen;
  scen.geometry = kGeom;
  double total = 0.0;
  const int trials = 4000;
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(605, t));
    const ChannelScenario scenario = draw_scenario(rng, scen);
    const ObservationBlock block = make_block(rng, scenario, 1, 1.0);
    total += (block.target - ls_estimate(block.pilot).channel_estimate)
                 .squaredNorm();
  }
  const double measured = total / (double(trials) * kGeom.antennas);
  CHECK(std::abs(measured - 1.0) < 0.05);
}

TEST_CASE("full_gmm with one component is the global LMMSE filter") {
  Rng rng(606);
  GmmModel model;
  model.dimension = 16;
  model.noise_rule = NoiseRule::full;
  model.weights = {1.0};
  model.means.push_back(CVector::Zero(16));
  model.covariances.push_back(test::random_hpd(rng, 16));

  const ChannelScenario scenario = test::fixed_scenario(kGeom);
  const ObservationBlock block = make_block(rng, scenario, 1, 0.8);
  const CVector y = block.pilot.latest();

  CMatrix shifted = model.covariances[0];
  shifted.diagonal().array() += 0.8;
  const CVector direct = model.covariances[0] * solve_hpd(shifted, y);
  CHECK((full_gmm(block.pilot, model).channel_estimate - direct).norm() <
        1e-9);

  // huge noise: estimate collapses to the prior-weighted means
  GmmModel two;
  two.dimension = 16;
  two.noise_rule = NoiseRule::full;
  two.weights = {0.25, 0.75};
  two.means.push_back(test::random_cvector(rng, 16));
  two.means.push_back(test::random_cvector(rng, 16));
  two.covariances.push_back(test::random_hpd(rng, 16));
  two.covariances.push_back(test::random_hpd(rng, 16));
  PilotObservation huge_noise{block.pilot.y, 1e12};
  const CVector limit = full_gmm(huge_noise, two).channel_estimate;
  const CVector prior_mean = 0.25 * two.means[0] + 0.75 * two.means[1];
  CHECK((limit - prior_mean).norm() < 1e-4 * (prior_mean.norm() + 1.0));

  // projected models must be rejected
  GmmModel projected = two;
  projected.noise_rule = NoiseRule::projected;
  CHECK_THROWS_AS(full_gmm(block.pilot, projected), std::invalid_argument);
}

TEST_CASE("music_gmm stage-2 input is orthogonal to the estimated steering") {
  Rng rng(607);
  const SteeringGrid grid = grid16();
  const ChannelScenario scenario = test::fixed_scenario(kGeom, 10.0);
  const ObservationBlock block = make_block(rng, scenario, 8, 0.1);

  // reproduce the stage-1 angle, then check the projector contract
  const CMatrix cov = sample_covariance(block.pilot.y);
  const double angle =
      top_peaks(music_spectrum(cov, 1, grid), 1).front();
  const CVector projected =
      project_nlos(block.pilot.latest(), angle, kGeom);
  const CVector a = steering_vector(angle, kGeom);
  CHECK(std::abs(a.dot(projected)) <= 1e-10 * block.pilot.latest().norm());
}

TEST_CASE("music_gmm recovers nearly pure LoS channels") {
  const SteeringGrid grid = grid16();
  ScenarioConfig scen;
  scen.geometry = kGeom;
  scen.rician_k_db = 90.0;  // essentially no NLoS power

  // a one-component zero-mean mixture on the projected space suffices here
  GmmModel model;
  model.dimension = 16;
  model.noise_rule = NoiseRule::projected;
  model.weights = {1.0};
  model.means.push_back(CVector::Zero(16));
  model.covariances.push_back(0.01 * CMatrix::Identity(16, 16));

  const LosPrior prior{16.0};
  double total = 0.0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(608, t));
    const ChannelScenario scenario = draw_scenario(rng, scen);
    const ObservationBlock block = make_block(rng, scenario, 10, 1e-4);
    const EstimatorOutput out =
        music_gmm(block.pilot, model, prior, grid);
    total += (block.target - out.channel_estimate).squaredNorm();
    CHECK(out.doa_estimate_deg.has_value());
  }
  CHECK(total / (double(trials) * kGeom.antennas) < 1e-3);
}

TEST_CASE("music_scov equals music_gmm with a one-component zero-mean model") {
  Rng rng(609);
  const SteeringGrid grid = grid16();
  const ChannelScenario scenario = test::fixed_scenario(kGeom);
  const ObservationBlock block = make_block(rng, scenario, 6, 0.7);

  const CMatrix scov = test::random_hpd(rng, 16);
  GmmModel equivalent;
  equivalent.dimension = 16;
  equivalent.noise_rule = NoiseRule::projected;
  equivalent.weights = {1.0};
  equivalent.means.push_back(CVector::Zero(16));
  equivalent.covariances.push_back(scov);

  const LosPrior prior{7.0};
  const EstimatorOutput via_scov =
      music_scov(block.pilot, scov, prior, grid);
  const EstimatorOutput via_gmm =
      music_gmm(block.pilot, equivalent, prior, grid);
  CHECK((via_scov.channel_estimate - via_gmm.channel_estimate).norm() <
        1e-8 * via_gmm.channel_estimate.norm());

  // sigma^2 -> infinity: the whole estimate vanishes
  PilotObservation huge{block.pilot.y, 1e12};
  CHECK(music_scov(huge, scov, prior, grid).channel_estimate.norm() < 1e-6);
}

TEST_CASE("omp exact recovery and residual orthogonality") {
  Rng rng(610);
  const SteeringGrid grid = grid16();

  const CVector atom = cd(2.0, -1.0) * grid.steering.col(77);
  CHECK((omp(atom, grid, 1) - atom).norm() < 1e-10);

  const CVector mix = 2.0 * grid.steering.col(20) +
                      cd(0.0, 1.5) * grid.steering.col(130) +
                      0.7 * grid.steering.col(220);
  CHECK((omp(mix, grid, 3) - mix).norm() < 1e-8 * mix.norm());

  // residual after k iterations is orthogonal to everything selected so far
  const CVector y = test::random_cvector(rng, 16);
  for (int sparsity : {1, 2, 4}) {
    const CVector estimate = omp(y, grid, sparsity);
    const CVector residual = y - estimate;
    // the estimate spans the selection; orthogonality to the estimate itself
    CHECK(std::abs(estimate.dot(residual)) <= 1e-10 * y.squaredNorm());
  }

  CHECK_THROWS_AS(omp(y, grid, 0), std::invalid_argument);
  CHECK_THROWS_AS(omp(y, grid, 17), std::invalid_argument);
}

TEST_CASE("genie_omp picks the best sparsity order") {
  Rng rng(611);
  const SteeringGrid grid = grid16();
  const ChannelScenario scenario = test::fixed_scenario(kGeom);
  const ObservationBlock block = make_block(rng, scenario, 1, 0.5);

  const EstimatorOutput out =
      genie_omp(block.pilot, block.target, grid, 8);
  const double chosen = (block.target - out.channel_estimate).squaredNorm();
  for (int s = 1; s <= 8; ++s) {
    const CVector fixed = omp(block.pilot.latest(), grid, s);
    CHECK(chosen <= (block.target - fixed).squaredNorm() + 1e-12);
  }

  // pure LoS, noiseless: a single atom nails it
  const CVector pure = cd(3.0, 0.5) * grid.steering.col(99);
  PilotObservation clean{CMatrix(pure), 1e-9};
  const EstimatorOutput single = genie_omp(clean, pure, grid, 8);
  CHECK((single.channel_estimate - pure).norm() < 1e-8 * pure.norm());
}

TEST_CASE("parametric_ls projection contracts, is idempotent, dedupes") {
  Rng rng(612);
  const CVector y = test::random_cvector(rng, 16);
  const std::vector<double> angles = {-40.0, -5.0, 31.0};

  const CVector projected = parametric_ls(angles, y, kGeom);
  CHECK(projected.norm() <= y.norm() + 1e-12);
  CHECK((parametric_ls(angles, projected, kGeom) - projected).norm() <
        1e-8 * y.norm());

  const CVector single = parametric_ls({11.0}, y, kGeom);
  const CVector a = steering_vector(11.0, kGeom);
  CHECK((single - a * a.dot(y)).norm() < 1e-10 * y.norm());

  // exact duplicates are dropped on retry instead of failing
  const CVector deduped = parametric_ls({11.0, 11.0}, y, kGeom);
  CHECK((deduped - single).norm() < 1e-8 * y.norm());

  std::vector<double> too_many(16, 0.0);
  CHECK_THROWS_AS(parametric_ls(too_many, y, kGeom), std::invalid_argument);
  CHECK_THROWS_AS(parametric_ls({}, y, kGeom), std::invalid_argument);
}

TEST_CASE("genie_parametric recovers single noiseless paths") {
  const CVector a = steering_vector(-14.2, kGeom);
  const cd gain(1.1, 0.4);
  const CMatrix y = CMatrix(gain * a);
  PilotObservation clean{y, 1e-10};
  const SteeringGrid grid = grid16();
  const CVector truth = gain * a;

  const EstimatorOutput via_esprit = genie_parametric(
      clean, truth, SubspaceMethod::esprit, 4, grid);
  CHECK((via_esprit.channel_estimate - truth).norm() < 1e-5 * truth.norm());

  const EstimatorOutput via_music = genie_parametric(
      clean, truth, SubspaceMethod::music, 4, grid);
  // grid-limited: within the resolution of one grid step
  CHECK((via_music.channel_estimate - truth).norm() < 0.1 * truth.norm());
}

TEST_CASE("genie_parametric never does worse than any fixed path count") {
  Rng rng(613);
  const SteeringGrid grid = grid16();
  const ChannelScenario scenario = test::fixed_scenario(kGeom);
  const ObservationBlock block = make_block(rng, scenario, 10, 1.0);

  const EstimatorOutput best = genie_parametric(
      block.pilot, block.target, SubspaceMethod::music, 6, grid);
  const double chosen = (block.target - best.channel_estimate).squaredNorm();
  const CMatrix cov = sample_covariance(block.pilot.y);
  for (int paths = 1; paths <= 6; ++paths) {
    const auto angles = top_peaks(music_spectrum(cov, paths, grid), paths);
    const CVector fixed =
        parametric_ls(angles, block.pilot.latest(), kGeom);
    CHECK(chosen <= (block.target - fixed).squaredNorm() + 1e-12);
  }
}

TEST_CASE("genie_lmmse limiting behaviour") {
  Rng rng(614);
  const ChannelScenario scenario = test::fixed_scenario(kGeom);
  const CMatrix nlos = nlos_covariance(scenario.clusters, kGeom);
  const ObservationBlock block = make_block(rng, scenario, 1, 1.0);

  PilotObservation clean{block.pilot.y, 1e-12};
  CHECK((genie_lmmse(clean, scenario, &nlos).channel_estimate -
         block.pilot.latest())
            .norm() < 1e-6 * block.pilot.latest().norm());

  PilotObservation buried{block.pilot.y, 1e12};
  CHECK(genie_lmmse(buried, scenario, &nlos).channel_estimate.norm() < 1e-6);
}

TEST_CASE("estimators are deterministic functions of their inputs") {
  Rng rng(615);
  const SteeringGrid grid = grid16();
  const ChannelScenario scenario = test::fixed_scenario(kGeom);
  const ObservationBlock block = make_block(rng, scenario, 5, 0.9);
  const CMatrix nlos = nlos_covariance(scenario.clusters, kGeom);

  const auto once =
      genie_parametric(block.pilot, block.target, SubspaceMethod::esprit, 4,
                       grid);
  const auto twice =
      genie_parametric(block.pilot, block.target, SubspaceMethod::esprit, 4,
                       grid);
  CHECK((once.channel_estimate - twice.channel_estimate).norm() == 0.0);

  const auto lmmse_a = genie_lmmse(block.pilot, scenario, &nlos);
  const auto lmmse_b = genie_lmmse(block.pilot, scenario, &nlos);
  CHECK((lmmse_a.channel_estimate - lmmse_b.channel_estimate).norm() == 0.0);
}
