// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "chanest/gmm_cme.hpp"
#include "chanest/numerics.hpp"
#include "test_util.hpp"

using namespace chanest;

namespace {

GmmModel toy_model(Rng& rng, int dimension, int components,
                   NoiseRule rule = NoiseRule::projected) {
  GmmModel model;
  model.dimension = dimension;
  model.noise_rule = rule;
  double total = 0.0;
  for (int j = 0; j < components; ++j) {
    model.weights.push_back(rng.uniform(0.2, 1.0));
    total += model.weights.back();
    model.means.push_back(test::random_cvector(rng, dimension));
    model.covariances.push_back(test::random_hpd(rng, dimension));
  }
  for (auto& w : model.weights) w /= total;
  return model;
}

}  // namespace

TEST_CASE("label_doa picks grid atoms exactly and is scale invariant") {
  const ArrayGeometry geom{16, 0.5};
  const SteeringGrid grid = make_steering_grid(geom, 256);
  const int index = 173;
  const CVector atom = grid.steering.col(index);
  CHECK(label_doa(atom, grid) == grid.angles_deg(index));
  CHECK(label_doa(CVector(cd(0.3, -2.1) * atom), grid) ==
        grid.angles_deg(index));
}

TEST_CASE("label_doa lands within one grid step for strong LoS channels") {
  const ArrayGeometry geom{16, 0.5};
  const SteeringGrid grid = make_steering_grid(geom, 256);
  const double step = grid.angles_deg(1) - grid.angles_deg(0);
  ScenarioConfig scen;
  scen.geometry = geom;
  scen.rician_k_db = 20.0;  // K = 100
  int hits = 0;
  const int draws = 1000;
  for (int i = 0; i < draws; ++i) {
    Rng rng(derive_seed(501, i));
    const ChannelScenario scenario = draw_scenario(rng, scen);
    const CMatrix h = draw_channels(scenario, 1, rng);
    if (std::abs(label_doa(h.col(0), grid) - scenario.los_angle_deg) <=
        step) {
      ++hits;
    }
  }
  CHECK(hits >= 990);
}

TEST_CASE("project_nlos projector identities") {
  Rng rng(502);
  const ArrayGeometry geom{16, 0.5};
  const double angle = -23.7;
  const CVector a = steering_vector(angle, geom);

  CHECK(project_nlos(a, angle, geom).norm() < 1e-12);

  CVector h = test::random_cvector(rng, 16);
  h -= a * a.dot(h);  // orthogonal part only
  CHECK((project_nlos(h, angle, geom) - h).norm() < 1e-12 * h.norm());

  const CVector raw = test::random_cvector(rng, 16);
  const CVector once = project_nlos(raw, angle, geom);
  CHECK(std::abs(a.dot(once)) <= 1e-10 * raw.norm());
  CHECK((project_nlos(once, angle, geom) - once).norm() < 1e-12 * raw.norm());
}

TEST_CASE("build_training_set projects every sample against its own label") {
  const ArrayGeometry geom{16, 0.5};
  const SteeringGrid grid = make_steering_grid(geom, 256);
  Rng rng(503);

  // pure-LoS inputs collapse to zero
  CMatrix pure(16, 6);
  for (int c = 0; c < 6; ++c) {
    pure.col(c) = std::polar(2.0, rng.uniform(0.0, 2 * kPi)) *
                  grid.steering.col(40 + 20 * c);
  }
  const CMatrix projected_pure = build_training_set(pure, grid);
  CHECK(projected_pure.norm() < 1e-10);

  // generic inputs: each output orthogonal to its labeled steering vector
  const CMatrix raw = test::random_cmatrix(rng, 16, 50);
  std::vector<int> labels;
  label_max(raw, grid, &labels, nullptr);
  const CMatrix projected = build_training_set(raw, grid);
  for (int c = 0; c < 50; ++c) {
    CHECK(std::abs(grid.steering.col(labels[c]).dot(projected.col(c))) <=
          1e-10 * raw.col(c).norm());
  }
}

TEST_CASE("log_gaussian closed forms and naive-formula oracle") {
  Rng rng(504);
  const int m = 5;
  const CVector mu = test::random_cvector(rng, m);

  CHECK(log_gaussian(mu, mu, CMatrix(CMatrix::Identity(m, m))) ==
        doctest::Approx(-m * std::log(kPi)).epsilon(1e-10));

  const double c = 2.3;
  const CVector x = test::random_cvector(rng, m);
  const double expected =
      -m * std::log(kPi * c) - (x - mu).squaredNorm() / c;
  CHECK(log_gaussian(x, mu, CMatrix(c * CMatrix::Identity(m, m))) ==
        doctest::Approx(expected).epsilon(1e-8));

  // naive evaluation with an explicit inverse and determinant
  const CMatrix cov = test::random_hpd(rng, m);
  const CMatrix inv = cov.inverse();
  const double logdet = std::log(cov.determinant().real());
  const CVector d = x - mu;
  const double naive =
      -m * std::log(kPi) - logdet - (d.adjoint() * inv * d)(0).real();
  CHECK(log_gaussian(x, mu, cov) == doctest::Approx(naive).epsilon(1e-8));
}

TEST_CASE("fit_gmm with one component matches sample statistics") {
  Rng rng(505);
  const int m = 6;
  const int count = 10000;
  const CMatrix truth = test::random_hpd(rng, m);
  const NlosSampler sampler = make_nlos_sampler(truth);
  CMatrix samples(m, count);
  CVector white(m);
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < m; ++j) white(j) = rng.complex_gaussian();
    samples.col(i) = sampler.factor * white;
  }

  EmConfig em;
  em.seed = 1;
  const GmmModel model = fit_gmm(samples, 1, em);

  const CVector sample_mean = samples.rowwise().mean();
  CMatrix sample_cov = CMatrix::Zero(m, m);
  CMatrix centered = samples.colwise() - sample_mean;
  sample_cov.selfadjointView<Eigen::Lower>().rankUpdate(centered, 1.0 / count);
  sample_cov.triangularView<Eigen::StrictlyUpper>() =
      sample_cov.adjoint().triangularView<Eigen::StrictlyUpper>();

  CHECK((model.means[0] - sample_mean).norm() < 0.05 * std::sqrt(double(m)));
  CHECK((model.covariances[0] - sample_cov).norm() < 0.05 * sample_cov.norm());
  CHECK(model.weights[0] == doctest::Approx(1.0));
}

TEST_CASE("fit_gmm log-likelihood is non-decreasing") {
  Rng rng(506);
  const int m = 4;
  const int count = 3000;
  // two well-separated lobes
  CMatrix samples(m, count);
  for (int i = 0; i < count; ++i) {
    const double shift = (i % 2 == 0) ? 3.0 : -3.0;
    samples.col(i) = test::random_cvector(rng, m);
    samples(0, i) += shift;
  }
  EmConfig em;
  em.seed = 2;
  std::vector<double> trace;
  const GmmModel model = fit_gmm(samples, 3, em, 0, &trace);
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    CHECK(trace[i] >= trace[i - 1] - 1e-9 * std::abs(trace[i - 1]));
  }
  double total = 0.0;
  for (double w : model.weights) total += w;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS_AS(fit_gmm(samples, count + 1, em), std::invalid_argument);

  EmConfig bad = em;
  bad.max_iterations = 0;
  CHECK_THROWS_AS(fit_gmm(samples, 2, bad), std::invalid_argument);
  bad = em;
  bad.init = "antigravity";
  CHECK_THROWS_AS(fit_gmm(samples, 2, bad), std::invalid_argument);
}

TEST_CASE("responsibilities simple cases and naive-formula oracle") {
  Rng rng(507);
  const int m = 4;

  GmmModel single = toy_model(rng, m, 1);
  const CVector y = test::random_cvector(rng, m);
  const RVector lone = responsibilities(single, y, 0.7);
  CHECK(lone.size() == 1);
  CHECK(lone(0) == doctest::Approx(1.0));

  // two identical components with equal weights
  GmmModel twin = toy_model(rng, m, 2);
  twin.weights = {0.5, 0.5};
  twin.means[1] = twin.means[0];
  twin.covariances[1] = twin.covariances[0];
  const RVector even = responsibilities(twin, y, 0.7);
  CHECK(even(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(even(1) == doctest::Approx(0.5).epsilon(1e-12));

  // three-component toy against the direct (non-log) computation
  GmmModel toy = toy_model(rng, m, 3);
  const double noise_var = 0.6;
  const double effective = noise_var * (m - 1) / double(m);
  RVector direct(3);
  for (int j = 0; j < 3; ++j) {
    CMatrix shifted = toy.covariances[j];
    shifted.diagonal().array() += effective;
    shifted.diagonal().array() += 1e-10 * shifted.trace().real() / m;
    const CVector d = y - toy.means[j];
    const double density =
        std::exp(-m * std::log(kPi) -
                 std::log(shifted.determinant().real()) -
                 (d.adjoint() * shifted.inverse() * d)(0).real());
    direct(j) = toy.weights[j] * density;
  }
  direct /= direct.sum();
  const RVector computed = responsibilities(toy, y, noise_var);
  CHECK((computed - direct).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(computed.minCoeff() >= 0.0);
  CHECK(computed.sum() == doctest::Approx(1.0).epsilon(1e-10));

  // every component density vanishing is a reportable failure
  CVector far = CVector::Constant(m, cd(std::numeric_limits<double>::infinity(), 0.0));
  CHECK_THROWS_AS(responsibilities(toy, far, noise_var), numerical_error);
}

TEST_CASE("component_lmmse limits and direct-inverse oracle") {
  Rng rng(508);
  const int m = 4;
  GmmModel model = toy_model(rng, m, 2);
  const CVector y = test::random_cvector(rng, m);

  const CVector near_clean = component_lmmse(model, 0, y, 1e-12);
  CHECK((near_clean - y).norm() < 1e-6 * y.norm());

  const CVector all_noise = component_lmmse(model, 0, y, 1e12);
  CHECK((all_noise - model.means[0]).norm() < 1e-6);

  const double noise_var = 0.9;
  const double effective = noise_var * (m - 1) / double(m);
  CMatrix shifted = model.covariances[1];
  shifted.diagonal().array() += effective;
  const CVector direct =
      model.covariances[1] * shifted.inverse() * (y - model.means[1]) +
      model.means[1];
  CHECK((component_lmmse(model, 1, y, noise_var) - direct).norm() < 1e-9);

  CHECK_THROWS_AS(component_lmmse(model, 5, y, 1.0), std::invalid_argument);
}

TEST_CASE("gmm_estimate reduces to the single component and stays in hull") {
  Rng rng(509);
  const int m = 5;
  GmmModel single = toy_model(rng, m, 1);
  const CVector y = test::random_cvector(rng, m);
  CHECK((gmm_estimate(single, y, 0.8) - component_lmmse(single, 0, y, 0.8))
            .norm() < 1e-12);

  GmmModel mixture = toy_model(rng, m, 4);
  const CVector blend = gmm_estimate(mixture, y, 0.8);
  double max_norm = 0.0;
  for (int j = 0; j < 4; ++j) {
    max_norm =
        std::max(max_norm, component_lmmse(mixture, j, y, 0.8).norm());
  }
  CHECK(blend.norm() <= max_norm + 1e-12);
}

TEST_CASE("gmm_estimate equals the brute-force conditional mean (M=2, J=2)") {
  // Quadrature oracle: E[h | y] integrated over C^2 = R^4 on a uniform grid.
  Rng rng(510);
  const int m = 2;
  GmmModel model = toy_model(rng, m, 2, NoiseRule::full);
  for (auto& mean : model.means) mean *= 0.8;

  const double noise_var = 0.5;
  const int n = 48;
  const double lo = -7.0, hi = 7.0;
  const double step = (hi - lo) / n;

  std::vector<CMatrix> inv(2);
  std::vector<double> logdet(2);
  for (int j = 0; j < 2; ++j) {
    inv[j] = model.covariances[j].inverse();
    logdet[j] = std::log(model.covariances[j].determinant().real());
  }

  for (int obs = 0; obs < 2; ++obs) {
    const CVector y = test::random_cvector(rng, m);
    CVector numer = CVector::Zero(m);
    double denom = 0.0;
    CVector h(m);
    for (int i0 = 0; i0 < n; ++i0) {
      const double h0r = lo + (i0 + 0.5) * step;
      for (int i1 = 0; i1 < n; ++i1) {
        const double h0i = lo + (i1 + 0.5) * step;
        h(0) = cd(h0r, h0i);
        for (int i2 = 0; i2 < n; ++i2) {
          const double h1r = lo + (i2 + 0.5) * step;
          for (int i3 = 0; i3 < n; ++i3) {
            h(1) = cd(h1r, lo + (i3 + 0.5) * step);
            double prior = 0.0;
            for (int j = 0; j < 2; ++j) {
              const CVector d = h - model.means[j];
              const double q = (d.adjoint() * inv[j] * d)(0).real();
              prior += model.weights[j] *
                       std::exp(-m * std::log(kPi) - logdet[j] - q);
            }
            const double like =
                std::exp(-(y - h).squaredNorm() / noise_var);
            const double weight = prior * like;
            denom += weight;
            numer += weight * h;
          }
        }
      }
    }
    const CVector oracle = numer / denom;
    const CVector estimate = gmm_estimate(model, y, noise_var);
    CHECK((estimate - oracle).norm() < 1e-3 * (oracle.norm() + 1.0));
  }
}

TEST_CASE("filter bank reproduces the unbanked path exactly") {
  Rng rng(511);
  const int m = 8;
  GmmModel model = toy_model(rng, m, 5);
  const double noise_var = 0.75;
  const FilterBank bank = precompute_filters(model, noise_var);

  for (int i = 0; i < 10; ++i) {
    const CVector y = test::random_cvector(rng, m);
    const CVector banked = gmm_estimate(model, y, noise_var, &bank);
    const CVector plain = gmm_estimate(model, y, noise_var);
    CHECK((banked - plain).norm() < 1e-10 * (plain.norm() + 1.0));
    const RVector post_banked = responsibilities(model, y, noise_var, &bank);
    const RVector post_plain = responsibilities(model, y, noise_var);
    CHECK((post_banked - post_plain).cwiseAbs().maxCoeff() < 1e-10);
  }

  // isotropic covariance: scalar shrinkage filter
  GmmModel scalar = toy_model(rng, m, 1);
  scalar.covariances[0] = 3.0 * CMatrix::Identity(m, m);
  const FilterBank scalar_bank = precompute_filters(scalar, noise_var);
  const double shrink = 3.0 / (3.0 + noise_var * (m - 1) / double(m));
  CHECK((scalar_bank.filters[0] - shrink * CMatrix::Identity(m, m)).norm() <
        1e-10);

  // filters never amplify
  for (const CMatrix& w : bank.filters) {
    const Eigen::JacobiSVD<CMatrix> svd(w);
    CHECK(svd.singularValues().maxCoeff() <= 1.0 + 1e-8);
  }

  CHECK_THROWS_AS(gmm_estimate(model, test::random_cvector(rng, m), 0.5, &bank),
                  std::invalid_argument);  // bank built for another noise level
}

TEST_CASE("banked estimation cost scales about linearly in J") {
  Rng rng(512);
  const int m = 48;
  const double noise_var = 1.0;
  const CVector y = test::random_cvector(rng, m);

  auto time_per_call = [&](int components) {
    GmmModel model = toy_model(rng, m, components);
    const FilterBank bank = precompute_filters(model, noise_var);
    gmm_estimate(model, y, noise_var, &bank);  // warm up
    const int reps = 4000 / components + 20;
    const auto start = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) {
      (void)gmm_estimate(model, y, noise_var, &bank);
    }
    const double elapsed = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    return elapsed / reps;
  };

  const double t8 = time_per_call(8);
  const double t128 = time_per_call(128);
  const double ratio = t128 / t8;
  // linear scaling predicts 16; quadratic would be 256
  CHECK(ratio > 16.0 / 3.0);
  CHECK(ratio < 16.0 * 3.0);
}

TEST_CASE("model persistence round-trips and rejects mismatches") {
  Rng rng(513);
  GmmModel model = toy_model(rng, 6, 3);
  model.grid_id = 96;
  model.sample_count = 1234;
  model.angular_spread_deg = 2.0;
  model.rician_k_db = 10.0;
  model.seed = 777;

  const std::string path = "test_model.bin";
  save_gmm(model, path);
  const GmmModel loaded = load_gmm(path);
  CHECK(loaded.dimension == model.dimension);
  CHECK(loaded.components() == model.components());
  CHECK(loaded.grid_id == model.grid_id);
  CHECK(loaded.sample_count == model.sample_count);
  CHECK(loaded.noise_rule == NoiseRule::projected);
  for (int j = 0; j < 3; ++j) {
    CHECK(loaded.weights[j] == model.weights[j]);
    CHECK((loaded.means[j] - model.means[j]).norm() == 0.0);
    CHECK((loaded.covariances[j] - model.covariances[j]).norm() == 0.0);
  }

  // unprojected models carry grid_id 0 and the full noise rule
  GmmModel full = toy_model(rng, 6, 2, NoiseRule::full);
  full.grid_id = 0;
  save_gmm(full, path);
  CHECK(load_gmm(path).noise_rule == NoiseRule::full);

  // corrupt the version field
  save_gmm(model, path);
  {
    std::fstream file(path,
                      std::ios::binary | std::ios::in | std::ios::out);
    file.seekp(8);
    const std::uint32_t bad_version = 99;
    file.write(reinterpret_cast<const char*>(&bad_version),
               sizeof(bad_version));
  }
  CHECK_THROWS(load_gmm(path));
  std::remove(path.c_str());
}

TEST_CASE("component_lmmse is non-expansive toward the mean as noise grows") {
  Rng rng(514);
  const int m = 6;
  GmmModel model = toy_model(rng, m, 1);
  const CVector y = test::random_cvector(rng, m);
  const EigDecomposition basis = hermitian_eig(model.covariances[0]);
  const CVector low =
      basis.eigenvectors.adjoint() *
      (component_lmmse(model, 0, y, 0.3) - model.means[0]);
  const CVector high =
      basis.eigenvectors.adjoint() *
      (component_lmmse(model, 0, y, 2.7) - model.means[0]);
  for (int i = 0; i < m; ++i) {
    CHECK(std::abs(high(i)) <= std::abs(low(i)) + 1e-12);
  }
}
