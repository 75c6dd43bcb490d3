// SPDX-License-Identifier: Apache-2.0

#include "chanest/estimators.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "chanest/numerics.hpp"

namespace chanest {

namespace {

// Largest spectral peak of MUSIC with a one-dimensional signal subspace; the
// LoS stage shared by music_gmm and music_scov.
double music_los_angle(const PilotObservation& obs, const SteeringGrid& grid) {
  const CMatrix cov = sample_covariance(obs.y);
  const MusicSpectrum spectrum = music_spectrum(cov, 1, grid);
  return top_peaks(spectrum, 1).front();
}

}  // namespace

LosPrior estimate_plos(const CMatrix& channels, const SteeringGrid& grid,
                       int threads) {
  if (channels.cols() < 1) {
    throw std::invalid_argument("estimate_plos: empty training set");
  }
  std::vector<double> peak_power;
  label_max(channels, grid, nullptr, &peak_power, threads);
  double total = 0.0;
  for (double p : peak_power) total += p;
  return {total / static_cast<double>(peak_power.size())};
}

CVector los_estimate(const CVector& y, double angle_deg, const LosPrior& prior,
                     double noise_var, const ArrayGeometry& geometry) {
  if (!(noise_var > 0.0)) {
    throw std::invalid_argument("los_estimate: noise variance must be positive");
  }
  const CVector a = steering_vector(angle_deg, geometry);
  const double gain = prior.los_power / (prior.los_power + noise_var);
  return gain * (a * a.dot(y));
}

EstimatorOutput music_gmm(const PilotObservation& obs, const GmmModel& model,
                          const LosPrior& prior, const SteeringGrid& grid,
                          const FilterBank* bank) {
  if (model.dimension != obs.y.rows()) {
    throw std::invalid_argument("music_gmm: model dimension mismatch");
  }
  const double angle = music_los_angle(obs, grid);
  const CVector y = obs.latest();
  const CVector los =
      los_estimate(y, angle, prior, obs.noise_var, grid.geometry);
  const CVector projected = project_nlos(y, angle, grid.geometry);
  EstimatorOutput out;
  out.tag = "music-gmm";
  out.doa_estimate_deg = angle;
  out.channel_estimate =
      los + gmm_estimate(model, projected, obs.noise_var, bank);
  return out;
}

EstimatorOutput ls_estimate(const PilotObservation& obs) {
  return {obs.latest(), std::nullopt, "ls"};
}

EstimatorOutput full_gmm(const PilotObservation& obs, const GmmModel& model,
                         const FilterBank* bank) {
  if (model.noise_rule != NoiseRule::full) {
    throw std::invalid_argument(
        "full_gmm: model was fitted on projected samples");
  }
  return {gmm_estimate(model, obs.latest(), obs.noise_var, bank), std::nullopt,
          "gmm"};
}

CMatrix scov_nlos_filter(const CMatrix& scov, double noise_var) {
  const Eigen::Index m = scov.rows();
  CMatrix shifted = scov;
  shifted.diagonal().array() +=
      noise_var * (m - 1) / static_cast<double>(m);
  // scov (scov + C_n)^{-1} = ((scov + C_n)^{-1} scov)^H
  return solve_hpd(shifted, scov).adjoint();
}

EstimatorOutput music_scov(const PilotObservation& obs, const CMatrix& scov,
                           const LosPrior& prior, const SteeringGrid& grid,
                           const CMatrix* scov_filter) {
  const double angle = music_los_angle(obs, grid);
  const CVector y = obs.latest();
  const CVector los =
      los_estimate(y, angle, prior, obs.noise_var, grid.geometry);
  const CVector projected = project_nlos(y, angle, grid.geometry);
  const CVector nlos = scov_filter
                           ? CVector(*scov_filter * projected)
                           : CVector(scov_nlos_filter(scov, obs.noise_var) *
                                     projected);
  return {los + nlos, angle, "music-s-cov"};
}

namespace {

// One greedy OMP pass; reports the least-squares estimate after every
// selection so genie callers get all sparsity orders from a single sweep.
void omp_sweep(const CVector& y, const SteeringGrid& dictionary,
               int max_atoms,
               const std::function<void(int, const CVector&)>& on_estimate) {
  const int g = dictionary.size();
  const Eigen::Index m = y.size();
  if (max_atoms < 1 || max_atoms > m) {
    throw std::invalid_argument("omp: sparsity must be in [1, M]");
  }
  if (dictionary.steering.rows() != m) {
    throw std::invalid_argument("omp: dictionary dimension mismatch");
  }

  std::vector<int> support;
  CMatrix atoms(m, max_atoms);
  CVector residual = y;
  for (int k = 0; k < max_atoms; ++k) {
    const CVector corr = dictionary.steering.adjoint() * residual;
    int best = 0;
    double best_power = std::norm(corr(0));
    for (int i = 1; i < g; ++i) {
      const double power = std::norm(corr(i));
      if (power > best_power) {
        best_power = power;
        best = i;
      }
    }
    support.push_back(best);
    atoms.col(k) = dictionary.steering.col(best);

    const auto selected = atoms.leftCols(k + 1);
    const CMatrix gram = selected.adjoint() * selected;
    Eigen::LLT<CMatrix> llt(gram);
    if (llt.info() != Eigen::Success) {
      throw numerical_error("omp: selected atoms are rank deficient");
    }
    const CVector coef = llt.solve(selected.adjoint() * y);
    const CVector estimate = selected * coef;
    residual = y - estimate;
    on_estimate(k + 1, estimate);
  }
}

}  // namespace

CVector omp(const CVector& y, const SteeringGrid& dictionary, int sparsity) {
  CVector out;
  omp_sweep(y, dictionary, sparsity,
            [&](int k, const CVector& estimate) {
              if (k == sparsity) out = estimate;
            });
  return out;
}

EstimatorOutput genie_omp(const PilotObservation& obs,
                          const CVector& true_channel,
                          const SteeringGrid& dictionary, int max_sparsity) {
  const CVector y = obs.latest();
  const int budget =
      std::min<int>(max_sparsity, static_cast<int>(y.size()));
  CVector best;
  double best_err = std::numeric_limits<double>::infinity();
  try {
    omp_sweep(y, dictionary, budget, [&](int, const CVector& estimate) {
      const double err = (true_channel - estimate).squaredNorm();
      if (err < best_err) {
        best_err = err;
        best = estimate;
      }
    });
  } catch (const numerical_error&) {
    // a residual can hit exact zero in noiseless corners, after which the
    // greedy selection degenerates; the orders seen so far still stand
    if (best.size() == 0) throw;
  }
  return {best, std::nullopt, "genie-omp"};
}

namespace {

std::vector<double> drop_near_duplicates(std::vector<double> angles) {
  std::sort(angles.begin(), angles.end());
  std::vector<double> kept;
  for (double angle : angles) {
    if (kept.empty() || angle - kept.back() > 1e-5) kept.push_back(angle);
  }
  return kept;
}

CVector parametric_ls_once(const std::vector<double>& angles_deg,
                           const CVector& y, const ArrayGeometry& geometry,
                           bool* ill_conditioned) {
  const int paths = static_cast<int>(angles_deg.size());
  CMatrix steering(geometry.antennas, paths);
  for (int p = 0; p < paths; ++p) {
    steering.col(p) = steering_vector(angles_deg[p], geometry);
  }
  const CMatrix gram = steering.adjoint() * steering;
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram);
  const double smallest = eig.eigenvalues().minCoeff();
  const double largest = eig.eigenvalues().maxCoeff();
  if (!(smallest > 0.0) || largest / smallest > 1e12) {
    *ill_conditioned = true;
    return CVector();
  }
  *ill_conditioned = false;
  return steering * solve_hpd(gram, CVector(steering.adjoint() * y));
}

}  // namespace

CVector parametric_ls(const std::vector<double>& angles_deg, const CVector& y,
                      const ArrayGeometry& geometry) {
  if (angles_deg.empty()) {
    throw std::invalid_argument("parametric_ls: need at least one angle");
  }
  if (static_cast<int>(angles_deg.size()) >= geometry.antennas) {
    throw std::invalid_argument("parametric_ls: path count must be < M");
  }

  bool ill = false;
  CVector estimate = parametric_ls_once(angles_deg, y, geometry, &ill);
  if (!ill) return estimate;

  const std::vector<double> deduped = drop_near_duplicates(angles_deg);
  estimate = parametric_ls_once(deduped, y, geometry, &ill);
  if (!ill) return estimate;
  throw numerical_error(
      "parametric_ls: steering Gram matrix is ill-conditioned");
}

EstimatorOutput genie_parametric(const PilotObservation& obs,
                                 const CVector& true_channel,
                                 SubspaceMethod method, int max_paths,
                                 const SteeringGrid& grid) {
  const int m = static_cast<int>(obs.y.rows());
  const CVector y = obs.latest();
  const CMatrix cov = sample_covariance(obs.y);
  const CMatrix cov_fb =
      method == SubspaceMethod::esprit ? forward_backward(cov) : CMatrix();

  CVector best;
  double best_err = std::numeric_limits<double>::infinity();
  int attempted = 0;
  for (int paths = 1; paths <= std::min(max_paths, m - 1); ++paths) {
    try {
      std::vector<double> angles;
      if (method == SubspaceMethod::music) {
        angles = top_peaks(music_spectrum(cov, paths, grid), paths);
      } else {
        angles = esprit(cov_fb, paths, grid.geometry);
      }
      const CVector estimate = parametric_ls(angles, y, grid.geometry);
      ++attempted;
      const double err = (true_channel - estimate).squaredNorm();
      if (err < best_err) {
        best_err = err;
        best = estimate;
      }
    } catch (const numerical_error&) {
      // this path count failed, keep scanning
    }
  }
  if (attempted == 0) {
    throw numerical_error("genie_parametric: every path count failed");
  }
  return {best, std::nullopt,
          method == SubspaceMethod::music ? "genie-music" : "genie-esprit"};
}

EstimatorOutput genie_lmmse(const PilotObservation& obs,
                            const ChannelScenario& scenario,
                            const CMatrix* nlos_cov) {
  const CMatrix cov = nlos_cov ? channel_covariance(scenario, *nlos_cov)
                               : channel_covariance(scenario);
  CMatrix shifted = cov;
  shifted.diagonal().array() += obs.noise_var;
  const CVector y = obs.latest();
  return {CVector(cov * solve_hpd(shifted, y)), std::nullopt, "genie-lmmse"};
}

}  // namespace chanest
