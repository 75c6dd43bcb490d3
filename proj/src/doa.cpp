// SPDX-License-Identifier: Apache-2.0

#include "chanest/doa.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "chanest/numerics.hpp"

namespace chanest {

SteeringGrid make_steering_grid(const ArrayGeometry& geometry, int points,
                                double min_deg, double max_deg) {
  if (points < 2) {
    throw std::invalid_argument("make_steering_grid: need at least 2 points");
  }
  if (!(min_deg < max_deg)) {
    throw std::invalid_argument("make_steering_grid: empty angle range");
  }
  SteeringGrid grid;
  grid.geometry = geometry;
  grid.angles_deg.resize(points);
  grid.steering.resize(geometry.antennas, points);
  const double step = (max_deg - min_deg) / (points - 1);
  for (int g = 0; g < points; ++g) {
    grid.angles_deg(g) = min_deg + g * step;
    grid.steering.col(g) = steering_vector(grid.angles_deg(g), geometry);
  }
  return grid;
}

CMatrix sample_covariance(const CMatrix& snapshots) {
  if (snapshots.cols() < 1) {
    throw std::invalid_argument("sample_covariance: need snapshots");
  }
  const Eigen::Index m = snapshots.rows();
  CMatrix cov = CMatrix::Zero(m, m);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(
      snapshots, 1.0 / static_cast<double>(snapshots.cols()));
  cov.triangularView<Eigen::StrictlyUpper>() =
      cov.adjoint().triangularView<Eigen::StrictlyUpper>();
  return cov;
}

CMatrix update_covariance(const CMatrix& cov, const CVector& y, double alpha,
                          double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw std::invalid_argument("update_covariance: weights must be positive");
  }
  if (cov.rows() != cov.cols() || cov.rows() != y.size()) {
    throw std::invalid_argument("update_covariance: dimension mismatch");
  }
  return alpha * cov + beta * (y * y.adjoint());
}

MusicSpectrum music_spectrum(const CMatrix& cov, int signal_dim,
                             const SteeringGrid& grid) {
  const int m = static_cast<int>(cov.rows());
  if (signal_dim < 1 || signal_dim >= m) {
    throw std::invalid_argument(
        "music_spectrum: signal dimension must be in [1, M)");
  }
  if (grid.geometry.antennas != m) {
    throw std::invalid_argument("music_spectrum: grid antenna count mismatch");
  }
  const EigDecomposition eig = hermitian_eig(cov);
  // ||E_n^H a||^2 = ||a||^2 - ||E_s^H a||^2 with unit-norm grid columns.
  const CMatrix signal = eig.eigenvectors.rightCols(signal_dim);
  const CMatrix proj = signal.adjoint() * grid.steering;  // P x G

  MusicSpectrum spectrum;
  spectrum.angles_deg = grid.angles_deg;
  spectrum.values.resize(grid.size());
  for (int g = 0; g < grid.size(); ++g) {
    const double denom = 1.0 - proj.col(g).squaredNorm();
    spectrum.values(g) = 1.0 / std::max(denom, 1e-300);
  }
  return spectrum;
}

std::vector<double> top_peaks(const MusicSpectrum& spectrum, int count) {
  const int g = static_cast<int>(spectrum.values.size());
  if (count < 1) throw std::invalid_argument("top_peaks: count must be >= 1");
  if (count > g) {
    throw std::invalid_argument("top_peaks: count exceeds grid size");
  }

  const RVector& v = spectrum.values;
  std::vector<int> maxima;
  if (g >= 2) {
    for (int i = 0; i < g; ++i) {
      const bool left_ok = i == 0 || v(i) > v(i - 1);
      const bool right_ok = i == g - 1 || v(i) > v(i + 1);
      if (left_ok && right_ok) maxima.push_back(i);
    }
  }

  // Descending value, ties toward the smaller angle (= smaller grid index).
  const auto by_value = [&v](int lhs, int rhs) {
    if (v(lhs) != v(rhs)) return v(lhs) > v(rhs);
    return lhs < rhs;
  };
  std::sort(maxima.begin(), maxima.end(), by_value);
  if (static_cast<int>(maxima.size()) > count) maxima.resize(count);

  if (static_cast<int>(maxima.size()) < count) {
    std::vector<char> taken(g, 0);
    for (int idx : maxima) taken[idx] = 1;
    std::vector<int> rest;
    for (int i = 0; i < g; ++i) {
      if (!taken[i]) rest.push_back(i);
    }
    std::sort(rest.begin(), rest.end(), by_value);
    for (int idx : rest) {
      if (static_cast<int>(maxima.size()) == count) break;
      maxima.push_back(idx);
    }
  }

  std::vector<double> angles;
  angles.reserve(maxima.size());
  for (int idx : maxima) angles.push_back(spectrum.angles_deg(idx));
  return angles;
}

CMatrix forward_backward(const CMatrix& cov) {
  const Eigen::Index m = cov.rows();
  if (m != cov.cols()) {
    throw std::invalid_argument("forward_backward: matrix must be square");
  }
  CMatrix averaged(m, m);
  for (Eigen::Index col = 0; col < m; ++col) {
    for (Eigen::Index row = 0; row < m; ++row) {
      averaged(row, col) =
          0.5 * (cov(row, col) + std::conj(cov(m - 1 - row, m - 1 - col)));
    }
  }
  return averaged;
}

std::vector<double> esprit(const CMatrix& cov, int paths,
                           const ArrayGeometry& geometry) {
  const int m = static_cast<int>(cov.rows());
  if (paths < 1 || paths >= m) {
    throw std::invalid_argument("esprit: path count must be in [1, M)");
  }
  if (geometry.antennas != m) {
    throw std::invalid_argument("esprit: geometry antenna count mismatch");
  }

  const EigDecomposition eig = hermitian_eig(cov);
  const CMatrix signal = eig.eigenvectors.rightCols(paths);
  const CMatrix upper = signal.topRows(m - 1);
  const CMatrix lower = signal.bottomRows(m - 1);

  const CMatrix gram = upper.adjoint() * upper;
  {
    Eigen::SelfAdjointEigenSolver<CMatrix> gram_eig(gram);
    const double smallest = gram_eig.eigenvalues().minCoeff();
    const double largest = gram_eig.eigenvalues().maxCoeff();
    if (!(smallest > 1e-12 * std::max(largest, 1.0))) {
      throw numerical_error("esprit: shifted subspace is rank deficient");
    }
  }
  const CMatrix rotation = gram.ldlt().solve(upper.adjoint() * lower);

  Eigen::ComplexEigenSolver<CMatrix> rot_eig(rotation);
  if (rot_eig.info() != Eigen::Success) {
    throw numerical_error("esprit: rotation eigensolver did not converge");
  }

  std::vector<double> angles;
  angles.reserve(paths);
  for (int p = 0; p < paths; ++p) {
    const double phase = std::arg(rot_eig.eigenvalues()(p));
    double sine = -phase / (2.0 * kPi * geometry.spacing_ratio);
    sine = std::clamp(sine, -1.0, 1.0);
    angles.push_back(rad2deg(std::asin(sine)));
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

}  // namespace chanest
