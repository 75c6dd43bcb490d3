// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "chanest/channel_model.hpp"
#include "chanest/types.hpp"

namespace chanest {

// Uniformly spaced angle grid over the served sector with cached steering
// vectors; also serves as the dictionary for sparse estimators.
struct SteeringGrid {
  ArrayGeometry geometry;
  RVector angles_deg;  // ascending, uniform spacing
  CMatrix steering;    // M x G, column g = steering_vector(angles_deg[g])

  int size() const { return static_cast<int>(angles_deg.size()); }
};

SteeringGrid make_steering_grid(const ArrayGeometry& geometry, int points,
                                double min_deg = -60.0, double max_deg = 60.0);

struct MusicSpectrum {
  RVector angles_deg;
  RVector values;  // strictly positive
};

// (1/T) Y Y^H, stored exactly Hermitian.
CMatrix sample_covariance(const CMatrix& snapshots);

// Weighted rank-one tracking update alpha * cov + beta * y y^H.
CMatrix update_covariance(const CMatrix& cov, const CVector& y, double alpha,
                          double beta);

// Pseudo-spectrum 1 / (a^H E_n E_n^H a) with E_n spanning the M - signal_dim
// smallest eigenvectors of cov.
MusicSpectrum music_spectrum(const CMatrix& cov, int signal_dim,
                             const SteeringGrid& grid);

// The count largest strict local maxima (endpoints admissible), descending by
// value, ties toward the smaller angle.  Pads with the largest remaining grid
// values when fewer maxima exist so genie callers always get count angles.
std::vector<double> top_peaks(const MusicSpectrum& spectrum, int count);

// Persymmetric (forward-backward) averaging (cov + J conj(cov) J) / 2.
CMatrix forward_backward(const CMatrix& cov);

// LS-ESPRIT on the paths-dimensional signal subspace; gridless.  Returns
// ascending angles in degrees.
std::vector<double> esprit(const CMatrix& cov, int paths,
                           const ArrayGeometry& geometry);

}  // namespace chanest
