// SPDX-License-Identifier: Apache-2.0
//
// chanest -- simulation workbench for two-stage (subspace DoA + Gaussian
// mixture) uplink channel estimation on uniform linear arrays.

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace chanest {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using cd = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

// A computation could not be carried out at the required accuracy
// (indefinite matrix, rank-deficient subspace, ...).
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Model fitting failed beyond the recovery budget.
class training_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace chanest
