// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chanest/types.hpp"

namespace chanest {

struct EigDecomposition {
  RVector eigenvalues;   // ascending
  CMatrix eigenvectors;  // columns, unitary
};

// Eigendecomposition of a Hermitian matrix.  The input must be square and
// Hermitian to an absolute asymmetry of 1e-10; eigenvalues come back in
// ascending order.
EigDecomposition hermitian_eig(const CMatrix& a);

// Solves a * x = b for Hermitian positive-definite a.  A ridge of
// 1e-10 * trace(a)/n is added before factorization; fitted covariances can
// otherwise sit right at the edge of machine rank.  Throws numerical_error
// naming the smallest pivot if the matrix is indefinite.
CMatrix solve_hpd(const CMatrix& a, const CMatrix& b);
CVector solve_hpd(const CMatrix& a, const CVector& b);

// log(det(a)) for Hermitian positive-definite a, same ridge as solve_hpd.
double logdet_hpd(const CMatrix& a);

// Lower Cholesky factor of a + ridge, shared by the solve/logdet paths and by
// callers that keep the factor around (EM, filter banks).
CMatrix cholesky_hpd(const CMatrix& a);

// max |a - a^H| over all entries; 0 for exactly Hermitian storage.
double hermitian_defect(const CMatrix& a);

}  // namespace chanest
