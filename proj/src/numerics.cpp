// SPDX-License-Identifier: Apache-2.0

#include "chanest/numerics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <sstream>

namespace chanest {

namespace {

constexpr double kHermitianTol = 1e-10;
constexpr double kRidgeScale = 1e-10;

void require_square(const CMatrix& a, const char* op) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    std::ostringstream msg;
    msg << op << ": matrix must be square, got " << a.rows() << "x" << a.cols();
    throw std::invalid_argument(msg.str());
  }
}

void require_hermitian(const CMatrix& a, const char* op) {
  require_square(a, op);
  const double defect = hermitian_defect(a);
  if (!(defect <= kHermitianTol)) {
    std::ostringstream msg;
    msg << op << ": matrix is not Hermitian (asymmetry " << defect << ")";
    throw std::invalid_argument(msg.str());
  }
}

double ridge_for(const CMatrix& a) {
  return kRidgeScale * a.trace().real() / static_cast<double>(a.rows());
}

[[noreturn]] void throw_not_pd(const CMatrix& regularized, const char* op) {
  // LLT failed: report the smallest pivot from the LDLT factorization.
  Eigen::LDLT<CMatrix> ldlt(regularized);
  const double pivot = ldlt.vectorD().real().minCoeff();
  std::ostringstream msg;
  msg << op << ": matrix is not positive definite (smallest pivot " << pivot
      << ")";
  throw numerical_error(msg.str());
}

}  // namespace

double hermitian_defect(const CMatrix& a) {
  if (a.rows() != a.cols()) return std::numeric_limits<double>::infinity();
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

EigDecomposition hermitian_eig(const CMatrix& a) {
  require_hermitian(a, "hermitian_eig");
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(a);
  if (solver.info() != Eigen::Success) {
    throw numerical_error("hermitian_eig: eigensolver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

CMatrix cholesky_hpd(const CMatrix& a) {
  require_hermitian(a, "cholesky_hpd");
  CMatrix work = a;
  work.diagonal().array() += ridge_for(a);
  Eigen::LLT<CMatrix> llt(work);
  if (llt.info() != Eigen::Success) throw_not_pd(work, "cholesky_hpd");
  return llt.matrixL();
}

CMatrix solve_hpd(const CMatrix& a, const CMatrix& b) {
  require_hermitian(a, "solve_hpd");
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("solve_hpd: right-hand side rows mismatch");
  }
  CMatrix work = a;
  work.diagonal().array() += ridge_for(a);
  Eigen::LLT<CMatrix> llt(work);
  if (llt.info() != Eigen::Success) throw_not_pd(work, "solve_hpd");
  CMatrix x = llt.solve(b);
  // One refinement step against the unregularized matrix removes the ridge
  // bias from the solution.
  x += llt.solve(CMatrix(b - a * x));
  return x;
}

CVector solve_hpd(const CMatrix& a, const CVector& b) {
  return CVector(solve_hpd(a, CMatrix(b)));
}

double logdet_hpd(const CMatrix& a) {
  const CMatrix factor = cholesky_hpd(a);
  return 2.0 * factor.diagonal().real().array().log().sum();
}

}  // namespace chanest
