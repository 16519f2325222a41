#pragma once

// Seeded generators and independent oracles shared by the test binaries.

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "canthresh/canonical.hpp"

namespace testsupport {

using canthresh::Index;
using canthresh::Matrix;
using canthresh::Vector;
using Rng = std::mt19937_64;

inline Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

inline Vector gaussian_vector(Index size, Rng& rng) { return gaussian_matrix(size, 1, rng).col(0); }

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Haar-ish orthogonal matrix from the QR of a Gaussian matrix.
inline Matrix random_orthogonal(Index d, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(d, d, rng));
  return qr.householderQ() * Matrix::Identity(d, d);
}

// Minimum-norm least squares via a complete orthogonal decomposition.
inline Vector pinv_solve(const Matrix& x, const Vector& y) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(x);
  cod.setThreshold(1e-10);
  return cod.solve(y);
}

// argmin (2n)^{-1} |y - Z theta|^2 + tau |theta|_1 by cyclic coordinate descent.
inline Vector lasso_cd(const Matrix& z, const Vector& y, double tau, int max_sweeps = 10000,
                       double tol = 1e-15) {
  const double n = double(z.rows());
  Vector theta = Vector::Zero(z.cols());
  Vector resid = y;
  Vector col_sq(z.cols());
  for (Index j = 0; j < z.cols(); ++j) col_sq(j) = z.col(j).squaredNorm() / n;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (Index j = 0; j < z.cols(); ++j) {
      if (col_sq(j) == 0.0) continue;
      const double rho = z.col(j).dot(resid) / n + col_sq(j) * theta(j);
      double next = 0.0;
      if (rho > tau) next = (rho - tau) / col_sq(j);
      else if (rho < -tau) next = (rho + tau) / col_sq(j);
      const double delta = next - theta(j);
      if (delta != 0.0) {
        resid -= delta * z.col(j);
        theta(j) = next;
        change = std::max(change, std::abs(delta));
      }
    }
    if (change < tol) break;
  }
  return theta;
}

// (X^T X / n + lambda I)^{-1} X^T y / n; for lambda > 0 this already lies in the row space.
inline Vector ridge_dense(const Matrix& x, const Vector& y, double lambda) {
  const double n = double(x.rows());
  const Matrix s = x.transpose() * x / n + lambda * Matrix::Identity(x.cols(), x.cols());
  return s.ldlt().solve(x.transpose() * y / n);
}

}  // namespace testsupport
