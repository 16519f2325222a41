#pragma once

// Canonical form of a linear regression problem.
//
// With the thin SVD n^{-1/2} X = V diag(s) U^T and eigenvalues lambda_j = s_j^2 of
// the sample covariance X^T X / n, the model Y = X beta + eps is rewritten as
// Y = Z theta + eps with Z = sqrt(n) V and theta = diag(s) U^T beta.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "canthresh/error.hpp"

namespace canthresh {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kDefaultRankTolerance = 1e-12;

struct CenteringOffsets {
  Vector column_means;
  double response_mean = 0.0;
};

struct Dataset {
  Matrix design;
  Vector response;
  bool centered = false;

  Dataset() = default;
  Dataset(Matrix x, Vector y, bool is_centered = false)
      : design(std::move(x)), response(std::move(y)), centered(is_centered) {
    validate();
  }

  Index n() const { return design.rows(); }
  Index d() const { return design.cols(); }

  void validate() const {
    if (design.rows() < 1 || design.cols() < 1)
      throw DomainError("dataset must have at least one row and one column");
    detail::require_dims(response.size() == design.rows(),
                         "response length " + std::to_string(response.size()) +
                             " vs " + std::to_string(design.rows()) + " rows");
    if (!design.allFinite() || !response.allFinite())
      throw DomainError("dataset contains non-finite values");
    if (centered) {
      const double col_dev = design.colwise().mean().cwiseAbs().maxCoeff();
      const double y_dev = std::abs(response.mean());
      if (col_dev > 1e-10 || y_dev > 1e-10)
        throw DomainError("dataset flagged as centered but means are not zero");
    }
  }

  // Subset of rows, in the given order.
  template <class Indices>
  Dataset rows(const Indices& idx) const {
    Matrix x(static_cast<Index>(idx.size()), d());
    Vector y(static_cast<Index>(idx.size()));
    Index k = 0;
    for (auto i : idx) {
      x.row(k) = design.row(static_cast<Index>(i));
      y(k) = response(static_cast<Index>(i));
      ++k;
    }
    Dataset out;
    out.design = std::move(x);
    out.response = std::move(y);
    return out;
  }
};

// Subtracts column means of the design and the mean of the response.
inline std::pair<Dataset, CenteringOffsets> center(const Dataset& data) {
  CenteringOffsets off;
  off.column_means = data.design.colwise().mean().transpose();
  off.response_mean = data.response.mean();
  Dataset out;
  out.design = data.design.rowwise() - off.column_means.transpose();
  out.response = data.response.array() - off.response_mean;
  out.centered = true;
  return {std::move(out), std::move(off)};
}

struct CanonicalDecomposition {
  Vector eigenvalues;    // lambda_1 >= ... >= lambda_r > 0, eigenvalues of X^T X / n
  Matrix right_vectors;  // U, d x r
  Matrix left_vectors;   // V, n x r
  double rank_tolerance = kDefaultRankTolerance;

  Index rank() const { return eigenvalues.size(); }
  Index n() const { return left_vectors.rows(); }
  Index d() const { return right_vectors.rows(); }
  Vector singular_values() const { return eigenvalues.cwiseSqrt(); }
};

struct CanonicalCoefficients {
  Vector values;

  CanonicalCoefficients() = default;
  explicit CanonicalCoefficients(Vector v) : values(std::move(v)) {}
  Index size() const { return values.size(); }
};

namespace detail {

// Flips column j of `primary` (and of `partner`) so that its largest-magnitude
// entry is positive. Ties go to the lowest index.
inline void normalize_signs(Matrix& primary, Matrix& partner) {
  for (Index j = 0; j < primary.cols(); ++j) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < primary.rows(); ++i) {
      const double a = std::abs(primary(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (primary(arg, j) < 0.0) {
      primary.col(j) *= -1.0;
      partner.col(j) *= -1.0;
    }
  }
}

}  // namespace detail

/// Thin SVD of n^{-1/2} X truncated at the relative rank cutoff.
///
/// Components with lambda_j <= rank_rel_tol * lambda_1 are dropped. Every retained
/// right singular vector has its largest-magnitude entry positive; the matching
/// left vector is flipped together with it.
inline CanonicalDecomposition canonicalize(const Matrix& design,
                                           double rank_rel_tol = kDefaultRankTolerance) {
  detail::require_domain(rank_rel_tol > 0.0 && rank_rel_tol < 1.0,
                         "rank_rel_tol must lie in (0, 1)");
  if (design.rows() < 1 || design.cols() < 1)
    throw DomainError("design matrix is empty");
  const double n = static_cast<double>(design.rows());
  const Matrix scaled = design / std::sqrt(n);
  Eigen::BDCSVD<Matrix> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || !(s(0) > 0.0)) throw NumericalError("zero design matrix");

  const double top = s(0) * s(0);
  Index r = 0;
  while (r < s.size() && s(r) * s(r) > rank_rel_tol * top) ++r;

  CanonicalDecomposition dec;
  dec.rank_tolerance = rank_rel_tol;
  dec.eigenvalues = s.head(r).array().square();
  dec.right_vectors = svd.matrixV().leftCols(r);
  dec.left_vectors = svd.matrixU().leftCols(r);
  detail::normalize_signs(dec.right_vectors, dec.left_vectors);
  return dec;
}

inline CanonicalDecomposition canonicalize(const Dataset& data,
                                           double rank_rel_tol = kDefaultRankTolerance) {
  return canonicalize(data.design, rank_rel_tol);
}

// theta_LS = V^T Y / sqrt(n)
inline CanonicalCoefficients canonical_ls(const CanonicalDecomposition& dec, const Vector& y) {
  detail::require_dims(y.size() == dec.n(), "response length must equal decomposition rows");
  return CanonicalCoefficients(dec.left_vectors.transpose() * y / std::sqrt(double(dec.n())));
}

// Minimum-norm lift beta = U diag(s)^{-1} theta.
inline Vector to_beta(const CanonicalDecomposition& dec, const CanonicalCoefficients& theta) {
  detail::require_dims(theta.size() == dec.rank(), "theta length must equal rank");
  return dec.right_vectors * theta.values.cwiseQuotient(dec.singular_values());
}

inline CanonicalCoefficients to_theta(const CanonicalDecomposition& dec, const Vector& beta) {
  detail::require_dims(beta.size() == dec.d(), "beta length must equal column count");
  return CanonicalCoefficients(
      dec.singular_values().cwiseProduct(dec.right_vectors.transpose() * beta));
}

}  // namespace canthresh
