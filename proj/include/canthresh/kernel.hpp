#pragma once

// Canonical thresholding in a reproducing kernel Hilbert space.
//
// The scaled Gram matrix K/n = V diag(lambda) V^T plays the role of X X^T / n, the
// canonical design is sqrt(n) V, and the minimum-H-norm function with canonical
// coefficients theta_hat is f(.) = sum_i alpha_i k(x_i, .) with
// alpha = n^{-1/2} V diag(lambda)^{-1} theta_hat.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numeric>
#include <optional>
#include <string>

#include "canthresh/estimators.hpp"

namespace canthresh {

inline constexpr double kDefaultKernelRankTolerance = 1e-10;

enum class KernelKind { Linear, Rbf, Polynomial };

struct KernelSpec {
  KernelKind kind = KernelKind::Linear;
  double gamma = 1.0;  // Rbf: exp(-gamma |x - x'|^2)
  int degree = 2;      // Polynomial: (scale <x, x'> + coef0)^degree
  double coef0 = 1.0;
  double scale = 1.0;

  static KernelSpec linear() { return {}; }
  static KernelSpec rbf(double gamma) {
    KernelSpec s;
    s.kind = KernelKind::Rbf;
    s.gamma = gamma;
    s.validate();
    return s;
  }
  static KernelSpec polynomial(int degree, double coef0, double scale) {
    KernelSpec s;
    s.kind = KernelKind::Polynomial;
    s.degree = degree;
    s.coef0 = coef0;
    s.scale = scale;
    s.validate();
    return s;
  }

  void validate() const {
    switch (kind) {
      case KernelKind::Linear: break;
      case KernelKind::Rbf:
        // gamma = 0 is admitted: it degenerates to the all-ones kernel
        detail::require_domain(std::isfinite(gamma) && gamma >= 0.0, "rbf gamma must be >= 0");
        break;
      case KernelKind::Polynomial:
        detail::require_domain(degree >= 1, "polynomial degree must be positive");
        detail::require_domain(std::isfinite(coef0), "polynomial coef0 must be finite");
        detail::require_domain(std::isfinite(scale) && scale > 0.0,
                               "polynomial scale must be positive");
        break;
    }
  }

  template <class A, class B>
  double operator()(const A& x, const B& y) const {
    switch (kind) {
      case KernelKind::Linear: return x.dot(y);
      case KernelKind::Rbf: return std::exp(-gamma * (x - y).squaredNorm());
      case KernelKind::Polynomial: return std::pow(scale * x.dot(y) + coef0, degree);
    }
    return 0.0;
  }
};

/// K_ij = k(x_i, x_j), evaluated once per unordered pair.
inline Matrix gram(const Matrix& points, const KernelSpec& spec) {
  spec.validate();
  if (points.rows() < 1) throw DomainError("gram needs at least one point");
  const Index n = points.rows();
  Matrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      const double v = spec(points.row(i), points.row(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  if (!k.allFinite()) throw NumericalError("kernel matrix has non-finite entries");
  return k;
}

// k(x_i, x) for every training point x_i.
inline Vector kernel_vector(const Matrix& points, const KernelSpec& spec, const Vector& x) {
  detail::require_dims(x.size() == points.cols(),
                       "point has " + std::to_string(x.size()) + " coordinates, model expects " +
                           std::to_string(points.cols()));
  Vector kv(points.rows());
  for (Index i = 0; i < points.rows(); ++i) kv(i) = spec(points.row(i).transpose(), x);
  return kv;
}

struct KernelEigen {
  Vector eigenvalues;  // of K / n, descending, positive
  Matrix left_vectors;  // n x r
};

/// Eigendecomposition of K/n with the spectrum floor applied.
///
/// Eigenvalues at or below rank_rel_tol * lambda_1 are dropped; anything below
/// -rank_rel_tol * lambda_1 means K is not positive semidefinite and is an error.
/// Columns are sign-normalized like the right vectors of canonicalize.
inline KernelEigen kernel_canonicalize(const Matrix& k,
                                       double rank_rel_tol = kDefaultKernelRankTolerance) {
  detail::require_dims(k.rows() == k.cols() && k.rows() > 0, "kernel matrix must be square");
  detail::require_domain(rank_rel_tol > 0.0 && rank_rel_tol < 1.0,
                         "rank_rel_tol must lie in (0, 1)");
  if (!k.allFinite()) throw NumericalError("kernel matrix has non-finite entries");
  const double amax = k.cwiseAbs().maxCoeff();
  if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(amax, 1e-300))
    throw DomainError("kernel matrix is not symmetric");

  const double n = static_cast<double>(k.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> es(k / n);
  if (es.info() != Eigen::Success) throw NumericalError("kernel eigendecomposition failed");
  const Vector& ev = es.eigenvalues();  // ascending
  const double top = ev(ev.size() - 1);
  if (!(top > 0.0)) throw NumericalError("zero kernel matrix");
  if (ev(0) < -rank_rel_tol * top) throw NumericalError("kernel matrix not positive semidefinite");

  Index r = 0;
  for (Index i = ev.size() - 1; i >= 0 && ev(i) > rank_rel_tol * top; --i) ++r;
  KernelEigen out;
  out.eigenvalues.resize(r);
  out.left_vectors.resize(k.rows(), r);
  for (Index j = 0; j < r; ++j) {
    const Index src = ev.size() - 1 - j;
    out.eigenvalues(j) = ev(src);
    out.left_vectors.col(j) = es.eigenvectors().col(src);
  }
  Matrix unused(0, r);
  detail::normalize_signs(out.left_vectors, unused);
  return out;
}

struct KernelModel {
  Matrix training_points;
  Vector dual_coeffs;  // alpha
  Vector theta_hat;
  Vector eigenvalues;
  Matrix left_vectors;
  GctConfig config;
  KernelSpec kernel;
  std::optional<double> response_mean;

  Index n() const { return training_points.rows(); }
};

/// Kernel GCT fit. With `center_response` the mean of y is removed before fitting and
/// added back by the predictors.
inline KernelModel fit_kernel_gct(const Matrix& points, const Vector& y, const KernelSpec& spec,
                                  const GctConfig& config,
                                  double rank_rel_tol = kDefaultKernelRankTolerance,
                                  bool center_response = false) {
  detail::require_dims(y.size() == points.rows(), "response length must equal point count");
  config.validate();
  KernelModel m;
  m.training_points = points;
  m.kernel = spec;
  m.config = config;
  Vector target = y;
  if (center_response) {
    m.response_mean = y.mean();
    target.array() -= *m.response_mean;
  }
  const auto eig = kernel_canonicalize(gram(points, spec), rank_rel_tol);
  const double sqrt_n = std::sqrt(double(points.rows()));
  const Vector theta_ls = eig.left_vectors.transpose() * target / sqrt_n;
  m.theta_hat = gct_shrink(eig.eigenvalues, theta_ls, config);
  m.dual_coeffs = eig.left_vectors * m.theta_hat.cwiseQuotient(eig.eigenvalues) / sqrt_n;
  m.eigenvalues = eig.eigenvalues;
  m.left_vectors = eig.left_vectors;
  return m;
}

// f(x) = k(x)^T alpha (+ response mean)
inline double predict_kernel(const KernelModel& m, const Vector& x) {
  const double f = kernel_vector(m.training_points, m.kernel, x).dot(m.dual_coeffs);
  return f + m.response_mean.value_or(0.0);
}

inline Vector predict_kernel(const KernelModel& m, const Matrix& xs) {
  Vector out(xs.rows());
  for (Index i = 0; i < xs.rows(); ++i) out(i) = predict_kernel(m, Vector(xs.row(i).transpose()));
  return out;
}

/// n^{-1/2} k(x)^T V Lambda^{-2-phi} T_tau[Lambda^phi theta_LS], evaluated by projecting
/// k(x) onto V first. Agrees with predict_kernel up to rounding.
inline double predict_kernel_spectral(const KernelModel& m, const Vector& x) {
  const Vector proj = m.left_vectors.transpose() * kernel_vector(m.training_points, m.kernel, x);
  const Vector w = gct_weights(m.eigenvalues, m.config.phi);
  const Vector thresholded = w.cwiseProduct(m.theta_hat);  // T_tau[Lambda^phi theta_LS]
  double f = 0.0;
  for (Index j = 0; j < proj.size(); ++j)
    f += proj(j) * thresholded(j) / (m.eigenvalues(j) * w(j));
  return f / std::sqrt(double(m.n())) + m.response_mean.value_or(0.0);
}

// Kα at the training points, without the response offset.
inline Vector kernel_in_sample_fit(const KernelModel& m) {
  return gram(m.training_points, m.kernel) * m.dual_coeffs;
}

struct KernelInSampleError {
  double error = 0.0;           // n^{-1} sum_i (f_hat(x_i) - f(x_i))^2
  double canonical_part = 0.0;  // ||theta_hat - V^T f / sqrt(n)||^2
  double residual_part = 0.0;   // ||f - V V^T f||^2 / n
};

/// In-sample error against true function values, split into the part seen by the
/// retained spectrum and the part of f outside span(V). `f_true` is on the centered
/// scale when the model was fitted with a response mean.
inline KernelInSampleError kernel_in_sample_error(const KernelModel& m, const Vector& f_true) {
  detail::require_dims(f_true.size() == m.n(), "true values must have one entry per point");
  const double n = double(m.n());
  const Vector fitted = kernel_in_sample_fit(m);
  const Vector proj = m.left_vectors.transpose() * f_true;
  KernelInSampleError out;
  out.error = (fitted - f_true).squaredNorm() / n;
  out.canonical_part = (m.theta_hat - proj / std::sqrt(n)).squaredNorm();
  out.residual_part = (f_true - m.left_vectors * proj).squaredNorm() / n;
  return out;
}

/// ||V^T f / ||f||_2||_q^q over the retained spectrum of K.
inline double kernel_effective_dimension(const Matrix& k, const Vector& f_values, double q,
                                         double rank_rel_tol = kDefaultKernelRankTolerance) {
  detail::require_dims(f_values.size() == k.rows(), "f must have one entry per point");
  detail::require_domain(q >= 0.0 && q <= 2.0, "q must lie in [0, 2]");
  const double norm = f_values.norm();
  if (!(norm > 0.0)) throw DomainError("kernel effective dimension needs f != 0");
  const auto eig = kernel_canonicalize(k, rank_rel_tol);
  return detail::lq_power(eig.left_vectors.transpose() * f_values / norm, q, kL0Floor);
}

}  // namespace canthresh
