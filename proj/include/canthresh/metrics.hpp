#pragma once

// Error measures and the complexity quantities used by the risk bounds.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "canthresh/canonical.hpp"

namespace canthresh {

// Entries at or below this fraction of the l2 norm count as zero in effective dimensions.
inline constexpr double kL0Floor = 1e-12;

struct MetricsReport {
  std::optional<double> mse;
  std::optional<double> pe;
  std::optional<double> relative_mse;
  std::optional<double> relative_pe;
  std::optional<double> snr;
  std::optional<double> effective_rank;
  std::optional<double> rho;
};

// (beta_hat - beta)^T Sigma_hat (beta_hat - beta), evaluated in canonical coordinates.
inline double mse_fixed(const Vector& beta_hat, const Vector& beta,
                        const CanonicalDecomposition& dec) {
  detail::require_dims(beta_hat.size() == beta.size() && beta.size() == dec.d(),
                       "mse_fixed expects two d-vectors matching the decomposition");
  return to_theta(dec, beta_hat - beta).values.squaredNorm();
}

inline double pe_random(const Vector& beta_hat, const Vector& beta, const Matrix& sigma) {
  detail::require_dims(beta_hat.size() == beta.size() && sigma.rows() == beta.size() &&
                           sigma.cols() == beta.size(),
                       "pe_random expects d-vectors and a d x d covariance");
  const Vector diff = beta_hat - beta;
  const double q = diff.dot(sigma * diff);
  const double scale = diff.squaredNorm() * sigma.cwiseAbs().maxCoeff();
  if (q < -1e-12 * std::max(scale, 1e-300))
    throw DomainError("covariance is not positive semidefinite (negative quadratic form)");
  return std::max(q, 0.0);
}

inline double relative_error(double absolute, double trivial) {
  if (!(trivial > 0.0)) throw DomainError("undefined relative error: trivial error is zero");
  return absolute / trivial;
}

inline double snr(const Vector& beta, const Matrix& covariance, double sigma) {
  detail::require_domain(sigma > 0.0, "snr needs sigma > 0");
  detail::require_dims(covariance.rows() == beta.size() && covariance.cols() == beta.size(),
                       "snr covariance must be d x d");
  return std::sqrt(std::max(beta.dot(covariance * beta), 0.0)) / sigma;
}

/// Tr[Sigma] / ||Sigma|| for a vector of eigenvalues.
inline double effective_rank(const Vector& eigenvalues) {
  if (eigenvalues.size() == 0 || !(eigenvalues.maxCoeff() > 0.0))
    throw DomainError("effective rank of a zero matrix is undefined");
  return eigenvalues.sum() / eigenvalues.maxCoeff();
}

inline double effective_rank(const Matrix& sigma) {
  detail::require_dims(sigma.rows() == sigma.cols(), "effective_rank needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma, Eigen::EigenvaluesOnly);
  const Vector ev = es.eigenvalues().cwiseMax(0.0);
  if (!(ev.maxCoeff() > 0.0)) throw DomainError("effective rank of a zero matrix is undefined");
  return sigma.trace() / ev.maxCoeff();
}

namespace detail {

// ||v||_q^q with entries at or below `floor` treated as zero for every q,
// so the q = 0 count and the q > 0 sums agree on which entries exist.
inline double lq_power(const Vector& v, double q, double floor) {
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v(i));
    if (a > floor) s += q == 0.0 ? 1.0 : std::pow(a, q);
  }
  return s;
}

}  // namespace detail

/// ||theta_{<=k}||_q^q / ||theta||_2^q.
///
/// `theta_scaled` holds the leading k scaled coefficients Lambda_{<=k} U_{<=k}^T beta
/// and `theta_full_norm` the l2 norm of the complete vector.
inline double joint_effective_dimension(const Vector& theta_scaled, double theta_full_norm,
                                        double q) {
  detail::require_domain(q >= 0.0 && q <= 2.0, "q must lie in [0, 2]");
  if (!(theta_full_norm > 0.0)) throw DomainError("joint effective dimension needs a nonzero signal");
  return detail::lq_power(theta_scaled, q, kL0Floor * theta_full_norm) / std::pow(theta_full_norm, q);
}

// Same quantity from the full canonical vector and a cutoff k.
inline double joint_effective_dimension_at(const Vector& theta, Index k, double q) {
  detail::require_domain(k >= 0 && k <= theta.size(), "k must lie in [0, r]");
  return joint_effective_dimension(Vector(theta.head(k)), theta.norm(), q);
}

// (2 / sqrt(n)) (log(2r / delta))^{1/alpha}
inline double rho(long n, long r, double delta, double alpha) {
  detail::require_domain(n >= 1 && r >= 1, "rho needs n >= 1 and r >= 1");
  detail::require_domain(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  detail::require_domain(alpha > 0.0 && alpha <= 2.0, "alpha must lie in (0, 2]");
  return 2.0 / std::sqrt(double(n)) * std::pow(std::log(2.0 * double(r) / delta), 1.0 / alpha);
}

// psi_2 Orlicz norm of N(0, sd^2): sd * sqrt(8/3). This is the sigma the bounds expect.
inline double gaussian_orlicz_norm(double sd) { return sd * std::sqrt(8.0 / 3.0); }

inline std::vector<double> default_q_grid(double step = 0.01) {
  std::vector<double> grid;
  const int steps = static_cast<int>(std::lround(2.0 / step));
  for (int i = 0; i <= steps; ++i) grid.push_back(std::min(2.0, i * step));
  return grid;
}

struct Theorem1Bound {
  double sandwich_core = 0.0;  // sum_j min(level, |theta_j|)^2
  double lq_bound = 0.0;       // inf_q ||theta||_q^q level^{2-q}
  double argmin_q = 0.0;
};

/// Both sides of the fixed-design NCT risk bound at threshold `level` (= sigma * rho).
/// The infimum runs over `q_grid` plus q = 0; in the l0 term any nonzero entry counts.
inline Theorem1Bound theorem1_bound(const Vector& theta, double level,
                                    const std::vector<double>& q_grid = default_q_grid()) {
  detail::require_domain(level > 0.0, "theorem1_bound needs level > 0");
  Theorem1Bound out;
  for (Index j = 0; j < theta.size(); ++j) {
    const double m = std::min(level, std::abs(theta(j)));
    out.sandwich_core += m * m;
  }
  out.lq_bound = detail::lq_power(theta, 0.0, 0.0) * level * level;
  out.argmin_q = 0.0;
  for (double q : q_grid) {
    detail::require_domain(q >= 0.0 && q <= 2.0, "q grid must lie in [0, 2]");
    if (q == 0.0) continue;
    const double v = detail::lq_power(theta, q, 0.0) * std::pow(level, 2.0 - q);
    if (v < out.lq_bound) {
      out.lq_bound = v;
      out.argmin_q = q;
    }
  }
  return out;
}

/// sum_j min((lambda_1 / lambda_j)^{phi/2} level, |theta_j|)^2
inline double theorem4_bound(const Vector& theta, const Vector& eigenvalues, double level,
                             double phi) {
  detail::require_dims(theta.size() == eigenvalues.size(), "theta and eigenvalues lengths differ");
  detail::require_domain(level > 0.0 && phi >= 0.0, "theorem4_bound needs level > 0, phi >= 0");
  if (theta.size() == 0) return 0.0;
  double sum = 0.0;
  for (Index j = 0; j < theta.size(); ++j) {
    detail::require_domain(eigenvalues(j) > 0.0, "eigenvalues must be positive");
    const double w = std::pow(eigenvalues(0) / eigenvalues(j), phi / 2.0) * level;
    const double m = std::min(w, std::abs(theta(j)));
    sum += m * m;
  }
  return sum;
}

}  // namespace canthresh
