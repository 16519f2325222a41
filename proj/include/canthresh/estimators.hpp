#pragma once

// Canonical thresholding estimators (NCT, GCT), PCR, minimum-norm least squares and
// the ridge baseline. All of them act on theta_LS in canonical coordinates and
// lift the result back with beta = U diag(s)^{-1} theta_hat.

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "canthresh/canonical.hpp"
#include "canthresh/metrics.hpp"
#include "canthresh/thresholding.hpp"

namespace canthresh {

inline constexpr double kInfiniteTau = std::numeric_limits<double>::infinity();

struct GctConfig {
  double tau = 0.0;  // may be +infinity (trivial zero fit)
  double phi = 0.0;
  ThresholdRule rule = ThresholdRule::soft_rule();

  void validate() const {
    detail::require_domain(!std::isnan(tau) && tau >= 0.0, "tau must be >= 0");
    detail::require_domain(std::isfinite(phi) && phi >= 0.0, "phi must be finite and >= 0");
  }
};

enum class MethodKind { Gct, Pcr, Ridge, MinNormLs };

struct FitMethod {
  MethodKind kind = MethodKind::Gct;
  GctConfig gct;          // Gct
  Index components = 0;   // Pcr
  double ridge_lambda = 0.0;

  std::string label() const {
    std::ostringstream os;
    switch (kind) {
      case MethodKind::Gct:
        os << (gct.phi == 0.0 && gct.rule.kind() == RuleKind::Soft ? "nct" : "gct");
        break;
      case MethodKind::Pcr: os << "pcr:" << components; break;
      case MethodKind::Ridge: os << "ridge:" << ridge_lambda; break;
      case MethodKind::MinNormLs: os << "ols"; break;
    }
    return os.str();
  }
};

struct FitResult {
  Vector beta;
  Vector theta_hat;
  FitMethod method;
  std::shared_ptr<const CanonicalDecomposition> decomposition;
  std::optional<CenteringOffsets> offsets;
};

// A decomposition together with the canonical least-squares coefficients.
struct CanonicalProblem {
  std::shared_ptr<const CanonicalDecomposition> decomposition;
  CanonicalCoefficients theta_ls;

  static CanonicalProblem from(const Dataset& data, double rank_rel_tol = kDefaultRankTolerance) {
    CanonicalProblem p;
    auto dec = std::make_shared<CanonicalDecomposition>(canonicalize(data, rank_rel_tol));
    p.theta_ls = canonical_ls(*dec, data.response);
    p.decomposition = std::move(dec);
    return p;
  }
};

// Weights lambda_j^{phi/2}: the diagonal of Lambda^phi when Lambda holds singular values.
inline Vector gct_weights(const Vector& eigenvalues, double phi) {
  if (phi == 0.0) return Vector::Ones(eigenvalues.size());
  return eigenvalues.array().pow(phi / 2.0).matrix();
}

/// theta_hat = Lambda^{-phi} T_tau[Lambda^{phi} theta_ls].
inline Vector gct_shrink(const Vector& eigenvalues, const Vector& theta_ls,
                         const GctConfig& config) {
  config.validate();
  detail::require_dims(eigenvalues.size() == theta_ls.size(),
                       "eigenvalues and theta_ls lengths differ");
  if (std::isinf(config.tau)) return Vector::Zero(theta_ls.size());
  const Vector w = gct_weights(eigenvalues, config.phi);
  Vector out(theta_ls.size());
  for (Index j = 0; j < theta_ls.size(); ++j) {
    const double z = w(j) * theta_ls(j);
    const double t = config.rule(z, config.tau);
    if (config.rule.kind() == RuleKind::Custom &&
        std::abs(t - z) > config.tau * (1.0 + 1e-12) + 1e-300)
      throw DomainError("custom threshold rule moves a value by more than tau");
    out(j) = t / w(j);
  }
  return out;
}

// ZERO_m: keep the leading m coefficients.
inline Vector pcr_shrink(const Vector& theta_ls, Index m) {
  detail::require_domain(m >= 0 && m <= theta_ls.size(),
                         "PCR component count must lie in [0, r]");
  Vector out = Vector::Zero(theta_ls.size());
  out.head(m) = theta_ls.head(m);
  return out;
}

// lambda_j theta_j / (lambda_j + lambda_reg)
inline Vector ridge_shrink(const Vector& eigenvalues, const Vector& theta_ls, double lambda_reg) {
  detail::require_domain(lambda_reg >= 0.0, "ridge penalty must be >= 0");
  return (eigenvalues.array() * theta_ls.array() / (eigenvalues.array() + lambda_reg)).matrix();
}

namespace detail {

inline FitResult make_fit(const CanonicalProblem& p, Vector theta_hat, FitMethod method) {
  FitResult fit;
  fit.beta = to_beta(*p.decomposition, CanonicalCoefficients(theta_hat));
  fit.theta_hat = std::move(theta_hat);
  fit.method = std::move(method);
  fit.decomposition = p.decomposition;
  return fit;
}

}  // namespace detail

inline FitResult fit_gct(const CanonicalProblem& p, const GctConfig& config) {
  FitMethod m;
  m.kind = MethodKind::Gct;
  m.gct = config;
  return detail::make_fit(p, gct_shrink(p.decomposition->eigenvalues, p.theta_ls.values, config), m);
}

inline FitResult fit_gct(const Dataset& data, const GctConfig& config,
                         double rank_rel_tol = kDefaultRankTolerance) {
  config.validate();
  return fit_gct(CanonicalProblem::from(data, rank_rel_tol), config);
}

// Soft thresholding of theta_LS at level tau.
inline FitResult fit_nct(const Dataset& data, double tau,
                         double rank_rel_tol = kDefaultRankTolerance) {
  return fit_gct(data, GctConfig{tau, 0.0, ThresholdRule::soft_rule()}, rank_rel_tol);
}

inline FitResult fit_pcr(const CanonicalProblem& p, Index m) {
  FitMethod method;
  method.kind = MethodKind::Pcr;
  method.components = m;
  return detail::make_fit(p, pcr_shrink(p.theta_ls.values, m), method);
}

inline FitResult fit_pcr(const Dataset& data, Index m,
                         double rank_rel_tol = kDefaultRankTolerance) {
  return fit_pcr(CanonicalProblem::from(data, rank_rel_tol), m);
}

inline FitResult fit_min_norm_ls(const Dataset& data,
                                 double rank_rel_tol = kDefaultRankTolerance) {
  auto p = CanonicalProblem::from(data, rank_rel_tol);
  FitMethod method;
  method.kind = MethodKind::MinNormLs;
  return detail::make_fit(p, p.theta_ls.values, method);
}

inline FitResult fit_ridge(const CanonicalProblem& p, double lambda_reg) {
  FitMethod method;
  method.kind = MethodKind::Ridge;
  method.ridge_lambda = lambda_reg;
  return detail::make_fit(
      p, ridge_shrink(p.decomposition->eigenvalues, p.theta_ls.values, lambda_reg), method);
}

inline FitResult fit_ridge(const Dataset& data, double lambda_reg,
                           double rank_rel_tol = kDefaultRankTolerance) {
  return fit_ridge(CanonicalProblem::from(data, rank_rel_tol), lambda_reg);
}

/// X_new beta, or ybar + (x - xbar)^T beta when the fit carries centering offsets.
inline Vector predict(const FitResult& fit, const Matrix& x_new) {
  detail::require_dims(x_new.cols() == fit.beta.size(),
                       "prediction matrix has " + std::to_string(x_new.cols()) +
                           " columns, model expects " + std::to_string(fit.beta.size()));
  if (!fit.offsets) return x_new * fit.beta;
  const auto& off = *fit.offsets;
  return ((x_new.rowwise() - off.column_means.transpose()) * fit.beta).array() +
         off.response_mean;
}

// lambda_1^{phi/2} * sigma * rho(n, r, delta, alpha); phi = 0 gives sigma * rho.
inline double default_tau(double sigma, long n, long r, double delta, double alpha, double phi,
                          double lambda1) {
  detail::require_domain(sigma >= 0.0, "sigma must be >= 0");
  detail::require_domain(phi >= 0.0, "phi must be >= 0");
  detail::require_domain(lambda1 > 0.0, "lambda1 must be > 0");
  return std::pow(lambda1, phi / 2.0) * sigma * rho(n, r, delta, alpha);
}

}  // namespace canthresh
