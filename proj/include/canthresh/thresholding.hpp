#pragma once

// Generalized thresholding rules T_tau. A rule is admissible when, for some c,
//   (i)  |T_tau[z]| <= c |z'|   whenever |z - z'| <= tau / 2,
//   (ii) |T_tau[z] - z| <= tau  for every z.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "canthresh/canonical.hpp"

namespace canthresh {

namespace detail {
inline void check_threshold_args(double z, double tau) {
  if (std::isnan(tau) || tau < 0.0) throw DomainError("threshold level must be >= 0");
  if (!std::isfinite(z)) throw DomainError("thresholded value must be finite");
}
}  // namespace detail

// sign(z) * max(|z| - tau, 0); soft(0, tau) = 0.
inline double soft(double z, double tau) {
  detail::check_threshold_args(z, tau);
  const double a = std::abs(z) - tau;
  if (a <= 0.0) return 0.0;
  return z > 0.0 ? a : -a;
}

// z * 1{|z| >= tau}; the boundary |z| = tau is kept.
inline double hard(double z, double tau) {
  detail::check_threshold_args(z, tau);
  return std::abs(z) >= tau ? z : 0.0;
}

enum class RuleKind { Soft, Hard, Custom };

class ThresholdRule {
 public:
  using Function = std::function<double(double, double)>;

  static ThresholdRule soft_rule() { return ThresholdRule(RuleKind::Soft, {}, 3.0); }
  static ThresholdRule hard_rule() { return ThresholdRule(RuleKind::Hard, {}, 3.0); }
  // `constant` is the c of condition (i); the caller must know it for its rule.
  static ThresholdRule custom(Function fn, double constant) {
    if (!fn) throw DomainError("custom threshold rule needs a function");
    detail::require_domain(constant > 0.0 && std::isfinite(constant),
                           "custom rule constant must be positive");
    return ThresholdRule(RuleKind::Custom, std::move(fn), constant);
  }

  ThresholdRule() : ThresholdRule(RuleKind::Soft, {}, 3.0) {}

  RuleKind kind() const { return kind_; }
  double constant() const { return constant_; }

  double operator()(double z, double tau) const {
    switch (kind_) {
      case RuleKind::Soft: return soft(z, tau);
      case RuleKind::Hard: return hard(z, tau);
      case RuleKind::Custom:
        detail::check_threshold_args(z, tau);
        return fn_(z, tau);
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind_) {
      case RuleKind::Soft: return "soft";
      case RuleKind::Hard: return "hard";
      case RuleKind::Custom: return "custom";
    }
    return "custom";
  }

 private:
  ThresholdRule(RuleKind k, Function fn, double c) : kind_(k), fn_(std::move(fn)), constant_(c) {}

  RuleKind kind_;
  Function fn_;
  double constant_;
};

inline ThresholdRule rule_from_name(const std::string& name) {
  if (name == "soft") return ThresholdRule::soft_rule();
  if (name == "hard") return ThresholdRule::hard_rule();
  throw DomainError("unknown threshold rule '" + name + "' (expected soft or hard)");
}

inline Vector apply_rule(const ThresholdRule& rule, const Vector& v, double tau) {
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) out(i) = rule(v(i), tau);
  return out;
}

struct RuleCheck {
  bool valid = true;
  double worst_violation = 0.0;
};

/// Grid check of the two admissibility conditions.
///
/// Every (tau, z, z') triple drawn from the grids with |z - z'| <= tau/2 is tested
/// against condition (i), every (tau, z) pair against condition (ii). The worst
/// excess over either bound is reported; it is 0 for an admissible rule.
inline RuleCheck check_rule(const ThresholdRule& rule, const Vector& tau_samples,
                            const Vector& z_grid) {
  if (tau_samples.size() == 0 || z_grid.size() == 0)
    throw DomainError("check_rule needs nonempty grids");
  std::vector<double> zs(z_grid.data(), z_grid.data() + z_grid.size());
  std::sort(zs.begin(), zs.end());
  const double c = rule.constant();

  double worst = 0.0;
  for (Index t = 0; t < tau_samples.size(); ++t) {
    const double tau = tau_samples(t);
    for (std::size_t i = 0; i < zs.size(); ++i) {
      const double z = zs[i];
      const double tz = rule(z, tau);
      // rounding slack: soft(20, 0.1) - 20 is not exactly -0.1 in binary
      const double slack = 1e-12 * (1.0 + std::abs(z) + tau);
      worst = std::max(worst, std::abs(tz - z) - tau - slack);

      // smallest |z'| within the window around z
      auto lo = std::lower_bound(zs.begin(), zs.end(), z - tau / 2.0);
      auto hi = std::upper_bound(zs.begin(), zs.end(), z + tau / 2.0);
      double min_abs = std::abs(z);
      for (auto it = lo; it != hi; ++it) {
        if (std::abs(*it - z) <= tau / 2.0) min_abs = std::min(min_abs, std::abs(*it));
      }
      worst = std::max(worst, std::abs(tz) - c * min_abs - slack);
    }
  }
  return RuleCheck{worst <= 0.0, std::max(worst, 0.0)};
}

}  // namespace canthresh
