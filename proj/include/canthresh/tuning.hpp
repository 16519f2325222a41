#pragma once

// K-fold cross-validation of the threshold level along the exact solution path.
//
// For a fixed split, every fold's GCT estimate changes only at the breakpoints
// lambda_j^{phi/2} |theta_LS_j| of that fold. Between consecutive merged breakpoints
// the averaged validation error is constant (hard rule) or a quadratic in tau (soft
// rule), so the minimum over all tau >= 0 is found by visiting each segment once.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "canthresh/estimators.hpp"

namespace canthresh {

enum class FoldMode { SeededRandom, Contiguous };

struct CvSegment {
  double lo = 0.0;
  double hi = 0.0;  // +infinity for the trailing zero-estimator segment
  double tau = 0.0;
  double error = 0.0;
};

struct CvResult {
  double tau_cv = 0.0;
  double cv_error_at_tau = 0.0;
  std::vector<std::vector<double>> fold_breakpoints;
  std::vector<double> candidate_set;
  std::vector<int> fold_assignment;
  std::vector<CvSegment> path_segments;  // soft rule only
};

/// Fold id in [0, L) for each of the n observations.
///
/// Seeded mode shuffles 0..n-1 with a mt19937_64 seeded by `seed`, then both modes
/// cut the order into L contiguous chunks; the first n mod L chunks get one extra row.
inline std::vector<int> make_folds(Index n, int folds, std::uint64_t seed,
                                   FoldMode mode = FoldMode::SeededRandom) {
  if (folds < 2) throw DomainError("cross-validation needs at least 2 folds");
  if (folds > n) throw DomainError("more folds than observations");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  if (mode == FoldMode::SeededRandom) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n));
  const Index base = n / folds;
  const Index extra = n % folds;
  Index pos = 0;
  for (int l = 0; l < folds; ++l) {
    const Index size = base + (l < extra ? 1 : 0);
    for (Index k = 0; k < size; ++k) assignment[static_cast<std::size_t>(order[pos++])] = l;
  }
  return assignment;
}

namespace detail {

struct FoldSplit {
  std::vector<Index> train;
  std::vector<Index> validation;
};

inline std::vector<FoldSplit> split_folds(const std::vector<int>& assignment, int folds) {
  std::vector<FoldSplit> out(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const int f = assignment[i];
    if (f < 0 || f >= folds) throw DomainError("fold id out of range");
    for (int l = 0; l < folds; ++l) {
      if (l == f)
        out[l].validation.push_back(static_cast<Index>(i));
      else
        out[l].train.push_back(static_cast<Index>(i));
    }
  }
  for (const auto& s : out)
    if (s.validation.empty() || s.train.empty()) throw DomainError("empty fold");
  return out;
}

// Everything about one fold that the path computations need. Validation
// predictions of any canonical estimate theta_hat are scores * theta_hat.
struct FoldCache {
  Vector eigenvalues;
  Vector theta_ls;
  Matrix scores;  // X_val U diag(s)^{-1}
  Vector y_val;
};

inline std::vector<FoldCache> build_fold_caches(const Dataset& data,
                                                const std::vector<int>& assignment, int folds,
                                                double rank_rel_tol) {
  detail::require_dims(static_cast<Index>(assignment.size()) == data.n(),
                       "fold assignment length must equal n");
  std::vector<FoldCache> caches;
  for (const auto& split : split_folds(assignment, folds)) {
    const Dataset train = data.rows(split.train);
    const Dataset val = data.rows(split.validation);
    const auto dec = canonicalize(train, rank_rel_tol);
    FoldCache c;
    c.eigenvalues = dec.eigenvalues;
    c.theta_ls = canonical_ls(dec, train.response).values;
    c.scores = val.design * dec.right_vectors * dec.singular_values().cwiseInverse().asDiagonal();
    c.y_val = val.response;
    caches.push_back(std::move(c));
  }
  return caches;
}

inline double cache_error(const std::vector<FoldCache>& caches,
                          const std::vector<Vector>& theta_hats) {
  double total = 0.0;
  for (std::size_t l = 0; l < caches.size(); ++l) {
    const auto& c = caches[l];
    total += (c.y_val - c.scores * theta_hats[l]).squaredNorm() / double(c.y_val.size());
  }
  return total / double(caches.size());
}

inline double cache_error_gct(const std::vector<FoldCache>& caches, const GctConfig& config) {
  std::vector<Vector> th;
  th.reserve(caches.size());
  for (const auto& c : caches) th.push_back(gct_shrink(c.eigenvalues, c.theta_ls, config));
  return cache_error(caches, th);
}

inline std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Picks the largest tau among candidates whose error is within `tol` of the minimum.
inline std::pair<double, double> pick_largest_minimizer(
    const std::vector<std::pair<double, double>>& tau_err, double tol) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [t, e] : tau_err) best = std::min(best, e);
  std::pair<double, double> pick{-1.0, best};
  for (const auto& [t, e] : tau_err)
    if (e <= best + tol && t > pick.first) pick = {t, e};
  return pick;
}

}  // namespace detail

/// Sorted distinct values of {0} U {lambda_j^{phi/2} |theta_LS_j|}.
inline std::vector<double> breakpoints(const Vector& eigenvalues, const Vector& theta_ls,
                                       double phi) {
  detail::require_dims(eigenvalues.size() == theta_ls.size(),
                       "eigenvalues and theta_ls lengths differ");
  const Vector w = gct_weights(eigenvalues, phi);
  std::vector<double> v{0.0};
  for (Index j = 0; j < theta_ls.size(); ++j) v.push_back(std::abs(w(j) * theta_ls(j)));
  return detail::sorted_unique(std::move(v));
}

inline std::vector<double> breakpoints(const CanonicalDecomposition& dec,
                                       const CanonicalCoefficients& theta_ls, double phi) {
  return breakpoints(dec.eigenvalues, theta_ls.values, phi);
}

/// Averaged validation error for a fixed configuration, refitting every fold from scratch.
inline double cv_error(const Dataset& data, const std::vector<int>& assignment, int folds,
                       const GctConfig& config, double rank_rel_tol = kDefaultRankTolerance) {
  detail::require_dims(static_cast<Index>(assignment.size()) == data.n(),
                       "fold assignment length must equal n");
  double total = 0.0;
  for (const auto& split : detail::split_folds(assignment, folds)) {
    const Dataset train = data.rows(split.train);
    const Dataset val = data.rows(split.validation);
    const FitResult fit = fit_gct(train, config, rank_rel_tol);
    total += (val.response - predict(fit, val.design)).squaredNorm() / double(val.n());
  }
  return total / double(folds);
}

namespace detail {

inline void soft_path(const std::vector<FoldCache>& caches, double phi,
                      const std::vector<double>& merged, double tie_tol, CvResult& out) {
  const std::size_t folds = caches.size();
  struct State {
    Vector weights, absz, signs;
    std::vector<Index> order;  // components by increasing |z|
    std::size_t next = 0;
    Vector c, q;  // residual at tau = 0 of the active set, and its tau-slope
    double cc = 0.0, cq = 0.0, qq = 0.0;
  };
  std::vector<State> st(folds);
  for (std::size_t l = 0; l < folds; ++l) {
    const auto& fc = caches[l];
    auto& s = st[l];
    const Index r = fc.theta_ls.size();
    s.weights = gct_weights(fc.eigenvalues, phi);
    const Vector z = s.weights.cwiseProduct(fc.theta_ls);
    s.absz = z.cwiseAbs();
    s.signs = z.unaryExpr([](double v) { return double((v > 0.0) - (v < 0.0)); });
    s.order.resize(static_cast<std::size_t>(r));
    std::iota(s.order.begin(), s.order.end(), Index{0});
    std::sort(s.order.begin(), s.order.end(),
              [&](Index a, Index b) { return s.absz(a) < s.absz(b); });
    s.c = fc.y_val;
    s.q = Vector::Zero(fc.y_val.size());
    for (Index j = 0; j < r; ++j) {
      if (s.absz(j) == 0.0) continue;
      s.c -= fc.scores.col(j) * fc.theta_ls(j);
      s.q += fc.scores.col(j) * (s.signs(j) / s.weights(j));
    }
    // components with z = 0 never contribute
    while (s.next < s.order.size() && s.absz(s.order[s.next]) == 0.0) ++s.next;
    s.cc = s.c.squaredNorm();
    s.cq = s.c.dot(s.q);
    s.qq = s.q.squaredNorm();
  }

  std::vector<std::pair<double, double>> candidates;
  for (std::size_t k = 1; k < merged.size(); ++k) {
    const double lo = merged[k - 1];
    const double hi = merged[k];
    double a = 0.0, b = 0.0, c0 = 0.0;
    for (std::size_t l = 0; l < folds; ++l) {
      auto& s = st[l];
      const auto& fc = caches[l];
      bool changed = false;
      while (s.next < s.order.size() && s.absz(s.order[s.next]) < hi) {
        const Index j = s.order[s.next++];
        s.c += fc.scores.col(j) * fc.theta_ls(j);
        s.q -= fc.scores.col(j) * (s.signs(j) / s.weights(j));
        changed = true;
      }
      if (changed) {
        s.cc = s.c.squaredNorm();
        s.cq = s.c.dot(s.q);
        s.qq = s.q.squaredNorm();
      }
      const double inv = 1.0 / (double(fc.y_val.size()) * double(folds));
      a += s.qq * inv;
      b += 2.0 * s.cq * inv;
      c0 += s.cc * inv;
    }
    double t = hi;
    if (a > 0.0) t = std::clamp(-b / (2.0 * a), lo, hi);
    double e = (a * t + b) * t + c0;
    // the quadratic's vertex can only beat the right end by rounding when a ~ 0
    const double e_hi = (a * hi + b) * hi + c0;
    if (e_hi <= e) {
      t = hi;
      e = e_hi;
    }
    out.path_segments.push_back({lo, hi, t, e});
    candidates.emplace_back(t, e);
  }

  // beyond the largest breakpoint every fold predicts zero
  double zero_err = 0.0;
  for (const auto& fc : caches) zero_err += fc.y_val.squaredNorm() / double(fc.y_val.size());
  zero_err /= double(folds);
  const double top = merged.back();
  out.path_segments.push_back({top, std::numeric_limits<double>::infinity(), top, zero_err});
  candidates.emplace_back(top, zero_err);

  for (const auto& [t, e] : candidates) out.candidate_set.push_back(t);
  out.tau_cv = pick_largest_minimizer(candidates, tie_tol).first;
}

inline void finite_path(const std::vector<FoldCache>& caches, const ThresholdRule& rule,
                        double phi, const std::vector<double>& merged, double tie_tol,
                        CvResult& out) {
  std::vector<double> cands = merged;
  const double top = merged.back();
  if (rule.kind() == RuleKind::Hard) {
    // the hard rule keeps |z| = tau, so the zero fit starts just above the top breakpoint
    if (top > 0.0) cands.push_back(std::nextafter(top, std::numeric_limits<double>::infinity()));
  } else {
    for (std::size_t k = 1; k < merged.size(); ++k)
      cands.push_back(0.5 * (merged[k - 1] + merged[k]));
    cands.push_back(2.0 * top + 1.0);
    cands = sorted_unique(std::move(cands));
  }
  std::vector<std::pair<double, double>> tau_err;
  for (double t : cands) tau_err.emplace_back(t, cache_error_gct(caches, GctConfig{t, phi, rule}));
  out.candidate_set = cands;
  out.tau_cv = pick_largest_minimizer(tau_err, tie_tol).first;
}

}  // namespace detail

/// Exact minimizer over tau >= 0 of the L-fold CV error of the GCT estimator.
///
/// Soft rule: the averaged error is minimized in closed form on every segment between
/// merged breakpoints. Hard rule: one evaluation per segment. Custom rules: evaluation
/// at breakpoints and segment midpoints. Ties resolve to the largest tau. The reported
/// error is recomputed by refitting every fold at tau_cv.
inline CvResult kfold_cv(const Dataset& data, int folds, double phi, const ThresholdRule& rule,
                         std::uint64_t seed, FoldMode mode = FoldMode::SeededRandom,
                         double rank_rel_tol = kDefaultRankTolerance) {
  detail::require_domain(std::isfinite(phi) && phi >= 0.0, "phi must be finite and >= 0");
  CvResult out;
  out.fold_assignment = make_folds(data.n(), folds, seed, mode);
  const auto caches = detail::build_fold_caches(data, out.fold_assignment, folds, rank_rel_tol);

  std::vector<double> all;
  for (const auto& c : caches) {
    out.fold_breakpoints.push_back(breakpoints(c.eigenvalues, c.theta_ls, phi));
    all.insert(all.end(), out.fold_breakpoints.back().begin(), out.fold_breakpoints.back().end());
  }
  const auto merged = detail::sorted_unique(std::move(all));

  double scale = 0.0;
  for (const auto& c : caches) scale += c.y_val.squaredNorm() / double(c.y_val.size());
  const double tie_tol = 1e-12 * scale / double(folds);

  if (rule.kind() == RuleKind::Soft)
    detail::soft_path(caches, phi, merged, tie_tol, out);
  else
    detail::finite_path(caches, rule, phi, merged, tie_tol, out);

  out.cv_error_at_tau =
      cv_error(data, out.fold_assignment, folds, GctConfig{out.tau_cv, phi, rule}, rank_rel_tol);
  return out;
}

struct GridCvResult {
  double tau = 0.0;
  double error = 0.0;
};

/// Brute-force CV over an explicit tau grid, with the same folds as kfold_cv.
/// Each fold is decomposed once; every grid value is fitted, lifted to beta and predicted.
inline GridCvResult grid_cv_oracle(const Dataset& data, int folds, double phi,
                                   const ThresholdRule& rule, const std::vector<double>& grid,
                                   std::uint64_t seed, FoldMode mode = FoldMode::SeededRandom,
                                   double rank_rel_tol = kDefaultRankTolerance) {
  if (grid.empty()) throw DomainError("tau grid is empty");
  const auto assignment = make_folds(data.n(), folds, seed, mode);
  struct Prepared {
    CanonicalProblem problem;
    Dataset val;
  };
  std::vector<Prepared> prepared;
  for (const auto& split : detail::split_folds(assignment, folds)) {
    const Dataset train = data.rows(split.train);
    prepared.push_back({CanonicalProblem::from(train, rank_rel_tol), data.rows(split.validation)});
  }
  std::vector<std::pair<double, double>> tau_err;
  for (double tau : grid) {
    double total = 0.0;
    for (const auto& p : prepared) {
      const FitResult fit = fit_gct(p.problem, GctConfig{tau, phi, rule});
      total += (p.val.response - p.val.design * fit.beta).squaredNorm() / double(p.val.n());
    }
    tau_err.emplace_back(tau, total / double(folds));
  }
  // exact ties only: the oracle must not blur its own minimum
  const auto pick = detail::pick_largest_minimizer(tau_err, 0.0);
  return {pick.first, pick.second};
}

/// Runs kfold_cv for each phi; the smallest CV error wins, ties to the smaller phi.
struct PhiCvResult {
  double phi = 0.0;
  CvResult cv;
};

inline PhiCvResult kfold_cv_phi_grid(const Dataset& data, int folds,
                                     const std::vector<double>& phi_grid,
                                     const ThresholdRule& rule, std::uint64_t seed,
                                     FoldMode mode = FoldMode::SeededRandom,
                                     double rank_rel_tol = kDefaultRankTolerance) {
  if (phi_grid.empty()) throw DomainError("phi grid is empty");
  std::vector<double> phis = phi_grid;
  std::sort(phis.begin(), phis.end());
  std::optional<PhiCvResult> best;
  for (double phi : phis) {
    CvResult cv = kfold_cv(data, folds, phi, rule, seed, mode, rank_rel_tol);
    if (!best || cv.cv_error_at_tau < best->cv.cv_error_at_tau)
      best = PhiCvResult{phi, std::move(cv)};
  }
  return *best;
}

struct PcrCvResult {
  Index components = 0;
  double error = 0.0;
};

/// L-fold CV over the number of leading components m = 0..max fold rank.
/// Ties go to the smaller m.
inline PcrCvResult kfold_cv_pcr(const Dataset& data, int folds, std::uint64_t seed,
                                FoldMode mode = FoldMode::SeededRandom,
                                double rank_rel_tol = kDefaultRankTolerance) {
  const auto assignment = make_folds(data.n(), folds, seed, mode);
  const auto caches = detail::build_fold_caches(data, assignment, folds, rank_rel_tol);
  Index max_rank = 0;
  for (const auto& c : caches) max_rank = std::max(max_rank, c.theta_ls.size());
  std::vector<Vector> resid;
  for (const auto& c : caches) resid.push_back(c.y_val);

  double e0 = 0.0;
  for (const auto& c : caches) e0 += c.y_val.squaredNorm() / double(c.y_val.size());
  PcrCvResult best{0, e0 / double(folds)};
  for (Index m = 1; m <= max_rank; ++m) {
    double total = 0.0;
    for (std::size_t l = 0; l < caches.size(); ++l) {
      const auto& c = caches[l];
      if (m <= c.theta_ls.size()) resid[l] -= c.scores.col(m - 1) * c.theta_ls(m - 1);
      total += resid[l].squaredNorm() / double(c.y_val.size());
    }
    total /= double(folds);
    if (total < best.error) best = {m, total};
  }
  return best;
}

// 100 log-spaced penalties from 1e2 * lambda1 down to 1e-6 * lambda1.
inline std::vector<double> default_ridge_grid(double lambda1, int count = 100) {
  detail::require_domain(lambda1 > 0.0 && count >= 2, "ridge grid needs lambda1 > 0");
  std::vector<double> grid;
  for (int i = 0; i < count; ++i) {
    const double e = 2.0 - 8.0 * double(i) / double(count - 1);
    grid.push_back(lambda1 * std::pow(10.0, e));
  }
  return grid;
}

struct RidgeCvResult {
  double lambda = 0.0;
  double error = 0.0;
};

/// L-fold CV of the ridge penalty over `grid`; ties go to the larger penalty.
inline RidgeCvResult kfold_cv_ridge(const Dataset& data, int folds, const std::vector<double>& grid,
                                    std::uint64_t seed, FoldMode mode = FoldMode::SeededRandom,
                                    double rank_rel_tol = kDefaultRankTolerance) {
  if (grid.empty()) throw DomainError("ridge grid is empty");
  const auto assignment = make_folds(data.n(), folds, seed, mode);
  const auto caches = detail::build_fold_caches(data, assignment, folds, rank_rel_tol);
  std::vector<std::pair<double, double>> lam_err;
  for (double lam : grid) {
    std::vector<Vector> th;
    for (const auto& c : caches) th.push_back(ridge_shrink(c.eigenvalues, c.theta_ls, lam));
    lam_err.emplace_back(lam, detail::cache_error(caches, th));
  }
  const auto pick = detail::pick_largest_minimizer(lam_err, 0.0);
  return {pick.first, pick.second};
}

}  // namespace canthresh
