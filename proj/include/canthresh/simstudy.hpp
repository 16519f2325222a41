#pragma once

// Monte Carlo comparison of the estimators on Gaussian designs with diagonal
// covariance Sigma = diag(j^{-a}), reported as median relative errors per dimension.

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "canthresh/estimators.hpp"
#include "canthresh/io.hpp"
#include "canthresh/metrics.hpp"
#include "canthresh/tuning.hpp"

namespace canthresh::sim {

struct CoefPattern {
  enum class Kind { PolyDecay, SpikedHead, SpikedTailRandom, IsotropicGaussian };
  Kind kind = Kind::PolyDecay;
  double b = 1.0;                    // PolyDecay: beta_j = j^{-b}
  int count = 10;                    // SpikedHead, SpikedTailRandom
  double value = 1.0;                // SpikedHead, SpikedTailRandom
  int window = 25;                   // SpikedTailRandom: indices d-window .. d (1-based)
  std::optional<double> noise_var;   // SpikedTailRandom background variance, default 1/d

  static CoefPattern poly_decay(double b) {
    CoefPattern p;
    p.b = b;
    return p;
  }
  static CoefPattern spiked_head(int count, double value) {
    CoefPattern p;
    p.kind = Kind::SpikedHead;
    p.count = count;
    p.value = value;
    return p;
  }
  static CoefPattern spiked_tail_random(int count, int window, std::optional<double> noise_var) {
    CoefPattern p;
    p.kind = Kind::SpikedTailRandom;
    p.count = count;
    p.window = window;
    p.noise_var = noise_var;
    return p;
  }
  static CoefPattern isotropic_gaussian() {
    CoefPattern p;
    p.kind = Kind::IsotropicGaussian;
    return p;
  }
};

struct Method {
  enum class Kind { NctCv, GctCv, PcrCv, Ols, RidgeCv, Zero };
  Kind kind = Kind::Zero;
  double phi = 1.0;  // GctCv only

  std::string label() const {
    switch (kind) {
      case Kind::NctCv: return "NCT-CV";
      case Kind::GctCv: return "GCT-CV(" + io::format_double(phi) + ")";
      case Kind::PcrCv: return "PCR-CV";
      case Kind::Ols: return "OLS";
      case Kind::RidgeCv: return "Ridge-CV";
      case Kind::Zero: return "Zero";
    }
    return "Zero";
  }

  // "NCT-CV", "GCT-CV" (phi = 1), "GCT-CV(0.5)", "PCR-CV", "OLS", "Ridge-CV", "Zero"
  static Method parse(const std::string& s) {
    Method m;
    if (s == "NCT-CV") m.kind = Kind::NctCv;
    else if (s == "PCR-CV") m.kind = Kind::PcrCv;
    else if (s == "OLS") m.kind = Kind::Ols;
    else if (s == "Ridge-CV") m.kind = Kind::RidgeCv;
    else if (s == "Zero") m.kind = Kind::Zero;
    else if (s == "GCT-CV") m.kind = Kind::GctCv;
    else if (s.rfind("GCT-CV(", 0) == 0 && s.back() == ')') {
      m.kind = Kind::GctCv;
      const std::string inner = s.substr(7, s.size() - 8);
      if (!io::detail::parse_double(inner, m.phi) || !(m.phi >= 0.0))
        throw ParseError("bad phi in method '" + s + "'");
    } else {
      throw ParseError("unknown method '" + s + "'");
    }
    return m;
  }
};

struct ScenarioSpec {
  long n = 200;
  std::vector<long> d_grid{50, 100, 400};
  double eigen_decay_a = 2.0;
  CoefPattern coef_pattern = CoefPattern::poly_decay(2.0);
  double snr_target = 10.0;
  int replicates = 100;
  std::uint64_t base_seed = 0;
  std::vector<Method> methods;
  int folds = 10;

  void validate() const {
    detail::require_domain(n >= 2, "scenario n must be >= 2");
    detail::require_domain(!d_grid.empty(), "scenario d_grid is empty");
    for (long d : d_grid) detail::require_domain(d >= 1, "scenario dimensions must be >= 1");
    detail::require_domain(eigen_decay_a >= 0.0, "eigen_decay_a must be >= 0");
    detail::require_domain(snr_target > 0.0, "snr_target must be > 0");
    detail::require_domain(replicates >= 1, "replicates must be >= 1");
    detail::require_domain(folds >= 2 && folds <= n, "folds must lie in [2, n]");
    if (coef_pattern.kind == CoefPattern::Kind::PolyDecay)
      detail::require_domain(coef_pattern.b >= 0.0, "PolyDecay b must be >= 0");
    if (coef_pattern.kind == CoefPattern::Kind::SpikedHead ||
        coef_pattern.kind == CoefPattern::Kind::SpikedTailRandom)
      detail::require_domain(coef_pattern.count >= 0, "spike count must be >= 0");
  }
};

// ---- JSON mirror of ScenarioSpec -------------------------------------------------

inline nlohmann::json to_json(const CoefPattern& p) {
  using K = CoefPattern::Kind;
  switch (p.kind) {
    case K::PolyDecay: return {{"kind", "PolyDecay"}, {"b", p.b}};
    case K::SpikedHead: return {{"kind", "SpikedHead"}, {"count", p.count}, {"value", p.value}};
    case K::SpikedTailRandom: {
      nlohmann::json j{{"kind", "SpikedTailRandom"}, {"count", p.count}, {"value", p.value},
                       {"window", p.window}};
      j["noise_var"] = p.noise_var ? nlohmann::json(*p.noise_var) : nlohmann::json(nullptr);
      return j;
    }
    case K::IsotropicGaussian: return {{"kind", "IsotropicGaussian"}};
  }
  return {};
}

inline nlohmann::json to_json(const ScenarioSpec& s) {
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : s.methods) methods.push_back(m.label());
  return {{"n", s.n},
          {"d_grid", s.d_grid},
          {"eigen_decay_a", s.eigen_decay_a},
          {"coef_pattern", to_json(s.coef_pattern)},
          {"snr_target", s.snr_target},
          {"replicates", s.replicates},
          {"base_seed", s.base_seed},
          {"methods", methods},
          {"folds", s.folds}};
}

inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  try {
    ScenarioSpec s;
    s.n = j.at("n").get<long>();
    s.d_grid = j.at("d_grid").get<std::vector<long>>();
    s.eigen_decay_a = j.at("eigen_decay_a").get<double>();
    s.snr_target = j.at("snr_target").get<double>();
    s.replicates = j.at("replicates").get<int>();
    s.base_seed = j.value("base_seed", std::uint64_t{0});
    s.folds = j.value("folds", 10);
    s.methods.clear();
    for (const auto& m : j.at("methods")) s.methods.push_back(Method::parse(m.get<std::string>()));

    const auto& cp = j.at("coef_pattern");
    const std::string kind = cp.at("kind").get<std::string>();
    if (kind == "PolyDecay") {
      s.coef_pattern = CoefPattern::poly_decay(cp.at("b").get<double>());
    } else if (kind == "SpikedHead") {
      s.coef_pattern = CoefPattern::spiked_head(cp.at("count").get<int>(), cp.value("value", 1.0));
    } else if (kind == "SpikedTailRandom") {
      std::optional<double> nv;
      if (cp.contains("noise_var") && !cp.at("noise_var").is_null())
        nv = cp.at("noise_var").get<double>();
      s.coef_pattern = CoefPattern::spiked_tail_random(cp.value("count", 10), cp.value("window", 25), nv);
      s.coef_pattern.value = cp.value("value", 1.0);
    } else if (kind == "IsotropicGaussian") {
      s.coef_pattern = CoefPattern::isotropic_gaussian();
    } else {
      throw ParseError("unknown coef_pattern kind '" + kind + "'");
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario json: ") + e.what());
  }
}

// 64-bit FNV-1a of the canonical JSON text, as 16 hex digits.
inline std::string scenario_hash(const ScenarioSpec& s) {
  const std::string text = to_json(s).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- random streams ----------------------------------------------------------------

enum class StreamRole : std::uint32_t { Design = 0, Noise = 1, Pattern = 2, Folds = 3 };

/// Independent mt19937_64 stream keyed by (base_seed, d, replicate, role).
inline std::mt19937_64 make_stream(std::uint64_t base_seed, long d, int replicate, StreamRole role) {
  std::seed_seq seq{static_cast<std::uint32_t>(base_seed & 0xffffffffu),
                    static_cast<std::uint32_t>(base_seed >> 32),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(d) & 0xffffffffu),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(d) >> 32),
                    static_cast<std::uint32_t>(replicate),
                    static_cast<std::uint32_t>(role)};
  return std::mt19937_64(seq);
}

struct Scenario {
  Dataset data;
  Vector beta;
  Vector covariance_diagonal;  // Sigma = diag(j^{-a})
  double sigma = 0.0;          // noise standard deviation

  Matrix covariance() const { return covariance_diagonal.asDiagonal(); }
};

inline Vector coefficients(const CoefPattern& p, long d, std::mt19937_64& rng) {
  using K = CoefPattern::Kind;
  Vector beta = Vector::Zero(d);
  switch (p.kind) {
    case K::PolyDecay:
      for (long j = 0; j < d; ++j) beta(j) = std::pow(double(j + 1), -p.b);
      break;
    case K::SpikedHead:
      for (long j = 0; j < std::min<long>(p.count, d); ++j) beta(j) = p.value;
      break;
    case K::SpikedTailRandom: {
      std::normal_distribution<double> bg(0.0, std::sqrt(p.noise_var.value_or(1.0 / double(d))));
      for (long j = 0; j < d; ++j) beta(j) = bg(rng);
      // candidates d-window .. d in 1-based indexing
      std::vector<long> window;
      for (long j = std::max<long>(0, d - 1 - p.window); j < d; ++j) window.push_back(j);
      std::shuffle(window.begin(), window.end(), rng);
      for (long k = 0; k < std::min<long>(p.count, long(window.size())); ++k) beta(window[k]) = p.value;
      break;
    }
    case K::IsotropicGaussian: {
      std::normal_distribution<double> g(0.0, 1.0);
      for (long j = 0; j < d; ++j) beta(j) = g(rng);
      break;
    }
  }
  return beta;
}

/// One replicate: Gaussian rows with covariance diag(j^{-a}), coefficients from the
/// pattern, and noise level chosen so that sqrt(beta^T Sigma beta) / sigma = snr_target.
inline Scenario generate_scenario(const ScenarioSpec& spec, long d, int replicate) {
  spec.validate();
  detail::require_domain(d >= 1, "dimension must be >= 1");
  Scenario s;
  s.covariance_diagonal.resize(d);
  for (long j = 0; j < d; ++j) s.covariance_diagonal(j) = std::pow(double(j + 1), -spec.eigen_decay_a);

  auto pattern_rng = make_stream(spec.base_seed, d, replicate, StreamRole::Pattern);
  s.beta = coefficients(spec.coef_pattern, d, pattern_rng);
  const double signal = s.beta.dot(s.covariance_diagonal.cwiseProduct(s.beta));
  if (!(signal > 0.0)) throw DomainError("scenario has zero signal (beta^T Sigma beta = 0)");
  s.sigma = std::sqrt(signal) / spec.snr_target;

  std::normal_distribution<double> g(0.0, 1.0);
  auto design_rng = make_stream(spec.base_seed, d, replicate, StreamRole::Design);
  Matrix x(spec.n, d);
  const Vector sd = s.covariance_diagonal.cwiseSqrt();
  for (long i = 0; i < spec.n; ++i)
    for (long j = 0; j < d; ++j) x(i, j) = sd(j) * g(design_rng);

  auto noise_rng = make_stream(spec.base_seed, d, replicate, StreamRole::Noise);
  Vector eps(spec.n);
  for (long i = 0; i < spec.n; ++i) eps(i) = s.sigma * g(noise_rng);

  Vector y = x * s.beta + eps;
  s.data = Dataset(std::move(x), std::move(y));
  return s;
}

// ---- experiment --------------------------------------------------------------------

struct ReplicateErrors {
  double rel_mse = 0.0;
  double rel_pe = 0.0;
};

/// Fits `method` on one replicate; the denominators are the errors of beta = 0.
inline ReplicateErrors evaluate_method(const Scenario& sc, const CanonicalProblem& problem,
                                       const Method& method, int folds, std::uint64_t fold_seed) {
  const auto& dec = *problem.decomposition;
  Vector beta_hat;
  using K = Method::Kind;
  switch (method.kind) {
    case K::Zero: beta_hat = Vector::Zero(sc.beta.size()); break;
    case K::Ols: beta_hat = to_beta(dec, problem.theta_ls); break;
    case K::NctCv:
    case K::GctCv: {
      const double phi = method.kind == K::NctCv ? 0.0 : method.phi;
      const auto cv = kfold_cv(sc.data, folds, phi, ThresholdRule::soft_rule(), fold_seed);
      beta_hat = fit_gct(problem, GctConfig{cv.tau_cv, phi, ThresholdRule::soft_rule()}).beta;
      break;
    }
    case K::PcrCv: {
      const auto cv = kfold_cv_pcr(sc.data, folds, fold_seed);
      beta_hat = fit_pcr(problem, std::min(cv.components, dec.rank())).beta;
      break;
    }
    case K::RidgeCv: {
      const auto cv = kfold_cv_ridge(sc.data, folds, default_ridge_grid(dec.eigenvalues(0)), fold_seed);
      beta_hat = fit_ridge(problem, cv.lambda).beta;
      break;
    }
  }
  const Vector zero = Vector::Zero(sc.beta.size());
  const Matrix cov = sc.covariance();
  ReplicateErrors e;
  e.rel_mse = relative_error(mse_fixed(beta_hat, sc.beta, dec), mse_fixed(zero, sc.beta, dec));
  e.rel_pe = relative_error(pe_random(beta_hat, sc.beta, cov), pe_random(zero, sc.beta, cov));
  return e;
}

struct ExperimentRow {
  std::string method;
  long d = 0;
  long n = 0;
  int replicates = 0;
  double median_rel_mse = 0.0;
  double median_rel_pe = 0.0;
  std::string scenario_hash;

  bool operator==(const ExperimentRow&) const = default;
};

struct ExperimentTable {
  std::vector<ExperimentRow> rows;
  std::string scenario_hash;
  std::uint64_t base_seed = 0;
  std::string notes;
};

// Mean of the two central order statistics for even counts.
inline double median(std::vector<double> v) {
  if (v.empty()) throw DomainError("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// CT_THREADS caps the worker count; 0 or unset means hardware concurrency.
inline unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CT_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return hw;
}

/// Every (d, replicate) pair is an independent job with its own random streams, so
/// results do not depend on scheduling or on which other replicates run.
inline ExperimentTable run_experiment(const ScenarioSpec& spec, unsigned threads = 0) {
  spec.validate();
  if (spec.methods.empty()) throw DomainError("scenario lists no methods");
  const std::size_t nd = spec.d_grid.size();
  const std::size_t nm = spec.methods.size();
  const std::size_t reps = static_cast<std::size_t>(spec.replicates);
  // results[(di * reps + rep) * nm + mi]
  std::vector<ReplicateErrors> results(nd * reps * nm);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t job = next.fetch_add(1);
      if (job >= nd * reps) return;
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      const std::size_t di = job / reps;
      const int rep = static_cast<int>(job % reps);
      const long d = spec.d_grid[di];
      std::string method_name = "(data generation)";
      try {
        const Scenario sc = generate_scenario(spec, d, rep);
        const auto problem = CanonicalProblem::from(sc.data);
        auto fold_rng = make_stream(spec.base_seed, d, rep, StreamRole::Folds);
        const std::uint64_t fold_seed = fold_rng();
        for (std::size_t mi = 0; mi < nm; ++mi) {
          method_name = spec.methods[mi].label();
          results[job * nm + mi] = evaluate_method(sc, problem, spec.methods[mi], spec.folds, fold_seed);
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_mutex);
        if (!failure)
          failure = std::make_exception_ptr(Error("replicate failed (d=" + std::to_string(d) +
                                                  ", replicate=" + std::to_string(rep) +
                                                  ", method=" + method_name + "): " + e.what()));
        return;
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(threads ? threads : worker_count(),
                                                         static_cast<unsigned>(nd * reps)));
  if (count == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentTable table;
  table.scenario_hash = scenario_hash(spec);
  table.base_seed = spec.base_seed;
  if (spec.coef_pattern.kind == CoefPattern::Kind::SpikedTailRandom)
    table.notes = "spike positions redrawn per replicate";
  for (std::size_t mi = 0; mi < nm; ++mi) {
    std::vector<std::size_t> order(nd);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return spec.d_grid[a] < spec.d_grid[b]; });
    for (std::size_t di : order) {
      std::vector<double> mse, pe;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const auto& r = results[(di * reps + rep) * nm + mi];
        mse.push_back(r.rel_mse);
        pe.push_back(r.rel_pe);
      }
      table.rows.push_back({spec.methods[mi].label(), spec.d_grid[di], spec.n, spec.replicates,
                            median(mse), median(pe), table.scenario_hash});
    }
  }
  return table;
}

// ---- CSV ---------------------------------------------------------------------------

inline constexpr const char* kTableHeader =
    "method,d,n,replicates,median_rel_mse,median_rel_pe,scenario_hash";

inline std::string format_table(const ExperimentTable& t) {
  std::ostringstream os;
  os << kTableHeader << '\n';
  for (const auto& r : t.rows)
    os << r.method << ',' << r.d << ',' << r.n << ',' << r.replicates << ','
       << io::format_double(r.median_rel_mse) << ',' << io::format_double(r.median_rel_pe) << ','
       << r.scenario_hash << '\n';
  return os.str();
}

inline void emit_table(const ExperimentTable& t, const std::filesystem::path& path) {
  io::atomic_write(path, format_table(t));
}

inline ExperimentTable parse_table(std::istream& in) {
  ExperimentTable t;
  std::string line;
  if (!std::getline(in, line) || io::detail::trim(line) != kTableHeader)
    throw ParseError("results csv: unexpected header");
  while (std::getline(in, line)) {
    if (io::detail::trim(line).empty()) continue;
    const auto f = io::detail::split(line);
    if (f.size() != 7) throw ParseError("results csv: expected 7 fields");
    ExperimentRow r;
    r.method = std::string(f[0]);
    double d, n, reps;
    if (!io::detail::parse_double(f[1], d) || !io::detail::parse_double(f[2], n) ||
        !io::detail::parse_double(f[3], reps) ||
        !io::detail::parse_double(f[4], r.median_rel_mse) ||
        !io::detail::parse_double(f[5], r.median_rel_pe))
      throw ParseError("results csv: malformed number in '" + line + "'");
    r.d = static_cast<long>(d);
    r.n = static_cast<long>(n);
    r.replicates = static_cast<int>(reps);
    r.scenario_hash = std::string(f[6]);
    t.rows.push_back(std::move(r));
  }
  if (!t.rows.empty()) t.scenario_hash = t.rows.front().scenario_hash;
  return t;
}

}  // namespace canthresh::sim
