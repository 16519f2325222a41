#pragma once

// Command-line front end. `run` is the whole program minus process plumbing, so the
// test suite can drive it in-process.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "canthresh/estimators.hpp"
#include "canthresh/io.hpp"
#include "canthresh/kernel.hpp"
#include "canthresh/metrics.hpp"
#include "canthresh/model_io.hpp"
#include "canthresh/simstudy.hpp"
#include "canthresh/tuning.hpp"

namespace canthresh::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto f : io::detail::split(s)) out.emplace_back(f);
  return out;
}

inline double parse_number(const std::string& s, const std::string& what) {
  double v;
  if (!io::detail::parse_double(io::detail::trim(s), v))
    throw ParseError(what + ": '" + s + "' is not a number");
  return v;
}

inline std::vector<double> parse_numbers(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& f : split_list(s)) out.push_back(parse_number(f, what));
  return out;
}

inline long parse_integer(const std::string& s, const std::string& what) {
  long v = 0;
  const auto t = io::detail::trim(s);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw ParseError(what + ": '" + s + "' is not an integer");
  return v;
}

// A CSV split into a design matrix and a response column.
struct LoadedData {
  Dataset data;
  io::FeatureLayout layout;
};

inline Index resolve_response(const io::CsvTable& t, const std::string& spec) {
  const Index width = t.values.cols();
  if (t.has_header()) {
    const auto it = std::find(t.header.begin(), t.header.end(), spec);
    if (it != t.header.end()) return static_cast<Index>(it - t.header.begin());
  }
  long idx = 0;
  try {
    idx = parse_integer(spec, "--response");
  } catch (const ParseError&) {
    if (t.has_header()) throw ParseError("--response: no column named '" + spec + "'");
    throw;
  }
  if (idx < 0 || idx >= width)
    throw ParseError("--response index " + spec + " out of range for " + std::to_string(width) +
                     " columns");
  return static_cast<Index>(idx);
}

inline LoadedData load_data(const std::string& path, const std::string& response) {
  const auto table = io::read_csv(path);
  const Index width = table.values.cols();
  if (width < 2) throw ParseError(path + ": need a response and at least one feature column");
  const Index yc = resolve_response(table, response);
  Matrix x(table.values.rows(), width - 1);
  LoadedData out;
  for (Index j = 0, k = 0; j < width; ++j) {
    if (j == yc) continue;
    x.col(k++) = table.values.col(j);
    if (table.has_header()) out.layout.names.push_back(table.header[static_cast<std::size_t>(j)]);
  }
  out.layout.response_column = yc;
  out.data = Dataset(std::move(x), table.values.col(yc));
  return out;
}

// Columns of a prediction CSV that match the model's features.
inline Matrix select_features(const io::CsvTable& t, const io::FeatureLayout& layout, Index d) {
  if (t.has_header() && !layout.names.empty()) {
    Matrix x(t.values.rows(), d);
    bool all_found = static_cast<Index>(layout.names.size()) == d;
    for (Index j = 0; all_found && j < d; ++j) {
      const auto it = std::find(t.header.begin(), t.header.end(), layout.names[std::size_t(j)]);
      if (it == t.header.end()) {
        all_found = false;
        break;
      }
      x.col(j) = t.values.col(static_cast<Index>(it - t.header.begin()));
    }
    if (all_found) return x;
  }
  const Index width = t.values.cols();
  if (width == d) return t.values;
  if (layout.response_column && width == d + 1 && *layout.response_column < width) {
    Matrix x(t.values.rows(), d);
    for (Index j = 0, k = 0; j < width; ++j)
      if (j != *layout.response_column) x.col(k++) = t.values.col(j);
    return x;
  }
  throw DimensionMismatch("prediction input has " + std::to_string(width) +
                          " columns, model expects " + std::to_string(d) + " features");
}

struct TauAuto {
  double sigma, delta, alpha;
};

inline TauAuto parse_tau_auto(const std::string& s) {
  const auto v = parse_numbers(s, "--tau-auto");
  if (v.size() != 3) throw ParseError("--tau-auto expects sigma,delta,alpha");
  return {v[0], v[1], v[2]};
}

inline KernelSpec parse_kernel(const std::string& s) {
  if (s == "linear") return KernelSpec::linear();
  if (s.rfind("rbf:", 0) == 0) return KernelSpec::rbf(parse_number(s.substr(4), "--kernel rbf"));
  if (s.rfind("poly:", 0) == 0) {
    const auto v = parse_numbers(s.substr(5), "--kernel poly");
    if (v.size() != 3 || v[0] != std::floor(v[0]))
      throw ParseError("--kernel poly expects <degree>,<coef0>,<scale>");
    return KernelSpec::polynomial(static_cast<int>(v[0]), v[1], v[2]);
  }
  throw ParseError("unknown kernel '" + s + "' (expected linear, rbf:<gamma> or poly:<deg>,<coef0>,<scale>)");
}

inline nlohmann::json number_or_null(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

// Options shared by fit, cv and kernel-fit.
struct CommonOptions {
  std::string input;
  std::string response;
  double phi = 0.0;
  std::string rule = "soft";
  bool no_center = false;
};

inline void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--input", o.input, "training CSV")->required();
  cmd->add_option("--response", o.response, "response column name or 0-based index")->required();
  cmd->add_option("--phi", o.phi, "GCT weight exponent");
  cmd->add_option("--rule", o.rule, "thresholding rule")->check(CLI::IsMember({"soft", "hard"}));
  cmd->add_flag("--no-center", o.no_center, "do not center X columns and Y");
}

// Centers (unless disabled) and returns the working dataset plus offsets.
inline std::pair<Dataset, std::optional<CenteringOffsets>> prepare(const Dataset& raw,
                                                                   bool no_center) {
  if (no_center) return {raw, std::nullopt};
  auto [c, off] = center(raw);
  return {std::move(c), std::move(off)};
}

}  // namespace detail

/// Runs one command. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using namespace detail;
  CLI::App app{"Canonical thresholding regression toolkit", "canthresh"};
  app.require_subcommand(1);

  // fit
  CommonOptions fit_o;
  std::optional<double> fit_tau;
  std::string fit_tau_auto, fit_method = "gct", fit_output;
  auto* fit = app.add_subcommand("fit", "fit a linear model and write it as JSON");
  add_common(fit, fit_o);
  auto* fit_tau_opt = fit->add_option("--tau", fit_tau, "threshold level");
  fit->add_option("--tau-auto", fit_tau_auto, "sigma,delta,alpha for the default threshold")
      ->excludes(fit_tau_opt);
  fit->add_option("--method", fit_method, "nct|gct|pcr:<m>|ols|ridge:<lambda>");
  fit->add_option("--output", fit_output, "model JSON path")->required();

  // cv
  CommonOptions cv_o;
  int cv_folds = 10;
  std::uint64_t cv_seed = 0;
  std::string cv_phi_grid, cv_fit_out;
  auto* cv = app.add_subcommand("cv", "choose tau by exact L-fold cross-validation");
  add_common(cv, cv_o);
  cv->add_option("--folds", cv_folds, "number of folds");
  cv->add_option("--seed", cv_seed, "fold shuffling seed");
  cv->add_option("--phi-grid", cv_phi_grid, "comma-separated phi values tuned jointly with tau");
  cv->add_option("--fit-out", cv_fit_out, "write the model refitted at tau_cv");

  // predict
  std::string pr_model, pr_input, pr_output;
  auto* pr = app.add_subcommand("predict", "predict from a saved model");
  pr->add_option("--model", pr_model, "model JSON")->required();
  pr->add_option("--input", pr_input, "feature CSV")->required();
  pr->add_option("--output", pr_output, "prediction file (stdout when omitted)");

  // kernel-fit
  CommonOptions kf_o;
  std::optional<double> kf_tau;
  std::string kf_tau_auto, kf_kernel = "linear", kf_output;
  auto* kf = app.add_subcommand("kernel-fit", "fit kernel GCT and write it as JSON");
  add_common(kf, kf_o);
  auto* kf_tau_opt = kf->add_option("--tau", kf_tau, "threshold level");
  kf->add_option("--tau-auto", kf_tau_auto, "sigma,delta,alpha for the default threshold")
      ->excludes(kf_tau_opt);
  kf->add_option("--kernel", kf_kernel, "linear|rbf:<gamma>|poly:<deg>,<coef0>,<scale>");
  kf->add_option("--output", kf_output, "model JSON path")->required();

  // simulate
  std::string sim_scenario, sim_output;
  unsigned sim_threads = 0;
  auto* sim = app.add_subcommand("simulate", "run a simulation scenario");
  sim->add_option("--scenario", sim_scenario, "scenario JSON")->required();
  sim->add_option("--output", sim_output, "results CSV")->required();
  sim->add_option("--threads", sim_threads, "worker threads (0: CT_THREADS or all cores)");

  // diagnose
  std::string dg_input, dg_response, dg_beta, dg_cov;
  std::optional<double> dg_sigma;
  double dg_delta = 0.05, dg_alpha = 2.0;
  std::optional<double> dg_tau;
  double dg_phi = 0.0;
  bool dg_no_center = false;
  auto* dg = app.add_subcommand("diagnose", "print design and fit diagnostics as JSON");
  dg->add_option("--input", dg_input, "data CSV")->required();
  dg->add_option("--response", dg_response, "response column name or 0-based index")->required();
  dg->add_option("--beta", dg_beta, "CSV holding the true coefficient vector");
  dg->add_option("--covariance", dg_cov, "CSV holding the population covariance (d x d)");
  dg->add_option("--sigma", dg_sigma, "noise scale");
  dg->add_option("--delta", dg_delta, "confidence level for rho");
  dg->add_option("--alpha", dg_alpha, "noise tail exponent for rho");
  dg->add_option("--tau", dg_tau, "threshold of the evaluated GCT fit (default: sigma-based)");
  dg->add_option("--phi", dg_phi, "GCT weight exponent of the evaluated fit");
  dg->add_flag("--no-center", dg_no_center, "do not center X columns and Y");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (fit->parsed()) {
      const auto loaded = load_data(fit_o.input, fit_o.response);
      const auto [data, offsets] = prepare(loaded.data, fit_o.no_center);
      const auto problem = CanonicalProblem::from(data);
      const auto& dec = *problem.decomposition;
      FitResult result;
      auto gct_tau = [&](double phi) {
        if (fit_tau) return *fit_tau;
        if (!fit_tau_auto.empty()) {
          const auto a = parse_tau_auto(fit_tau_auto);
          return default_tau(a.sigma, data.n(), dec.rank(), a.delta, a.alpha, phi,
                             dec.eigenvalues(0));
        }
        throw ParseError("--method " + fit_method + " needs --tau or --tau-auto");
      };
      if (fit_method == "nct") {
        if (fit_o.phi != 0.0 || fit_o.rule != "soft")
          throw ParseError("--method nct is soft thresholding with phi = 0");
        GctConfig c{gct_tau(0.0), 0.0, ThresholdRule::soft_rule()};
        c.validate();
        result = fit_gct(problem, c);
      } else if (fit_method == "gct") {
        GctConfig c{gct_tau(fit_o.phi), fit_o.phi, rule_from_name(fit_o.rule)};
        c.validate();
        result = fit_gct(problem, c);
      } else if (fit_method == "ols") {
        result = fit_gct(problem, GctConfig{0.0, 0.0, ThresholdRule::soft_rule()});
        result.method = FitMethod{};
        result.method.kind = MethodKind::MinNormLs;
      } else if (fit_method.rfind("pcr:", 0) == 0) {
        const long m = parse_integer(fit_method.substr(4), "--method pcr");
        result = fit_pcr(problem, static_cast<Index>(m));
      } else if (fit_method.rfind("ridge:", 0) == 0) {
        result = fit_ridge(problem, parse_number(fit_method.substr(6), "--method ridge"));
      } else {
        throw ParseError("unknown --method '" + fit_method + "'");
      }
      result.offsets = offsets;
      io::save_model(io::ModelFile{result, loaded.layout}, fit_output);
      out << "method=" << result.method.label() << " rank=" << dec.rank() << '\n';
      if (result.method.kind == MethodKind::Gct)
        out << "tau=" << io::format_double(result.method.gct.tau) << '\n';
      return kOk;
    }

    if (cv->parsed()) {
      const auto loaded = load_data(cv_o.input, cv_o.response);
      const auto [data, offsets] = prepare(loaded.data, cv_o.no_center);
      const auto rule = rule_from_name(cv_o.rule);
      double phi = cv_o.phi;
      CvResult res;
      if (!cv_phi_grid.empty()) {
        auto best = kfold_cv_phi_grid(data, cv_folds, parse_numbers(cv_phi_grid, "--phi-grid"),
                                      rule, cv_seed);
        phi = best.phi;
        res = std::move(best.cv);
      } else {
        res = kfold_cv(data, cv_folds, phi, rule, cv_seed);
      }
      nlohmann::json report{{"tau_cv", res.tau_cv}, {"cv_error", res.cv_error_at_tau},
                            {"phi", phi},           {"rule", cv_o.rule},
                            {"folds", cv_folds},    {"seed", cv_seed}};
      if (!cv_fit_out.empty()) {
        FitResult result = fit_gct(data, GctConfig{res.tau_cv, phi, rule});
        result.offsets = offsets;
        io::save_model(io::ModelFile{result, loaded.layout}, cv_fit_out);
      }
      out << report.dump(2) << '\n';
      return kOk;
    }

    if (pr->parsed()) {
      const auto model = io::load_model(pr_model);
      const auto table = io::read_csv(pr_input);
      Vector yhat;
      if (const auto* lin = std::get_if<FitResult>(&model.model)) {
        yhat = predict(*lin, select_features(table, model.features, lin->beta.size()));
      } else {
        const auto& km = std::get<KernelModel>(model.model);
        yhat = predict_kernel(km, select_features(table, model.features, km.training_points.cols()));
      }
      std::ostringstream os;
      for (Index i = 0; i < yhat.size(); ++i) os << io::format_double(yhat(i)) << '\n';
      if (pr_output.empty())
        out << os.str();
      else
        io::atomic_write(pr_output, os.str());
      return kOk;
    }

    if (kf->parsed()) {
      const auto loaded = load_data(kf_o.input, kf_o.response);
      const KernelSpec spec = parse_kernel(kf_kernel);
      const auto rule = rule_from_name(kf_o.rule);
      double tau;
      if (kf_tau) {
        tau = *kf_tau;
      } else if (!kf_tau_auto.empty()) {
        const auto a = parse_tau_auto(kf_tau_auto);
        const auto eig = kernel_canonicalize(gram(loaded.data.design, spec));
        tau = default_tau(a.sigma, loaded.data.n(), eig.eigenvalues.size(), a.delta, a.alpha,
                          kf_o.phi, eig.eigenvalues(0));
      } else {
        throw ParseError("kernel-fit needs --tau or --tau-auto");
      }
      const auto model =
          fit_kernel_gct(loaded.data.design, loaded.data.response, spec,
                         GctConfig{tau, kf_o.phi, rule}, kDefaultKernelRankTolerance,
                         !kf_o.no_center);
      io::save_model(io::ModelFile{model, loaded.layout}, kf_output);
      out << "rank=" << model.eigenvalues.size() << " tau=" << io::format_double(tau) << '\n';
      return kOk;
    }

    if (sim->parsed()) {
      std::ifstream in(sim_scenario);
      if (!in) throw ParseError("cannot open " + sim_scenario);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scenario json: ") + e.what());
      }
      const auto spec = sim::scenario_from_json(j);
      const auto table = sim::run_experiment(spec, sim_threads);
      sim::emit_table(table, sim_output);
      out << "rows=" << table.rows.size() << " scenario_hash=" << table.scenario_hash << '\n';
      return kOk;
    }

    if (dg->parsed()) {
      const auto loaded = load_data(dg_input, dg_response);
      const auto [data, offsets] = prepare(loaded.data, dg_no_center);
      const auto problem = CanonicalProblem::from(data);
      const auto& dec = *problem.decomposition;
      MetricsReport report;
      report.effective_rank = effective_rank(dec.eigenvalues);
      report.rho = rho(data.n(), dec.rank(), dg_delta, dg_alpha);

      nlohmann::json j;
      j["n"] = data.n();
      j["d"] = data.d();
      j["rank"] = dec.rank();
      j["eigenvalues"] = io::detail::vec_to_json(dec.eigenvalues);

      if (!dg_beta.empty()) {
        const auto bt = io::read_csv(dg_beta).values;
        const Vector beta = bt.cols() == 1 ? Vector(bt.col(0)) : Vector(bt.row(0).transpose());
        if (bt.rows() != 1 && bt.cols() != 1)
          throw ParseError("--beta must hold a single row or column");
        if (beta.size() != data.d())
          throw DimensionMismatch("--beta has " + std::to_string(beta.size()) +
                                  " entries, data has " + std::to_string(data.d()) + " features");
        const Vector theta = to_theta(dec, beta).values;
        nlohmann::json deff;
        if (theta.norm() > 0.0)
          for (double q : {0.0, 0.5, 1.0, 2.0})
            deff[io::format_double(q)] = joint_effective_dimension_at(theta, dec.rank(), q);
        j["joint_effective_dimension"] = deff;

        std::optional<double> tau = dg_tau;
        if (!tau && dg_sigma)
          tau = default_tau(*dg_sigma, data.n(), dec.rank(), dg_delta, dg_alpha, dg_phi,
                            dec.eigenvalues(0));
        if (tau) {
          const FitResult f = fit_gct(problem, GctConfig{*tau, dg_phi, ThresholdRule::soft_rule()});
          const Vector zero = Vector::Zero(beta.size());
          report.mse = mse_fixed(f.beta, beta, dec);
          const double trivial = mse_fixed(zero, beta, dec);
          if (trivial > 0.0) report.relative_mse = relative_error(*report.mse, trivial);
          if (!dg_cov.empty()) {
            const Matrix cov = io::read_csv(dg_cov).values;
            report.pe = pe_random(f.beta, beta, cov);
            const double trivial_pe = pe_random(zero, beta, cov);
            if (trivial_pe > 0.0) report.relative_pe = relative_error(*report.pe, trivial_pe);
          }
          j["tau"] = *tau;
        }
        if (dg_sigma && *dg_sigma > 0.0) {
          const Matrix sample_cov = dec.right_vectors * dec.eigenvalues.asDiagonal() *
                                    dec.right_vectors.transpose();
          report.snr = snr(beta, sample_cov, *dg_sigma);
          const auto b = theorem1_bound(theta, *dg_sigma * *report.rho);
          j["theorem1"] = {{"sandwich_core", b.sandwich_core},
                           {"lq_bound", b.lq_bound},
                           {"argmin_q", b.argmin_q}};
        }
      }
      j["metrics"] = {{"mse", number_or_null(report.mse)},
                      {"pe", number_or_null(report.pe)},
                      {"relative_mse", number_or_null(report.relative_mse)},
                      {"relative_pe", number_or_null(report.relative_pe)},
                      {"snr", number_or_null(report.snr)},
                      {"effective_rank", number_or_null(report.effective_rank)},
                      {"rho", number_or_null(report.rho)}};
      out << j.dump(2) << '\n';
      return kOk;
    }
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace canthresh::cli
