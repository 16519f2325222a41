#pragma once

// JSON model files (schema_version 1) for linear fits and kernel models.

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "canthresh/estimators.hpp"
#include "canthresh/io.hpp"
#include "canthresh/kernel.hpp"

namespace canthresh::io {

inline constexpr int kSchemaVersion = 1;

// Which CSV columns the model was trained on.
struct FeatureLayout {
  std::vector<std::string> names;        // empty for header-less input
  std::optional<Index> response_column;  // position of y in the training CSV
};

struct ModelFile {
  std::variant<FitResult, KernelModel> model;
  FeatureLayout features;

  bool is_kernel() const { return std::holds_alternative<KernelModel>(model); }
};

namespace detail {

using nlohmann::json;

inline json vec_to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Vector vec_from_json(const json& a) {
  Vector v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Index>(i)) = a[i].get<double>();
  return v;
}

inline json mat_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(vec_to_json(m.row(i).transpose()));
  return rows;
}

inline Matrix mat_from_json(const json& rows) {
  if (rows.empty()) return Matrix(0, 0);
  const std::size_t cols = rows[0].size();
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw ParseError("model json: ragged training_points");
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j].get<double>();
  }
  return m;
}

// JSON has no infinity; tau = +inf is stored as the string "inf".
inline json tau_to_json(double tau) { return std::isinf(tau) ? json("inf") : json(tau); }

inline double tau_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return kInfiniteTau;
    throw ParseError("model json: tau must be a number or \"inf\"");
  }
  return j.get<double>();
}

inline json config_to_json(const GctConfig& c) {
  if (c.rule.kind() == RuleKind::Custom)
    throw DomainError("models with custom threshold rules cannot be serialized");
  return {{"tau", tau_to_json(c.tau)}, {"phi", c.phi}, {"rule", c.rule.name()}};
}

inline GctConfig config_from_json(const json& j) {
  GctConfig c;
  c.tau = tau_from_json(j.at("tau"));
  c.phi = j.at("phi").get<double>();
  c.rule = rule_from_name(j.at("rule").get<std::string>());
  return c;
}

inline json kernel_to_json(const KernelSpec& k) {
  switch (k.kind) {
    case KernelKind::Linear: return {{"kind", "linear"}};
    case KernelKind::Rbf: return {{"kind", "rbf"}, {"gamma", k.gamma}};
    case KernelKind::Polynomial:
      return {{"kind", "poly"}, {"degree", k.degree}, {"coef0", k.coef0}, {"scale", k.scale}};
  }
  return {};
}

inline KernelSpec kernel_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear") return KernelSpec::linear();
  if (kind == "rbf") return KernelSpec::rbf(j.at("gamma").get<double>());
  if (kind == "poly")
    return KernelSpec::polynomial(j.at("degree").get<int>(), j.at("coef0").get<double>(),
                                  j.at("scale").get<double>());
  throw ParseError("model json: unknown kernel kind '" + kind + "'");
}

inline json features_to_json(const FeatureLayout& f) {
  json j;
  j["names"] = f.names.empty() ? json(nullptr) : json(f.names);
  j["response_column"] = f.response_column ? json(*f.response_column) : json(nullptr);
  return j;
}

inline FeatureLayout features_from_json(const json& j) {
  FeatureLayout f;
  if (j.contains("names") && !j.at("names").is_null())
    f.names = j.at("names").get<std::vector<std::string>>();
  if (j.contains("response_column") && !j.at("response_column").is_null())
    f.response_column = j.at("response_column").get<Index>();
  return f;
}

}  // namespace detail

inline nlohmann::json to_json(const ModelFile& file) {
  using namespace detail;
  json j;
  j["schema_version"] = kSchemaVersion;
  if (const auto* fit = std::get_if<FitResult>(&file.model)) {
    j["model_kind"] = "linear";
    const auto& m = fit->method;
    json method;
    switch (m.kind) {
      case MethodKind::Gct: method = {{"kind", "gct"}, {"config", config_to_json(m.gct)}}; break;
      case MethodKind::Pcr: method = {{"kind", "pcr"}, {"components", m.components}}; break;
      case MethodKind::Ridge: method = {{"kind", "ridge"}, {"lambda", m.ridge_lambda}}; break;
      case MethodKind::MinNormLs: method = {{"kind", "ols"}}; break;
    }
    j["method"] = method;
    j["beta"] = vec_to_json(fit->beta);
    j["theta_hat"] = vec_to_json(fit->theta_hat);
    if (fit->offsets)
      j["centering"] = {{"column_means", vec_to_json(fit->offsets->column_means)},
                        {"response_mean", fit->offsets->response_mean}};
    else
      j["centering"] = nullptr;
    if (fit->decomposition)
      j["decomposition"] = {{"rank", fit->decomposition->rank()},
                            {"eigenvalues", vec_to_json(fit->decomposition->eigenvalues)}};
  } else {
    const auto& km = std::get<KernelModel>(file.model);
    j["model_kind"] = "kernel";
    j["kernel"] = kernel_to_json(km.kernel);
    j["config"] = config_to_json(km.config);
    j["training_points"] = mat_to_json(km.training_points);
    j["dual_coeffs"] = vec_to_json(km.dual_coeffs);
    j["theta_hat"] = vec_to_json(km.theta_hat);
    j["centering"] = km.response_mean ? json{{"response_mean", *km.response_mean}} : json(nullptr);
    j["decomposition"] = {{"rank", km.eigenvalues.size()},
                          {"eigenvalues", vec_to_json(km.eigenvalues)}};
  }
  j["features"] = features_to_json(file.features);
  return j;
}

/// Parses a model file. Unknown schema versions and missing kind-specific fields are
/// ParseErrors.
inline ModelFile model_from_json(const nlohmann::json& j) {
  using namespace detail;
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kSchemaVersion)
      throw ParseError("unsupported model schema_version " + std::to_string(version) +
                       " (expected " + std::to_string(kSchemaVersion) + ")");
    ModelFile file;
    if (j.contains("features")) file.features = features_from_json(j.at("features"));
    const std::string kind = j.at("model_kind").get<std::string>();
    if (kind == "linear") {
      FitResult fit;
      const auto& m = j.at("method");
      const std::string mk = m.at("kind").get<std::string>();
      if (mk == "gct") {
        fit.method.kind = MethodKind::Gct;
        fit.method.gct = config_from_json(m.at("config"));
      } else if (mk == "pcr") {
        fit.method.kind = MethodKind::Pcr;
        fit.method.components = m.at("components").get<Index>();
      } else if (mk == "ridge") {
        fit.method.kind = MethodKind::Ridge;
        fit.method.ridge_lambda = m.at("lambda").get<double>();
      } else if (mk == "ols") {
        fit.method.kind = MethodKind::MinNormLs;
      } else {
        throw ParseError("model json: unknown method kind '" + mk + "'");
      }
      fit.beta = vec_from_json(j.at("beta"));
      if (j.contains("theta_hat")) fit.theta_hat = vec_from_json(j.at("theta_hat"));
      const auto& c = j.at("centering");
      if (!c.is_null()) {
        CenteringOffsets off;
        off.column_means = vec_from_json(c.at("column_means"));
        off.response_mean = c.at("response_mean").get<double>();
        if (off.column_means.size() != fit.beta.size())
          throw ParseError("model json: column_means length differs from beta");
        fit.offsets = std::move(off);
      }
      file.model = std::move(fit);
    } else if (kind == "kernel") {
      KernelModel km;
      km.kernel = kernel_from_json(j.at("kernel"));
      km.config = config_from_json(j.at("config"));
      km.training_points = mat_from_json(j.at("training_points"));
      km.dual_coeffs = vec_from_json(j.at("dual_coeffs"));
      if (j.contains("theta_hat")) km.theta_hat = vec_from_json(j.at("theta_hat"));
      if (km.dual_coeffs.size() != km.training_points.rows())
        throw ParseError("model json: dual_coeffs length differs from training point count");
      const auto& c = j.at("centering");
      if (!c.is_null()) km.response_mean = c.at("response_mean").get<double>();
      if (j.contains("decomposition"))
        km.eigenvalues = vec_from_json(j.at("decomposition").at("eigenvalues"));
      file.model = std::move(km);
    } else {
      throw ParseError("model json: unknown model_kind '" + kind + "'");
    }
    return file;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model json: ") + e.what());
  } catch (const DomainError& e) {
    throw ParseError(std::string("model json: ") + e.what());
  }
}

inline void save_model(const ModelFile& file, const std::filesystem::path& path) {
  atomic_write(path, to_json(file).dump(2) + "\n");
}

inline ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model json: ") + e.what());
  }
  return model_from_json(j);
}

}  // namespace canthresh::io
