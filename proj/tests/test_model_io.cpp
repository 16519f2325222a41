#include <gtest/gtest.h>

#include <sstream>

#include "canthresh/io.hpp"
#include "canthresh/model_io.hpp"
#include "support.hpp"

using namespace canthresh;
using namespace testsupport;

TEST(Csv, HeaderDetectionAndErrors) {
  std::istringstream with("a, b\n1,2\n\n3,4\n");
  const auto t = io::parse_csv(with);
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.values.rows(), 2);
  EXPECT_EQ(t.values(1, 1), 4.0);

  std::istringstream without("1,2e-3\n-3,+4\n");
  const auto u = io::parse_csv(without);
  EXPECT_FALSE(u.has_header());
  EXPECT_EQ(u.values(0, 1), 2e-3);

  std::istringstream ragged("1,2\n3\n");
  EXPECT_THROW(io::parse_csv(ragged), ParseError);
  std::istringstream text("a,b\n1,x\n");
  EXPECT_THROW(io::parse_csv(text), ParseError);
  std::istringstream empty("a,b\n");
  EXPECT_THROW(io::parse_csv(empty), ParseError);
}

TEST(FormatDouble, RoundTrips) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(uniform(rng, -1, 1), int(uniform(rng, -300, 300)));
    double back;
    ASSERT_TRUE(io::detail::parse_double(io::format_double(v), back));
    EXPECT_EQ(back, v);
  }
}

TEST(ModelJson, LinearRoundTrip) {
  Rng rng(2);
  const Dataset data(gaussian_matrix(9, 4, rng), gaussian_vector(9, rng));
  const auto [c, off] = center(data);
  for (const GctConfig& cfg : {GctConfig{0.3, 1.0, ThresholdRule::hard_rule()}, GctConfig{kInfiniteTau, 0.0}}) {
    auto fit = fit_gct(c, cfg);
    fit.offsets = off;
    const auto j = io::to_json(io::ModelFile{fit, {{"a", "b", "c", "d"}, 4}});
    const auto back = io::model_from_json(nlohmann::json::parse(j.dump()));
    const auto& f = std::get<FitResult>(back.model);
    EXPECT_EQ(f.beta, fit.beta);
    EXPECT_EQ(f.theta_hat, fit.theta_hat);
    EXPECT_EQ(f.offsets->column_means, off.column_means);
    EXPECT_EQ(f.offsets->response_mean, off.response_mean);
    EXPECT_EQ(f.method.gct.tau, cfg.tau);
    EXPECT_EQ(f.method.gct.rule.kind(), cfg.rule.kind());
    EXPECT_EQ(back.features.names.size(), 4u);
    EXPECT_EQ(back.features.response_column, Index{4});
  }
  auto pcr = fit_pcr(c, 2);
  const auto back = io::model_from_json(io::to_json(io::ModelFile{pcr, {}}));
  EXPECT_EQ(std::get<FitResult>(back.model).method.components, 2);
  EXPECT_FALSE(std::get<FitResult>(back.model).offsets.has_value());
}

TEST(ModelJson, KernelRoundTrip) {
  Rng rng(3);
  const Matrix x = gaussian_matrix(8, 2, rng);
  const auto km = fit_kernel_gct(x, gaussian_vector(8, rng), KernelSpec::polynomial(3, 0.5, 2.0),
                                 GctConfig{0.01, 0.5}, kDefaultKernelRankTolerance, true);
  const auto back = io::model_from_json(nlohmann::json::parse(io::to_json(io::ModelFile{km, {}}).dump()));
  const auto& k = std::get<KernelModel>(back.model);
  EXPECT_EQ(k.dual_coeffs, km.dual_coeffs);
  EXPECT_EQ(k.training_points, km.training_points);
  EXPECT_EQ(k.kernel.degree, 3);
  EXPECT_EQ(*k.response_mean, *km.response_mean);
  const Vector p = gaussian_vector(2, rng);
  EXPECT_EQ(predict_kernel(k, p), predict_kernel(km, p));
}

TEST(ModelJson, SchemaErrors) {
  EXPECT_THROW(io::model_from_json(nlohmann::json::parse(R"({"schema_version": 2})")), ParseError);
  EXPECT_THROW(io::model_from_json(nlohmann::json::parse(R"({"schema_version": 1, "model_kind": "tree"})")),
               ParseError);
  EXPECT_THROW(io::model_from_json(nlohmann::json::parse(R"({"schema_version": 1, "model_kind": "linear"})")),
               ParseError);
  const auto custom = ThresholdRule::custom([](double z, double t) { return soft(z, t); }, 3.0);
  FitResult f;
  f.method.gct.rule = custom;
  EXPECT_THROW(io::to_json(io::ModelFile{f, {}}), DomainError);
}
