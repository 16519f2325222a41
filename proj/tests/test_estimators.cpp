#include <gtest/gtest.h>

#include "canthresh/estimators.hpp"
#include "canthresh/metrics.hpp"
#include "support.hpp"

using namespace canthresh;
using namespace testsupport;

namespace {

Dataset make_data(Index n, Index d, Rng& rng) {
  return Dataset(gaussian_matrix(n, d, rng), gaussian_vector(n, rng));
}

// Problem with a hand-chosen spectrum and theta_LS (V and U are identity blocks).
CanonicalProblem diagonal_problem(const Vector& eigenvalues, const Vector& theta_ls) {
  auto dec = std::make_shared<CanonicalDecomposition>();
  const Index r = eigenvalues.size();
  dec->eigenvalues = eigenvalues;
  dec->right_vectors = Matrix::Identity(r, r);
  dec->left_vectors = Matrix::Identity(r, r);
  CanonicalProblem p;
  p.decomposition = dec;
  p.theta_ls = CanonicalCoefficients(theta_ls);
  return p;
}

}  // namespace

TEST(FitNct, TauZeroIsPseudoinverse) {
  Rng rng(1);
  for (auto [n, d] : {std::pair{10, 4}, {6, 6}, {5, 12}}) {
    const auto data = make_data(n, d, rng);
    const auto fit = fit_nct(data, 0.0);
    EXPECT_LE((fit.beta - pinv_solve(data.design, data.response)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(FitNct, LargeTauIsZero) {
  Rng rng(2);
  const auto data = make_data(12, 5, rng);
  const auto p = CanonicalProblem::from(data);
  const double tmax = p.theta_ls.values.cwiseAbs().maxCoeff();
  EXPECT_EQ(fit_nct(data, tmax).beta.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(fit_nct(data, kInfiniteTau).beta.cwiseAbs().maxCoeff(), 0.0);
}

TEST(FitNct, HandSoftThresholding) {
  Vector lam(2), th(2);
  lam << 1, 1;
  th << 3, 0.1;
  const auto fit = fit_gct(diagonal_problem(lam, th), GctConfig{1.0, 0.0, ThresholdRule::soft_rule()});
  EXPECT_EQ(fit.theta_hat, Vector((Vector(2) << 2, 0).finished()));
}

TEST(FitGct, PhiZeroSoftMatchesNct) {
  Rng rng(3);
  const auto data = make_data(15, 8, rng);
  for (double tau : {0.0, 0.05, 0.3, 1.0}) {
    const auto a = fit_gct(data, GctConfig{tau, 0.0, ThresholdRule::soft_rule()});
    const auto b = fit_nct(data, tau);
    EXPECT_EQ(a.beta, b.beta);
  }
}

TEST(FitGct, TauZeroIsLeastSquares) {
  Rng rng(4);
  const auto data = make_data(15, 8, rng);
  const auto p = CanonicalProblem::from(data);
  for (double phi : {0.0, 0.5, 2.0})
    for (const auto& rule : {ThresholdRule::soft_rule(), ThresholdRule::hard_rule()})
      EXPECT_LE((fit_gct(p, GctConfig{0.0, phi, rule}).theta_hat - p.theta_ls.values)
                    .cwiseAbs()
                    .maxCoeff(),
                1e-14);
}

TEST(FitGct, HandWeightedHard) {
  Vector lam(2), th(2);
  lam << 4, 1;
  th << 0.6, 0.6;
  const auto fit = fit_gct(diagonal_problem(lam, th), GctConfig{1.0, 1.0, ThresholdRule::hard_rule()});
  EXPECT_NEAR(fit.theta_hat(0), 0.6, 1e-15);
  EXPECT_EQ(fit.theta_hat(1), 0.0);
}

TEST(FitGct, InvalidConfigAndCustomRule) {
  Rng rng(5);
  const auto data = make_data(8, 3, rng);
  EXPECT_THROW(fit_gct(data, GctConfig{-1.0, 0.0, ThresholdRule::soft_rule()}), DomainError);
  EXPECT_THROW(fit_gct(data, GctConfig{0.1, -1.0, ThresholdRule::soft_rule()}), DomainError);
  const auto bad = ThresholdRule::custom([](double z, double t) { return z + 2 * t; }, 3.0);
  EXPECT_THROW(fit_gct(data, GctConfig{0.5, 0.0, bad}), DomainError);
}

TEST(FitPcr, Examples) {
  Rng rng(6);
  const auto data = make_data(8, 5, rng);
  const auto p = CanonicalProblem::from(data);
  EXPECT_LE((fit_pcr(p, p.decomposition->rank()).beta - fit_nct(data, 0.0).beta)
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
  EXPECT_EQ(fit_pcr(p, 0).beta.cwiseAbs().maxCoeff(), 0.0);

  // OLS on the leading principal-component score X u_1
  const Vector u1 = p.decomposition->right_vectors.col(0);
  const Vector score = data.design * u1;
  const double coef = score.dot(data.response) / score.squaredNorm();
  EXPECT_LE((fit_pcr(p, 1).beta - coef * u1).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_THROW(fit_pcr(p, -1), DomainError);
  EXPECT_THROW(fit_pcr(p, 6), DomainError);
}

TEST(FitPcr, GctBridge) {
  Rng rng(7);
  const auto data = make_data(20, 9, rng);
  const auto p = CanonicalProblem::from(data);
  for (Index m = 0; m <= p.decomposition->rank(); ++m) {
    Vector th = p.theta_ls.values;
    for (Index j = m; j < th.size(); ++j) th(j) = 0.0;
    EXPECT_EQ(fit_pcr(p, m).theta_hat, th);
  }
}

TEST(FitMinNormLs, Examples) {
  Rng rng(8);
  const auto tall = make_data(20, 4, rng);
  const Matrix& x = tall.design;
  const Vector ols = (x.transpose() * x).ldlt().solve(x.transpose() * tall.response);
  EXPECT_LE((fit_min_norm_ls(tall).beta - ols).cwiseAbs().maxCoeff(), 1e-8);

  const auto wide = make_data(6, 15, rng);
  EXPECT_LE((wide.design * fit_min_norm_ls(wide).beta - wide.response).cwiseAbs().maxCoeff(), 1e-8);

  Matrix dup(10, 3);
  dup.leftCols(2) = gaussian_matrix(10, 2, rng);
  dup.col(2) = dup.col(1);
  const Vector y = gaussian_vector(10, rng);
  const Vector b = fit_min_norm_ls(Dataset(dup, y)).beta;
  EXPECT_NEAR(b(1), b(2), 1e-10);
  EXPECT_LE((b - pinv_solve(dup, y)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FitRidge, Examples) {
  Rng rng(9);
  const auto data = make_data(12, 7, rng);
  EXPECT_LE((fit_ridge(data, 0.0).beta - fit_min_norm_ls(data).beta).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(fit_ridge(data, 1e12).beta.norm(), 1e-8);
  for (double lam : {1e-3, 0.1, 2.0})
    EXPECT_LE((fit_ridge(data, lam).beta - ridge_dense(data.design, data.response, lam))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-10);
  const auto wide = make_data(5, 11, rng);
  EXPECT_LE((fit_ridge(wide, 0.3).beta - ridge_dense(wide.design, wide.response, 0.3))
                .cwiseAbs()
                .maxCoeff(),
            1e-10);
  EXPECT_THROW(fit_ridge(data, -1.0), DomainError);
}

TEST(Predict, Examples) {
  Rng rng(10);
  const auto data = make_data(6, 10, rng);
  const auto fit = fit_nct(data, 0.0);
  EXPECT_EQ(predict(fit, Matrix::Zero(3, 10)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((predict(fit, data.design) - data.response).cwiseAbs().maxCoeff(), 1e-8);
  const Matrix xn = gaussian_matrix(4, 10, rng);
  EXPECT_LE((predict(fit, xn) - xn * fit.beta).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(predict(fit, Matrix::Zero(2, 9)), DimensionMismatch);

  auto centered = fit;
  centered.offsets = CenteringOffsets{Vector::Ones(10), 2.5};
  const Vector p = predict(centered, xn);
  EXPECT_LE((p - ((xn.rowwise() - Vector::Ones(10).transpose()) * fit.beta).array().matrix() -
             Vector::Constant(4, 2.5))
                .cwiseAbs()
                .maxCoeff(),
            1e-13);
}

TEST(DefaultTau, Examples) {
  const double base = default_tau(1.0, 100, 50, 0.05, 2.0, 0.0, 3.0);
  EXPECT_NEAR(base, 0.2 * std::sqrt(std::log(2000.0)), 1e-14);
  EXPECT_NEAR(base, 0.55139, 5e-6);
  EXPECT_EQ(default_tau(0.0, 100, 50, 0.05, 2.0, 0.0, 3.0), 0.0);
  EXPECT_NEAR(default_tau(1.0, 100, 50, 0.05, 2.0, 2.0, 4.0), 4.0 * base, 1e-14);
  EXPECT_THROW(default_tau(-1.0, 100, 50, 0.05, 2.0, 0.0, 1.0), DomainError);
  EXPECT_THROW(default_tau(1.0, 100, 50, 1.5, 2.0, 0.0, 1.0), DomainError);
}

TEST(EstimatorProperties, ErrorIdentity) {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const auto data = make_data(10 + t, 4 + 2 * t, rng);
    const auto p = CanonicalProblem::from(data);
    const auto& dec = *p.decomposition;
    const Vector beta = gaussian_vector(data.d(), rng);
    const Vector theta = to_theta(dec, beta).values;
    const Matrix sig = data.design.transpose() * data.design / double(data.n());
    for (const FitResult& f :
         {fit_gct(p, GctConfig{0.2, 1.0, ThresholdRule::hard_rule()}), fit_pcr(p, 2),
          fit_ridge(p, 0.5), fit_gct(p, GctConfig{0.1, 0.0, ThresholdRule::soft_rule()})}) {
      const Vector diff = f.beta - beta;
      const double quad = diff.dot(sig * diff);
      EXPECT_NEAR(quad, (f.theta_hat - theta).squaredNorm(), 1e-10 * (1 + quad));
      EXPECT_NEAR(mse_fixed(f.beta, beta, dec), (f.theta_hat - theta).squaredNorm(), 1e-10 * (1 + quad));
    }
  }
}

TEST(EstimatorProperties, ResponseScaleEquivariance) {
  Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    const auto data = make_data(14, 9, rng);
    const double c = uniform(rng, 0.1, 10), tau = uniform(rng, 0, 0.5), phi = uniform(rng, 0, 2);
    const Dataset scaled(data.design, c * data.response);
    const auto a = fit_gct(data, GctConfig{tau, phi, ThresholdRule::soft_rule()});
    const auto b = fit_gct(scaled, GctConfig{c * tau, phi, ThresholdRule::soft_rule()});
    EXPECT_LE((b.beta - c * a.beta).cwiseAbs().maxCoeff(), 1e-10 * c * (1 + a.beta.norm()));
  }
}

TEST(EstimatorProperties, SupportNesting) {
  Rng rng(13);
  for (int t = 0; t < 20; ++t) {
    const auto p = CanonicalProblem::from(make_data(16, 10, rng));
    for (const auto& rule : {ThresholdRule::soft_rule(), ThresholdRule::hard_rule()}) {
      Vector prev = fit_gct(p, GctConfig{0.0, 0.0, rule}).theta_hat;
      for (double tau = 0.02; tau < 1.5; tau += 0.02) {
        const Vector cur = fit_gct(p, GctConfig{tau, 0.0, rule}).theta_hat;
        for (Index j = 0; j < cur.size(); ++j)
          if (cur(j) != 0.0) EXPECT_NE(prev(j), 0.0);
        prev = cur;
      }
    }
  }
}
