#include <gtest/gtest.h>

#include "canthresh/kernel.hpp"
#include "support.hpp"

using namespace canthresh;
using namespace testsupport;

TEST(Gram, Examples) {
  Rng rng(1);
  const Matrix x = gaussian_matrix(7, 3, rng);
  EXPECT_LE((gram(x, KernelSpec::linear()) - x * x.transpose()).cwiseAbs().maxCoeff(), 1e-13);
  const Matrix k = gram(x, KernelSpec::rbf(0.7));
  for (Index i = 0; i < 7; ++i) EXPECT_EQ(k(i, i), 1.0);
  EXPECT_EQ(gram(x, KernelSpec::rbf(0.0)), Matrix::Ones(7, 7));
  const Matrix p = gram(x, KernelSpec::polynomial(2, 1.0, 0.5));
  EXPECT_NEAR(p(1, 2), std::pow(0.5 * x.row(1).dot(x.row(2)) + 1.0, 2), 1e-13);
  EXPECT_THROW(KernelSpec::rbf(-1.0), DomainError);
  EXPECT_THROW(KernelSpec::polynomial(0, 1.0, 1.0), DomainError);
  EXPECT_THROW(KernelSpec::polynomial(2, 1.0, 0.0), DomainError);
}

TEST(KernelCanonicalize, Examples) {
  const auto e = kernel_canonicalize(5.0 * Matrix::Identity(5, 5));
  EXPECT_EQ(e.eigenvalues.size(), 5);
  EXPECT_LE((e.eigenvalues - Vector::Ones(5)).cwiseAbs().maxCoeff(), 1e-14);

  Vector v(4);
  v << 1, -2, 0.5, 1;
  v.normalize();
  const auto r1 = kernel_canonicalize(4.0 * v * v.transpose());
  ASSERT_EQ(r1.eigenvalues.size(), 1);
  EXPECT_NEAR(r1.eigenvalues(0), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(r1.left_vectors.col(0).dot(v)), 1.0, 1e-14);

  EXPECT_THROW(kernel_canonicalize(Matrix::Zero(3, 3)), NumericalError);
  Matrix indefinite = Matrix::Identity(2, 2);
  indefinite(1, 1) = -1.0;
  EXPECT_THROW(kernel_canonicalize(indefinite), NumericalError);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.5;
  EXPECT_THROW(kernel_canonicalize(asym), DomainError);
}

TEST(KernelCanonicalize, LinearKernelMatchesCanonicalize) {
  Rng rng(2);
  const Matrix x = gaussian_matrix(6, 4, rng);
  const auto ke = kernel_canonicalize(gram(x, KernelSpec::linear()));
  const auto dec = canonicalize(x);
  ASSERT_EQ(ke.eigenvalues.size(), dec.rank());
  EXPECT_LE((ke.eigenvalues - dec.eigenvalues).cwiseAbs().maxCoeff(), 1e-12);
  for (Index j = 0; j < dec.rank(); ++j)
    EXPECT_NEAR(std::abs(ke.left_vectors.col(j).dot(dec.left_vectors.col(j))), 1.0, 1e-10);
}

TEST(FitKernelGct, InterpolationAndZeroResponse) {
  Rng rng(3);
  const Matrix x = gaussian_matrix(15, 4, rng);
  const Vector y = gaussian_vector(15, rng);
  const auto m = fit_kernel_gct(x, y, KernelSpec::rbf(0.5), GctConfig{});
  ASSERT_EQ(m.eigenvalues.size(), 15);
  EXPECT_LE((kernel_in_sample_fit(m) - y).cwiseAbs().maxCoeff(), 1e-8);

  const auto z = fit_kernel_gct(x, Vector::Zero(15), KernelSpec::rbf(0.5), GctConfig{0.1, 1.0});
  EXPECT_EQ(z.dual_coeffs.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(z.theta_hat.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(fit_kernel_gct(x, Vector::Zero(14), KernelSpec::linear(), GctConfig{}),
               DimensionMismatch);
}

TEST(FitKernelGct, LinearKernelReduction) {
  Rng rng(4);
  const Matrix x = gaussian_matrix(10, 16, rng);
  const Vector y = gaussian_vector(10, rng);
  const Matrix xn = gaussian_matrix(5, 16, rng);
  for (const GctConfig& c : {GctConfig{0.0, 0.0}, GctConfig{0.3, 0.0}, GctConfig{0.3, 1.0},
                             GctConfig{0.2, 0.5, ThresholdRule::hard_rule()}}) {
    const auto km = fit_kernel_gct(x, y, KernelSpec::linear(), c);
    const auto lin = fit_gct(Dataset(x, y), c);
    EXPECT_LE((predict_kernel(km, xn) - predict(lin, xn)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(PredictKernel, ConsistencyAndSpectralForm) {
  Rng rng(5);
  const Matrix x = gaussian_matrix(12, 3, rng);
  const Vector y = gaussian_vector(12, rng);
  const auto m = fit_kernel_gct(x, y, KernelSpec::rbf(0.8), GctConfig{0.05, 1.0}, 1e-10, true);
  const Vector fitted = kernel_in_sample_fit(m);
  for (Index i = 0; i < 12; ++i)
    EXPECT_NEAR(predict_kernel(m, Vector(x.row(i).transpose())), fitted(i) + *m.response_mean, 1e-12);
  for (int t = 0; t < 10; ++t) {
    const Vector p = gaussian_vector(3, rng);
    EXPECT_NEAR(predict_kernel(m, p), predict_kernel_spectral(m, p), 1e-10);
  }
  auto zero = m;
  zero.dual_coeffs.setZero();
  zero.response_mean.reset();
  EXPECT_EQ(predict_kernel(zero, Vector(gaussian_vector(3, rng))), 0.0);
  EXPECT_THROW(predict_kernel(m, Vector(Vector::Zero(2))), DimensionMismatch);
}

TEST(KernelInSampleError, Examples) {
  Rng rng(6);
  const Matrix x = gaussian_matrix(20, 5, rng);
  const Vector y = gaussian_vector(20, rng);
  const auto m = fit_kernel_gct(x, y, KernelSpec::rbf(0.5), GctConfig{0.1, 0.0});
  const Vector fitted = kernel_in_sample_fit(m);
  EXPECT_LE(kernel_in_sample_error(m, fitted).error, 1e-24);
  EXPECT_NEAR(kernel_in_sample_error(m, Vector::Zero(20)).error, fitted.squaredNorm() / 20.0, 1e-14);

  const Vector theta = gaussian_vector(m.eigenvalues.size(), rng);
  const Vector f = std::sqrt(20.0) * m.left_vectors * theta;
  const auto e = kernel_in_sample_error(m, f);
  EXPECT_NEAR(e.error, (m.theta_hat - theta).squaredNorm(), 1e-10);
  EXPECT_NEAR(e.residual_part, 0.0, 1e-12);
}

TEST(KernelEffectiveDimension, Examples) {
  Rng rng(7);
  const Matrix x = gaussian_matrix(10, 4, rng);
  const Matrix k = gram(x, KernelSpec::rbf(0.3));
  const auto eig = kernel_canonicalize(k);
  const Vector in_span = eig.left_vectors * gaussian_vector(eig.eigenvalues.size(), rng);
  EXPECT_NEAR(kernel_effective_dimension(k, in_span, 2.0), 1.0, 1e-12);
  EXPECT_NEAR(kernel_effective_dimension(k, std::sqrt(10.0) * eig.left_vectors.col(0), 0.0), 1.0,
              0.0);
  const Vector f = gaussian_vector(10, rng);
  EXPECT_NEAR(kernel_effective_dimension(k, f, 1.0),
              (eig.left_vectors.transpose() * f).cwiseAbs().sum() / f.norm(), 1e-12);
  EXPECT_THROW(kernel_effective_dimension(k, Vector::Zero(10), 1.0), DomainError);
}

TEST(KernelProperties, RepresenterAndScale) {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const Matrix x = gaussian_matrix(20, 5, rng);
    const Vector y = gaussian_vector(20, rng);
    const GctConfig c{uniform(rng, 0, 0.3), uniform(rng, 0, 2)};
    const auto m = fit_kernel_gct(x, y, KernelSpec::rbf(0.5), c);
    const Vector spectral = std::sqrt(20.0) * m.left_vectors * m.theta_hat;
    EXPECT_LE((kernel_in_sample_fit(m) - spectral).cwiseAbs().maxCoeff(), 1e-10);

    const double s = uniform(rng, 0.2, 5.0);
    const auto ms = fit_kernel_gct(x, s * y, KernelSpec::rbf(0.5), GctConfig{s * c.tau, c.phi});
    EXPECT_LE((ms.dual_coeffs - s * m.dual_coeffs).cwiseAbs().maxCoeff(),
              1e-9 * s * (1 + m.dual_coeffs.cwiseAbs().maxCoeff()));
  }
}

// Jitter far below the spectrum floor barely moves predictions (regression check).
TEST(KernelProperties, SmallJitterStable) {
  Rng rng(9);
  const Matrix x = gaussian_matrix(15, 3, rng);
  const Vector y = gaussian_vector(15, rng);
  const auto spec = KernelSpec::rbf(1.0);
  const auto m = fit_kernel_gct(x, y, spec, GctConfig{0.05, 0.0});
  const Matrix k = gram(x, spec);
  const auto e0 = kernel_canonicalize(k);
  const auto e1 = kernel_canonicalize(k + 1e-14 * Matrix::Identity(15, 15));
  ASSERT_EQ(e0.eigenvalues.size(), e1.eigenvalues.size());
  EXPECT_LE((e0.eigenvalues - e1.eigenvalues).cwiseAbs().maxCoeff(), 1e-13);
  (void)m;
}
