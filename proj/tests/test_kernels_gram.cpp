#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>

#include "ratelab/estimator.hpp"
#include "ratelab/kernels_gram.hpp"

using namespace ratelab;

namespace {

std::shared_ptr<const mercer_model> model_ptr(int n = 16, double b = 2.0) {
  model_params p;
  p.b = b;
  p.n_trunc = n;
  return std::make_shared<const mercer_model>(p);
}

std::vector<double> uniform_points(std::size_t m, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, two_pi);
  std::vector<double> xs(m);
  for (auto& x : xs) x = u(gen);
  return xs;
}

}  // namespace

TEST(Gram, SinglePoint) {
  const auto k = kernel::mercer(std::make_shared<const mercer_model>(mercer_model::with_spectrum({1.0}, 2.0, 1.0, 1.0)));
  const MatrixXd G = assemble_gram(k, {0.3});
  EXPECT_EQ(G.rows(), 1);
  EXPECT_DOUBLE_EQ(G(0, 0), 1.0);
}

TEST(Gram, ConstantKernelTwoPoints) {
  const auto k = kernel::mercer(std::make_shared<const mercer_model>(mercer_model::with_spectrum({1.0}, 2.0, 1.0, 1.0)));
  const MatrixXd G = assemble_gram(k, {0.3, 2.0});
  EXPECT_TRUE(G.isApprox(MatrixXd::Constant(2, 2, 0.5)));
  const auto ge = eigendecompose(G);
  EXPECT_NEAR(ge.values[0], 1.0, 1e-15);
  EXPECT_NEAR(ge.values[1], 0.0, 1e-15);
}

TEST(Gram, DuplicatePointsGiveZeroEigenvalue) {
  const auto k = kernel::gaussian_rbf(1.0);
  const auto ge = eigendecompose(assemble_gram(k, {0.5, 0.5, 2.0}));
  EXPECT_LE(ge.values[2], 1e-15);
  EXPECT_FALSE(ge.negative_warning);
}

TEST(Gram, EmptyInputRejected) {
  EXPECT_THROW(assemble_gram(kernel::gaussian_rbf(1.0), {}), data_error);
  EXPECT_THROW(kernel::gaussian_rbf(0.0), parameter_error);
}

TEST(Gram, NonFiniteRejected) {
  MatrixXd G = MatrixXd::Identity(3, 3);
  G(1, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(eigendecompose(G), data_error);
}

TEST(Gram, MatchesPointwiseKernel) {
  const auto mp = model_ptr(16);
  const auto k = kernel::mercer(mp);
  const auto xs = uniform_points(10, 4);
  const MatrixXd G = assemble_gram(k, xs);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) EXPECT_NEAR(G(i, j), mp->kernel(xs[i], xs[j]) / 10.0, 1e-14);
}

TEST(Eigendecompose, ReconstructsRandomPsd) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 50; ++k) {
    const int n = 5 + k % 20;
    MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = nd(gen);
    const MatrixXd G = A * A.transpose() / n;
    const auto ge = eigendecompose(G);
    EXPECT_LE(reconstruction_error(G, ge), 1e-12 * ge.top());
    EXPECT_LE((ge.vectors.transpose() * ge.vectors - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-12);
    for (int i = 1; i < n; ++i) EXPECT_GE(ge.values[i - 1], ge.values[i]);
  }
}

TEST(Eigendecompose, AgreesWithIndependentSolver) {
  const auto G = assemble_gram(kernel::gaussian_rbf(0.7), uniform_points(30, 2));
  const auto ge = eigendecompose(G);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(G);
  for (int i = 0; i < 30; ++i) EXPECT_NEAR(ge.values[i], std::max(es.eigenvalues()[29 - i], 0.0), 1e-13);
}

TEST(Eigendecompose, ClampsSmallNegatives) {
  MatrixXd G = MatrixXd::Zero(2, 2);
  G(0, 0) = 1.0;
  G(1, 1) = -1e-14;
  const auto ge = eigendecompose(G);
  EXPECT_EQ(ge.values[1], 0.0);
  EXPECT_NEAR(ge.clamp_magnitude, 1e-14, 1e-20);
  EXPECT_FALSE(ge.negative_warning);
  G(1, 1) = -1e-6;
  EXPECT_TRUE(eigendecompose(G).negative_warning);
}

TEST(FactoredRoute, MatchesDenseSpectrum) {
  const auto mp = model_ptr(8);
  const auto k = kernel::mercer(mp);
  const auto xs = uniform_points(40, 6);
  const auto dense = eigendecompose(assemble_gram(k, xs));
  const auto fact = spectral_decomposition(k, xs);
  EXPECT_EQ(fact.route, "factored");
  EXPECT_TRUE(fact.thin());
  ASSERT_EQ(fact.values.size(), 8);
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(fact.values[i], dense.values[i], 1e-13);
  for (int i = 8; i < 40; ++i) EXPECT_LE(dense.values[i], 1e-13);
  EXPECT_LE(reconstruction_error(assemble_gram(k, xs), fact), 1e-13);
}

TEST(FactoredRoute, FilterCoefficientsMatchDense) {
  const auto mp = model_ptr(8);
  const auto k = kernel::mercer(mp);
  const auto xs = uniform_points(40, 7);
  std::mt19937_64 gen(1);
  std::normal_distribution<double> nd;
  MatrixXd y(40, 1);
  for (int i = 0; i < 40; ++i) y(i, 0) = nd(gen);
  const auto dense = eigendecompose(assemble_gram(k, xs));
  const auto fact = spectral_decomposition(k, xs);
  for (const auto& f : {spectral_filter::tikhonov(), spectral_filter::landweber(1.0 / mp->kappa2()),
                        spectral_filter::iterated_tikhonov(2)}) {
    const MatrixXd a = filter_coefficients(dense, f, 0.05, y);
    const MatrixXd b = filter_coefficients(fact, f, 0.05, y);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-10 * (1.0 + a.cwiseAbs().maxCoeff())) << f.name();
  }
}

TEST(GramProperty, BuiltInKernelsPsd) {
  const auto mp = model_ptr(64, 1.5);
  for (const auto& k : {kernel::mercer(mp), kernel::gaussian_rbf(0.5)}) {
    const auto ge = eigendecompose(assemble_gram(k, uniform_points(80, 12)));
    EXPECT_FALSE(ge.negative_warning) << k.describe();
    EXPECT_LE(ge.clamp_magnitude, 1e-10 * ge.top());
  }
}

// Scaled Gram eigenvalues approach the operator spectrum as m grows.
TEST(GramProperty, ConvergesToOperatorSpectrum) {
  model_params p;
  const auto mp = std::make_shared<const mercer_model>(p);
  const std::size_t m = 2048;
  std::vector<std::vector<double>> rel(4);
  for (std::uint64_t s = 0; s < 16; ++s) {
    const auto ge = spectral_decomposition(*mp, mp->features(uniform_points(m, 100 + s)));
    for (int n = 1; n <= 4; ++n) rel[n - 1].push_back(std::abs(ge.values[n - 1] - mp->t(n)) / mp->t(n));
  }
  for (int n = 0; n < 4; ++n) {
    std::nth_element(rel[n].begin(), rel[n].begin() + 8, rel[n].end());
    EXPECT_LE(rel[n][8], 0.15) << "n=" << n + 1;
  }
}
