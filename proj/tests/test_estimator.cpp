#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ratelab/estimator.hpp"

using namespace ratelab;

namespace {

std::shared_ptr<const mercer_model> model_ptr(int n = 16, double b = 2.0, int d = 1) {
  model_params p;
  p.b = b;
  p.n_trunc = n;
  p.d = d;
  return std::make_shared<const mercer_model>(p);
}

kernel unit_kernel() {
  return kernel::mercer(std::make_shared<const mercer_model>(mercer_model::with_spectrum({1.0}, 2.0, 1.0, 1.0)));
}

dataset one_point(double y) {
  dataset ds;
  ds.xs = {1.0};
  ds.ys = MatrixXd::Constant(1, 1, y);
  return ds;
}

}  // namespace

TEST(Fit, SinglePointTikhonov) {
  const auto fz = fit(one_point(3.0), unit_kernel(), spectral_filter::tikhonov(), 1.0);
  EXPECT_NEAR(fz.c(0, 0), 1.5, 1e-15);
}

TEST(Fit, SinglePointCutoff) {
  const auto fz = fit(one_point(3.0), unit_kernel(), spectral_filter::cutoff(), 0.5);
  EXPECT_NEAR(fz.c(0, 0), 3.0, 1e-15);
  const auto none = fit(one_point(3.0), unit_kernel(), spectral_filter::cutoff(), 2.0);
  EXPECT_EQ(none.c(0, 0), 0.0);
}

TEST(Fit, ZeroResponseZeroCoefficients) {
  const auto fz = fit(one_point(0.0), unit_kernel(), spectral_filter::tikhonov(), 0.1);
  EXPECT_EQ(fz.c(0, 0), 0.0);
}

TEST(Fit, PredictSinglePoint) {
  const auto fz = fit(one_point(3.0), unit_kernel(), spectral_filter::tikhonov(), 1.0);
  EXPECT_NEAR(fz.predict(5.0)[0], 1.5, 1e-15);
}

TEST(Fit, BadLambda) {
  EXPECT_THROW(fit(one_point(1.0), unit_kernel(), spectral_filter::tikhonov(), 0.0), parameter_error);
  EXPECT_THROW(fit_tikhonov_direct(one_point(1.0), unit_kernel(), -1.0), parameter_error);
}

TEST(Fit, LargeLambdaShrinksToZero) {
  const auto mp = model_ptr(16);
  const auto f = target_from_source(*mp, index_function::holder(0.5), power_law_source(*mp, 1.0), 1.0);
  const auto ds = sample_dataset(*mp, f, noise_spec::gaussian(0.5, 1), 30, 3);
  const auto fz = fit(ds, kernel::mercer(mp), spectral_filter::tikhonov(), 1e6);
  EXPECT_LE(fz.c.cwiseAbs().maxCoeff(), ds.ys.cwiseAbs().maxCoeff() / (30.0 * 1e6) * (1.0 + 1e-9));
}

TEST(FitProperty, DirectSolveMatchesSpectral) {
  std::mt19937_64 gen(17);
  for (int inst = 0; inst < 20; ++inst) {
    const int d = 1 + inst % 3;
    const std::size_t m = 4 + (inst * 3) % 61;
    const double lam = std::pow(10.0, -1.0 - (inst % 4));
    const auto mp = model_ptr(16, 2.0, d);
    const auto f = target_from_source(*mp, index_function::holder(0.5), power_law_source(*mp, 1.0), 1.0);
    const auto ds = sample_dataset(*mp, f, noise_spec::gaussian(0.5, d), m, gen());
    const auto k = kernel::mercer(mp);
    const auto a = fit(ds, k, spectral_filter::tikhonov(), lam);
    const auto b = fit_tikhonov_direct(ds, k, lam);
    const double scale = std::max(1.0, b.c.cwiseAbs().maxCoeff());
    EXPECT_LE((a.c - b.c).cwiseAbs().maxCoeff(), 1e-10 * scale) << "m=" << m << " d=" << d;
  }
}

TEST(FitProperty, ShrinkageMonotoneInLambda) {
  const auto mp = model_ptr(16);
  const auto f = target_from_source(*mp, index_function::holder(0.5), power_law_source(*mp, 1.0), 1.0);
  const auto ds = sample_dataset(*mp, f, noise_spec::gaussian(0.5, 1), 40, 21);
  const auto k = kernel::mercer(mp);
  const auto ge = spectral_decomposition(k, ds.xs);
  double prev = std::numeric_limits<double>::infinity();
  for (double lam : geometric_grid(1e-4, 1.0, 12)) {
    const auto fz = fit(ds, k, spectral_filter::tikhonov(), lam, &ge);
    const double hn = h_coefficients(*mp, mp->features(ds.xs), fz.c).norm();
    EXPECT_LE(hn, prev * (1.0 + 1e-12));
    prev = hn;
  }
}

TEST(ErrorNorms, ZeroFitGivesTargetNorms) {
  const auto mp = model_ptr(16);
  const auto f = target_from_source(*mp, index_function::holder(0.5), power_law_source(*mp, 1.0), 1.0);
  const auto ds = sample_dataset(*mp, f, noise_spec::gaussian(0.0, 1), 10, 1);
  const MatrixXd zero = MatrixXd::Zero(10, 1);
  const auto nr = error_norms(*mp, mp->features(ds.xs), zero, f);
  const auto tn = norms_of_expansion(*mp, f.coefficients());
  EXPECT_NEAR(nr.rho, tn.rho, 1e-15);
  EXPECT_NEAR(nr.h, tn.h, 1e-15);
  EXPECT_LE(nr.rho, std::sqrt(mp->kappa2()) * nr.h);
}

TEST(ErrorNorms, SingleCoefficientByHand) {
  const auto mp = model_ptr(8);
  MatrixXd g = MatrixXd::Zero(8, 1);
  const auto f = target_from_source(*mp, index_function::holder(0.5), g, 1.0);
  // one point at x = 0, c = 1: H-coefficients sqrt(t_n) e~_n(0)
  const std::vector<double> xs = {0.0};
  const auto nr = error_norms(*mp, mp->features(xs), MatrixXd::Constant(1, 1, 1.0), f);
  double h2 = 0.0, r2 = 0.0;
  for (int n = 1; n <= 8; ++n) {
    const double e = basis_value(n, 0.0);
    h2 += mp->t(n) * e * e;
    r2 += mp->t(n) * mp->t(n) * e * e;
  }
  EXPECT_NEAR(nr.h, std::sqrt(h2), 1e-15);
  EXPECT_NEAR(nr.rho, std::sqrt(r2), 1e-15);
  EXPECT_NEAR(nr.h * nr.h, mp->kernel(0.0, 0.0), 1e-14);
}

TEST(ErrorNorms, NoiselessCutoffInterpolates) {
  const auto mp = model_ptr(8);
  const auto f = target_from_source(*mp, index_function::holder(0.5), power_law_source(*mp, 1.0), 1.0);
  const auto ds = sample_dataset(*mp, f, noise_spec::gaussian(0.0, 1), 64, 2);
  const auto fz = fit(ds, kernel::mercer(mp), spectral_filter::cutoff(), 1e-8);
  const auto nr = error_norms(fz, f);
  EXPECT_LE(nr.rho, 1e-6);
  EXPECT_LE(nr.h, 1e-6);
}

TEST(ErrorNorms, RbfKernelUnsupported) {
  const auto mp = model_ptr(8);
  const auto f = target_from_source(*mp, index_function::holder(0.5), power_law_source(*mp, 1.0), 1.0);
  const auto ds = sample_dataset(*mp, f, noise_spec::gaussian(0.1, 1), 10, 2);
  const auto fz = fit(ds, kernel::gaussian_rbf(1.0), spectral_filter::tikhonov(), 0.1);
  EXPECT_THROW(error_norms(fz, f), unsupported_norm_error);
  EXPECT_TRUE(std::isfinite(monte_carlo_rho_error(fz, f, 1000, 1)));
}

TEST(ErrorNorms, MonteCarloAgreesWithExact) {
  const auto mp = model_ptr(16);
  const auto f = target_from_source(*mp, index_function::holder(0.5), power_law_source(*mp, 1.0), 1.0);
  const auto ds = sample_dataset(*mp, f, noise_spec::gaussian(0.5, 1), 64, 9);
  const auto fz = fit(ds, kernel::mercer(mp), spectral_filter::tikhonov(), 0.05);
  const double exact = error_norms(fz, f).rho;
  const double mc = monte_carlo_rho_error(fz, f, 40000, 10);
  EXPECT_NEAR(mc, exact, 0.05 * exact);
}

// Without noise the error tracks the population bias ||f_lambda - f_H||.
TEST(ErrorNormsProperty, NoiselessBiasWithinFactorThree) {
  const auto mp = model_ptr(128);
  const auto phi = index_function::holder(0.5);
  const MatrixXd g = power_law_source(*mp, 1.0);
  const auto f = target_from_source(*mp, phi, g, 1.0);
  const auto k = kernel::mercer(mp);
  for (double lam : {1e-3, 1e-2, 1e-1}) {
    const double bias = approx_error_norms(*mp, phi, g, 1.0, lam).rho;
    std::vector<double> errs;
    for (std::uint64_t s = 0; s < 8; ++s) {
      const auto ds = sample_dataset(*mp, f, noise_spec::gaussian(0.0, 1), 4096, 50 + s);
      errs.push_back(error_norms(fit(ds, k, spectral_filter::tikhonov(), lam), f).rho);
    }
    std::nth_element(errs.begin(), errs.begin() + 4, errs.end());
    EXPECT_LE(errs[4], 3.0 * bias) << "lambda=" << lam;
    EXPECT_GE(errs[4], bias / 3.0) << "lambda=" << lam;
  }
}
