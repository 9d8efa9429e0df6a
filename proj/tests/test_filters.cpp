#include <gtest/gtest.h>

#include <cmath>

#include "ratelab/filters.hpp"

using namespace ratelab;

namespace {

std::vector<spectral_filter> all_filters() {
  return {spectral_filter::tikhonov(), spectral_filter::iterated_tikhonov(2), spectral_filter::iterated_tikhonov(3),
          spectral_filter::landweber(1.0), spectral_filter::cutoff()};
}

}  // namespace

TEST(Filter, TikhonovValue) { EXPECT_DOUBLE_EQ(spectral_filter::tikhonov()(1.0, 1.0), 0.5); }

TEST(Filter, LandweberGeometricSum) {
  const auto f = spectral_filter::landweber(1.0);
  // nu = 2: tau (1 + (1 - tau sigma)) = 1.5
  EXPECT_NEAR(f(0.5, 0.5), 1.5, 1e-15);
  EXPECT_NEAR(f.residual(0.5, 0.5), 0.25, 1e-15);
}

TEST(Filter, CutoffBelowThreshold) {
  EXPECT_EQ(spectral_filter::cutoff()(0.3, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(spectral_filter::cutoff()(0.5, 0.5), 2.0);
}

TEST(Filter, IteratedTikhonovClosedForm) {
  const auto f = spectral_filter::iterated_tikhonov(3);
  const double s = 0.3, l = 0.1;
  const double expect = (std::pow(s + l, 3) - std::pow(l, 3)) / (s * std::pow(s + l, 3));
  EXPECT_NEAR(f(s, l), expect, 1e-14);
}

TEST(Filter, DomainErrors) {
  const auto f = spectral_filter::tikhonov();
  EXPECT_THROW(f(0.0, 1.0), domain_error);
  EXPECT_THROW(f(1.0, 0.0), domain_error);
  EXPECT_THROW(f(-1.0, 1.0), domain_error);
  EXPECT_THROW(spectral_filter::landweber(1.0)(2.0, 0.5), domain_error);
  EXPECT_THROW(spectral_filter::iterated_tikhonov(0), parameter_error);
  EXPECT_THROW(spectral_filter::from_name("nope"), parameter_error);
}

TEST(Filter, LimitAtZero) {
  const double l = 0.2, tiny = 1e-12;
  for (const auto& f : all_filters()) EXPECT_NEAR(f.at_zero(l), f(tiny, l), 1e-6 * (1.0 + f.at_zero(l))) << f.name();
}

TEST(DeclaredConstants, Tikhonov) {
  const auto c = spectral_filter::tikhonov().declared_constants();
  EXPECT_EQ(c.D, 1.0);
  EXPECT_EQ(c.B, 1.0);
  EXPECT_EQ(c.gamma, 1.0);
  ASSERT_TRUE(c.qualification.has_value());
  EXPECT_EQ(*c.qualification, 1.0);
  EXPECT_EQ(spectral_filter::tikhonov().gamma_p(1.0), 1.0);
}

TEST(DeclaredConstants, CutoffGammaThree) {
  const auto f = spectral_filter::cutoff();
  EXPECT_FALSE(f.declared_constants().qualification.has_value());
  // grid supremum oracle for sup |r| sigma^3 at lambda = 0.1
  const double lam = 0.1;
  double sup = 0.0;
  for (const double s : geometric_grid(1e-8, 1.0, 4096)) sup = std::max(sup, f.residual(s, lam) * s * s * s);
  EXPECT_LE(sup, lam * lam * lam);
  EXPECT_GT(sup, 0.99 * lam * lam * lam);
  EXPECT_EQ(f.gamma_p(3.0), 1.0);
}

TEST(DeclaredConstants, IteratedTikhonovQualificationIsNu) {
  const auto f = spectral_filter::iterated_tikhonov(2);
  EXPECT_EQ(*f.declared_constants().qualification, 2.0);
  // sup |r| sigma^2 / lambda^2 stays bounded while sup |r| sigma^3 / lambda^3 grows as lambda shrinks
  std::vector<double> q2, q3;
  for (double lam : {1e-4, 1e-3, 1e-2, 1e-1}) {
    double s2 = 0.0, s3 = 0.0;
    for (const double s : geometric_grid(1e-8, 1.0, 2048)) {
      const double r = f.residual(s, lam);
      s2 = std::max(s2, r * std::pow(s / lam, 2));
      s3 = std::max(s3, r * std::pow(s / lam, 3));
    }
    q2.push_back(s2);
    q3.push_back(s3);
  }
  for (double v : q2) EXPECT_LE(v, 1.0 + 1e-12);
  EXPECT_GT(q3.front(), 100.0 * q3.back());
}

TEST(VerifyConstants, AllFiltersPass) {
  for (const auto& f : all_filters()) {
    const auto rep = verify_constants(f, 1.0);
    EXPECT_TRUE(rep.all_pass()) << f.name();
    for (const auto& c : rep.checks) EXPECT_TRUE(c.pass) << f.name() << ": " << c.name << " " << c.attained;
  }
}

TEST(VerifyConstants, TikhonovAttainedSigmaG) {
  const double k2 = 1.0;
  const auto rep = verify_constants(spectral_filter::tikhonov(), k2);
  EXPECT_NEAR(rep.checks[0].attained, k2 / (k2 + 1e-6), 1e-15);
  EXPECT_LT(rep.checks[0].attained, 1.0);
}

TEST(VerifyConstants, LandweberWithStepOneOverKappa) {
  const double k2 = 1.8;
  const auto rep = verify_constants(spectral_filter::landweber(1.0 / k2), k2);
  EXPECT_TRUE(rep.all_pass());
  EXPECT_LE(rep.checks[0].attained, 1.0);
}

TEST(VerifyConstants, CutoffGammaAttainedExactly) {
  const auto rep = verify_constants(spectral_filter::cutoff(), 1.0);
  EXPECT_EQ(rep.checks[2].attained, 1.0);
}

TEST(VerifyConstants, WrongConstantFails) {
  // Iterated Tikhonov with nu = 3 violates B = 1 (its B is nu).
  const auto f = spectral_filter::iterated_tikhonov(3);
  const auto rep = verify_constants(f, 1.0);
  EXPECT_GT(rep.checks[1].attained, 1.0);
  EXPECT_LE(rep.checks[1].attained, 3.0);
}

TEST(CoversIndex, Examples) {
  EXPECT_TRUE(covers_index(spectral_filter::tikhonov(), index_function::holder(0.5)));
  EXPECT_FALSE(covers_index(spectral_filter::tikhonov(), index_function::holder(1.5)));
  EXPECT_TRUE(covers_index(spectral_filter::cutoff(), index_function::holder(3.0)));
  EXPECT_TRUE(covers_index(spectral_filter::cutoff(), index_function::logarithmic(1.0, 1.0)));
  EXPECT_TRUE(covers_index(spectral_filter::landweber(1.0), index_function::holder(5.0)));
  // with the extra sqrt(t): t / (t^{1/2} t^{1/2}) = 1 is still nondecreasing, t^{3/4} is not covered
  EXPECT_TRUE(covers_index(spectral_filter::tikhonov(), index_function::holder(0.5), true));
  EXPECT_FALSE(covers_index(spectral_filter::tikhonov(), index_function::holder(0.75), true));
}

TEST(FilterProperty, ResidualIdentity) {
  const auto sg = geometric_grid(1e-8, 1.0, 256);
  const auto lg = geometric_grid(1e-6, 1.0, 256);
  for (const auto& f : all_filters())
    for (double l : lg)
      for (double s : sg) ASSERT_NEAR(f(s, l) * s + f.residual(s, l), 1.0, 1e-12) << f.name();
}

TEST(FilterProperty, IteratedOneIsTikhonov) {
  const auto a = spectral_filter::iterated_tikhonov(1);
  const auto b = spectral_filter::tikhonov();
  for (double l : geometric_grid(1e-6, 1.0, 64))
    for (double s : geometric_grid(1e-8, 1.0, 64)) {
      const double x = a(s, l), y = b(s, l);
      ASSERT_LE(std::abs(x - y), 1e-14 * y);
    }
}

TEST(FilterProperty, LandweberConvergesMonotonically) {
  const auto f = spectral_filter::landweber(1.0);
  for (double s : {1e-3, 0.1, 0.5, 0.9}) {
    double prev = 0.0;
    for (int nu = 1; nu <= 1024; nu *= 2) {
      const double v = s * f(s, 1.0 / nu);
      EXPECT_GE(v, prev);
      EXPECT_LE(v, 1.0);
      prev = v;
    }
  }
  EXPECT_NEAR(0.5 * f(0.5, 1.0 / 1024), 1.0, 1e-12);
}
