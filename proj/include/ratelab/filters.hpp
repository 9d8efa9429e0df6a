#pragma once

// Spectral regularization filters g_lambda(sigma) and grid checks of their constants.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ratelab/errors.hpp"
#include "ratelab/index_fn.hpp"

namespace ratelab {

enum class filter_kind { tikhonov, iterated_tikhonov, landweber, cutoff };

/// (D, B, gamma) and the qualification. An empty qualification means unbounded.
struct filter_constants {
  double D = 1.0;
  double B = 1.0;
  double gamma = 1.0;
  std::optional<double> qualification;
};

class spectral_filter {
 public:
  static spectral_filter tikhonov() { return spectral_filter(filter_kind::tikhonov, 1, 0.0); }

  static spectral_filter iterated_tikhonov(int nu) {
    if (nu < 1) throw parameter_error("iterated_tikhonov: nu must be >= 1");
    return spectral_filter(filter_kind::iterated_tikhonov, nu, 0.0);
  }

  /// Landweber with step tau; lambda is mapped to nu = ceil(1/lambda) iterations.
  static spectral_filter landweber(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw parameter_error("landweber: tau must be > 0");
    return spectral_filter(filter_kind::landweber, 0, tau);
  }

  static spectral_filter cutoff() { return spectral_filter(filter_kind::cutoff, 0, 0.0); }

  static spectral_filter from_name(const std::string& name, int nu = 2, double tau = 1.0) {
    if (name == "tikhonov") return tikhonov();
    if (name == "iterated_tikhonov") return iterated_tikhonov(nu);
    if (name == "landweber") return landweber(tau);
    if (name == "cutoff" || name == "spectral_cutoff") return cutoff();
    throw parameter_error("unknown filter '" + name + "'");
  }

  filter_kind kind() const { return kind_; }
  int nu() const { return nu_; }
  double tau() const { return tau_; }

  std::string name() const {
    switch (kind_) {
      case filter_kind::tikhonov: return "tikhonov";
      case filter_kind::iterated_tikhonov: return "iterated_tikhonov";
      case filter_kind::landweber: return "landweber";
      case filter_kind::cutoff: return "cutoff";
    }
    return "?";
  }

  static double landweber_steps(double lambda) { return std::ceil(1.0 / lambda); }

  /// g_lambda(sigma) for sigma > 0.
  double operator()(double sigma, double lambda) const {
    check_args(sigma, lambda);
    switch (kind_) {
      case filter_kind::tikhonov: return 1.0 / (sigma + lambda);
      case filter_kind::iterated_tikhonov:
        return -std::expm1(nu_ * std::log1p(-sigma / (sigma + lambda))) / sigma;
      case filter_kind::landweber:
        return -std::expm1(landweber_steps(lambda) * std::log1p(-tau_ * sigma)) / sigma;
      case filter_kind::cutoff: return sigma >= lambda ? 1.0 / sigma : 0.0;
    }
    return 0.0;
  }

  /// r_lambda(sigma) = 1 - sigma g_lambda(sigma), computed without cancellation.
  double residual(double sigma, double lambda) const {
    check_args(sigma, lambda);
    switch (kind_) {
      case filter_kind::tikhonov: return lambda / (sigma + lambda);
      case filter_kind::iterated_tikhonov: return std::pow(lambda / (sigma + lambda), nu_);
      case filter_kind::landweber: return std::exp(landweber_steps(lambda) * std::log1p(-tau_ * sigma));
      case filter_kind::cutoff: return sigma >= lambda ? 0.0 : 1.0;
    }
    return 1.0;
  }

  /// Limit of g_lambda(sigma) as sigma -> 0+, used on null directions of a Gram matrix.
  double at_zero(double lambda) const {
    if (!(lambda > 0.0)) throw domain_error("filter: lambda must be > 0");
    switch (kind_) {
      case filter_kind::tikhonov: return 1.0 / lambda;
      case filter_kind::iterated_tikhonov: return nu_ / lambda;
      case filter_kind::landweber: return tau_ * landweber_steps(lambda);
      case filter_kind::cutoff: return 0.0;
    }
    return 0.0;
  }

  /// g evaluated on a clamped spectrum value (sigma >= 0).
  double on_spectrum(double sigma, double lambda) const {
    return sigma > 0.0 ? (*this)(sigma, lambda) : at_zero(lambda);
  }

  filter_constants declared_constants() const {
    switch (kind_) {
      case filter_kind::tikhonov: return {1.0, 1.0, 1.0, 1.0};
      case filter_kind::iterated_tikhonov: return {1.0, static_cast<double>(nu_), 1.0, static_cast<double>(nu_)};
      // tau * ceil(1/lambda) <= 2 tau / lambda holds for lambda <= 1.
      case filter_kind::landweber: return {1.0, 2.0 * tau_, 1.0, std::nullopt};
      case filter_kind::cutoff: return {1.0, 1.0, 1.0, std::nullopt};
    }
    return {};
  }

  /// gamma_p in sup |r_lambda(sigma)| sigma^p <= gamma_p lambda^p.
  double gamma_p(double p) const {
    if (kind_ == filter_kind::landweber) return std::pow(p / (std::exp(1.0) * tau_), p);
    return 1.0;
  }

 private:
  spectral_filter(filter_kind k, int nu, double tau) : kind_(k), nu_(nu), tau_(tau) {}

  void check_args(double sigma, double lambda) const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw domain_error("filter: sigma must be > 0");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw domain_error("filter: lambda must be > 0");
    if (kind_ == filter_kind::landweber && tau_ * sigma > 1.0 + 1e-12)
      throw domain_error("landweber: tau * sigma > 1, step too large for the spectrum");
  }

  filter_kind kind_;
  int nu_ = 0;
  double tau_ = 0.0;
};

struct inequality_check {
  std::string name;
  double attained = 0.0;  ///< supremum of the normalized quantity over the grid
  double declared = 0.0;
  bool pass = false;
};

struct filter_verification {
  std::string filter;
  std::vector<inequality_check> checks;
  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
  }
};

inline constexpr double filter_slack = 1e-9;
inline constexpr std::size_t filter_grid_points = 256;

/// Attained suprema of |sigma g|, lambda |g|, |r| and |r| sigma^p / lambda^p versus the declared constants.
inline filter_verification verify_constants(const spectral_filter& f, const std::vector<double>& sigma_grid,
                                            const std::vector<double>& lambda_grid) {
  const auto c = f.declared_constants();
  std::vector<double> powers;
  if (c.qualification)
    powers.push_back(*c.qualification);
  else
    powers = {1.0, 2.0, 3.0};

  double sup_sg = 0.0, sup_lg = 0.0, sup_r = 0.0;
  std::vector<double> sup_q(powers.size(), 0.0);
  for (double lam : lambda_grid) {
    for (double s : sigma_grid) {
      const double g = f(s, lam);
      const double r = f.residual(s, lam);
      sup_sg = std::max(sup_sg, std::abs(s * g));
      sup_lg = std::max(sup_lg, std::abs(g) * lam);
      sup_r = std::max(sup_r, std::abs(r));
      for (std::size_t k = 0; k < powers.size(); ++k)
        sup_q[k] = std::max(sup_q[k], std::abs(r) * std::pow(s / lam, powers[k]));
    }
  }
  filter_verification rep;
  rep.filter = f.name();
  auto push = [&](std::string name, double attained, double declared) {
    rep.checks.push_back({std::move(name), attained, declared, attained <= declared * (1.0 + filter_slack)});
  };
  push("|sigma g| <= D", sup_sg, c.D);
  push("|g| <= B/lambda", sup_lg, c.B);
  push("|r| <= gamma", sup_r, c.gamma);
  for (std::size_t k = 0; k < powers.size(); ++k) {
    const double p = powers[k];
    push("|r| sigma^" + std::to_string(static_cast<int>(p)) + " <= gamma_p lambda^p", sup_q[k], f.gamma_p(p));
  }
  return rep;
}

/// Standard grids: sigma on [1e-8 kappa^2, kappa^2], lambda on [1e-6, 1].
inline filter_verification verify_constants(const spectral_filter& f, double kappa2,
                                            std::size_t points = filter_grid_points) {
  return verify_constants(f, geometric_grid(1e-8 * kappa2, kappa2, points), geometric_grid(1e-6, 1.0, points));
}

/// True iff the qualification covers phi: t^p/phi(t) (or t^p/(phi(t) sqrt t)) is nondecreasing.
inline bool covers_index(const spectral_filter& f, const index_function& phi, bool extra_sqrt = false) {
  const auto q = f.declared_constants().qualification;
  if (!q) return true;
  const double p = *q;
  const auto grid = geometric_grid(phi.domain_max() * monotone_grid_span, phi.domain_max(), default_monotone_grid);
  return !first_decrease(grid, [&](double t) {
    const double denom = extra_sqrt ? phi(t) * std::sqrt(t) : phi(t);
    return std::pow(t, p) / denom;
  });
}

}  // namespace ratelab
