#pragma once

// Effective dimension, a-priori parameter choices, the sample-size condition and rate exponents.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ratelab/errors.hpp"
#include "ratelab/index_fn.hpp"
#include "ratelab/mercer_model.hpp"

namespace ratelab {

/// N(lambda) = channels * sum_n t_n / (t_n + lambda).
inline double effective_dimension(const VectorXd& t, double lambda, int channels = 1) {
  if (!(lambda > 0.0)) throw parameter_error("effective_dimension: lambda must be > 0");
  return channels * (t.array() / (t.array() + lambda)).sum();
}

inline double effective_dimension(const mercer_model& model, double lambda) {
  return effective_dimension(model.eigenvalues(), lambda, model.d());
}

/// d beta b/(b-1) lambda^{-1/b}; requires b > 1.
inline double effdim_polynomial_bound(const mercer_model& model, double lambda) {
  const double b = model.b();
  return model.d() * model.beta() * b / (b - 1.0) * std::pow(lambda, -1.0 / b);
}

struct effdim_point {
  double lambda = 0.0;
  double value = 0.0;
  double poly_bound = 0.0;  ///< 0 when skipped (b <= 1)
  double crude_bound = 0.0;
  bool poly_ok = true;
  bool crude_ok = true;
};

struct effdim_report {
  bool polynomial_checked = false;
  std::vector<effdim_point> points;
  double max_poly_ratio = 0.0;
  double max_crude_ratio = 0.0;
  bool all_ok() const {
    return std::all_of(points.begin(), points.end(), [](const auto& p) { return p.poly_ok && p.crude_ok; });
  }
};

inline effdim_report effdim_bound_check(const mercer_model& model, const std::vector<double>& lambda_grid) {
  effdim_report rep;
  rep.polynomial_checked = model.b() > 1.0;
  for (double lam : lambda_grid) {
    effdim_point p;
    p.lambda = lam;
    p.value = effective_dimension(model, lam);
    p.crude_bound = model.kappa2() / lam;
    p.crude_ok = p.value <= p.crude_bound;
    rep.max_crude_ratio = std::max(rep.max_crude_ratio, p.value / p.crude_bound);
    if (rep.polynomial_checked) {
      p.poly_bound = effdim_polynomial_bound(model, lam);
      p.poly_ok = p.value <= p.poly_bound;
      rep.max_poly_ratio = std::max(rep.max_poly_ratio, p.value / p.poly_bound);
    }
    rep.points.push_back(p);
  }
  return rep;
}

enum class lambda_rule { psi, theta, holder_psi_closed, holder_theta_closed };

inline lambda_rule lambda_rule_from_name(const std::string& s) {
  if (s == "psi") return lambda_rule::psi;
  if (s == "theta") return lambda_rule::theta;
  if (s == "holder_psi_closed") return lambda_rule::holder_psi_closed;
  if (s == "holder_theta_closed") return lambda_rule::holder_theta_closed;
  throw parameter_error("unknown parameter rule '" + s + "'");
}

inline std::string lambda_rule_name(lambda_rule r) {
  switch (r) {
    case lambda_rule::psi: return "psi";
    case lambda_rule::theta: return "theta";
    case lambda_rule::holder_psi_closed: return "holder_psi_closed";
    case lambda_rule::holder_theta_closed: return "holder_theta_closed";
  }
  return "?";
}

struct lambda_choice {
  double lambda = 0.0;
  bool clipped = false;  ///< the unconstrained solution exceeded the upper end of the range
};

/// psi: Psi^{-1}(m^{-1/2}); theta: Theta^{-1}(m^{-1/2}); closed forms for Hölder phi.
/// The result is restricted to (0, min(1, kappa^2)].
inline lambda_choice choose_lambda(lambda_rule rule, const rate_maps& maps, double m) {
  if (!(m >= 2.0)) throw parameter_error("choose_lambda: m must be >= 2");
  const double hi = std::min(1.0, maps.phi().domain_max());
  const double y = 1.0 / std::sqrt(m);
  lambda_choice out;
  double raw = 0.0;
  if (rule == lambda_rule::psi || rule == lambda_rule::theta) {
    auto F = [&](double t) { return rule == lambda_rule::psi ? maps.big_psi(t) : maps.theta(t); };
    if (y >= F(hi)) {
      out.lambda = hi;
      out.clipped = y > F(hi) * (1.0 + default_inversion_tol);
      return out;
    }
    raw = invert_monotone(F, y, hi * 1e-8, hi);
  } else {
    const auto r = maps.phi().holder_exponent();
    if (!r) throw rule_mismatch_error("choose_lambda: closed-form rule needs a Hölder index function");
    const double b = maps.b();
    const double e = rule == lambda_rule::holder_psi_closed ? b / (2.0 * b * *r + b + 1.0) : b / (2.0 * b * *r + 1.0);
    raw = std::pow(m, -e);
  }
  out.clipped = raw > hi;
  out.lambda = std::min(raw, hi);
  return out;
}

struct theorem_condition {
  bool holds = false;
  double lhs = 0.0;  ///< sqrt(m) lambda
  double rhs = 0.0;  ///< 8 kappa^2 log(4/eta)
  double margin = 0.0;
};

/// sqrt(m) lambda >= 8 kappa^2 log(4/eta). eta is accepted on (0, 4) so that log(4/eta) > 0.
inline theorem_condition check_theorem_condition(double m, double lambda, double kappa, double eta) {
  if (!(m > 0.0) || !(lambda > 0.0) || !(kappa > 0.0)) throw parameter_error("theorem condition: m, lambda, kappa > 0");
  if (!(eta > 0.0) || !(eta < 4.0)) throw parameter_error("theorem condition: eta must lie in (0, 4)");
  theorem_condition c;
  c.lhs = std::sqrt(m) * lambda;
  c.rhs = 8.0 * kappa * kappa * std::log(4.0 / eta);
  c.margin = c.lhs / c.rhs;
  c.holds = c.lhs >= c.rhs;
  return c;
}

/// Decay exponents in m (errors behave like m^{-exponent}).
struct rate_exponents {
  double b = 0.0;
  double r = 0.0;
  double rkhs_upper = 0.0;
  double l2_upper_theta = 0.0;
  double l2_upper_psi = 0.0;
  double l2_lower = 0.0;
  double rkhs_lower = 0.0;
  bool optimal = false;  ///< upper and lower exponents coincide

  double individual_l2(double eps, double r1, double r2) const {
    const double c1 = 2.0 * r1 + 1.0, c2 = 2.0 * r2 + 1.0;
    return (b * c2 + eps) / (b * c1 + eps + 1.0);
  }
  /// As stated, unverified.
  double individual_rkhs(double eps, double r1, double r2) const {
    const double c1 = 2.0 * r1 + 1.0, c2 = 2.0 * r2 + 1.0;
    return (b * c2 - b + eps) / (b * c1 + eps + 1.0);
  }
};

inline constexpr double exponent_identity_tol = 1e-12;

/// Upper exponents from the closed forms; lower exponents by composing the power laws
/// psi o Psi^{-1} and phi o Psi^{-1} at m^{-1/2}, which is how the lower bounds are built.
inline rate_exponents make_rate_exponents(double b, double r) {
  if (!(b >= 1.0)) throw parameter_error("rate_exponents: b must be >= 1");
  if (!(r >= 0.0)) throw parameter_error("rate_exponents: r must be >= 0");
  rate_exponents e;
  e.b = b;
  e.r = r;
  e.rkhs_upper = b * r / (2.0 * b * r + b + 1.0);
  e.l2_upper_theta = b * r / (2.0 * b * r + 1.0);
  e.l2_upper_psi = (2.0 * b * r + b) / (4.0 * b * r + 2.0 * b + 2.0);
  const double big_psi_power = r + 0.5 + 0.5 / b;
  e.l2_lower = 0.5 * (r + 0.5) / big_psi_power;
  e.rkhs_lower = 0.5 * r / big_psi_power;
  e.optimal = std::abs(e.rkhs_upper - e.rkhs_lower) <= exponent_identity_tol &&
              std::abs(e.l2_upper_psi - e.l2_lower) <= exponent_identity_tol;
  return e;
}

}  // namespace ratelab
