#pragma once

// Index functions phi on [0, kappa^2] describing target smoothness, the derived
// rate maps Psi, Theta, psi, and a bracketing geometric bisection used to invert them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ratelab/errors.hpp"

namespace ratelab {

/// Logarithmic factors are frozen at this point to avoid the singularity at t = 1.
inline constexpr double log_freeze_point = 0.99;
inline constexpr std::size_t default_monotone_grid = 512;
inline constexpr double monotone_grid_span = 1e-12;
inline constexpr double monotone_rel_tol = 1e-12;

/// One multiplicative factor of an index function.
struct index_factor {
  enum class kind { holder, log };
  kind type = kind::holder;
  double exponent = 0.0;   ///< r for holder, p for log
  double log_power = 0.0;  ///< nu for log

  double operator()(double t) const {
    if (type == kind::holder) return exponent == 0.0 ? 1.0 : std::pow(t, exponent);
    const double frozen = std::min(t, log_freeze_point);
    return std::pow(t, exponent) * std::pow(std::log(1.0 / frozen), -log_power);
  }
};

/// First grid pair (t_i, t_{i+1}) at which a map decreased.
struct monotone_violation {
  double t_left = 0.0;
  double t_right = 0.0;
  double value_left = 0.0;
  double value_right = 0.0;
};

struct monotone_check {
  std::string map;
  bool nondecreasing = true;
  std::optional<monotone_violation> violation;
};

/// Report of check_monotone_flags: phi, t/phi, sqrt(t)/phi, phi*sqrt(t) in that order.
struct monotone_report {
  std::vector<monotone_check> checks;
  std::size_t grid_size = 0;

  const monotone_check& get(const std::string& name) const {
    for (const auto& c : checks)
      if (c.map == name) return c;
    throw contract_error("monotone_report: unknown map '" + name + "'");
  }
};

struct monotone_flags {
  bool phi_nondecreasing = false;
  bool t_over_phi_nondecreasing = false;
  bool sqrt_t_over_phi_nondecreasing = false;
  bool phi_times_sqrt_t_nondecreasing = false;
};

/// Geometric grid of n points on [hi * span, hi].
inline std::vector<double> geometric_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi >= lo) || n < 2) throw domain_error("geometric_grid: need 0 < lo <= hi and n >= 2");
  std::vector<double> g(n);
  const double step = std::log(hi / lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo * std::exp(step * static_cast<double>(i));
  g.back() = hi;
  return g;
}

/// First decrease of f along an increasing grid, with relative slack tol.
template <typename F>
std::optional<monotone_violation> first_decrease(const std::vector<double>& grid, F&& f,
                                                 double tol = monotone_rel_tol) {
  double prev = f(grid.front());
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double cur = f(grid[i]);
    if (cur < prev - tol * std::abs(prev))
      return monotone_violation{grid[i - 1], grid[i], prev, cur};
    prev = cur;
  }
  return std::nullopt;
}

/// A monotone index function phi: product of Hölder factors t^r and logarithmic
/// factors t^p log^{-nu}(1/t). Immutable once built.
class index_function {
 public:
  static index_function holder(double r, double domain_max = 1.0) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw parameter_error("holder index: exponent r must be >= 0");
    return index_function({index_factor{index_factor::kind::holder, r, 0.0}}, domain_max);
  }

  static index_function logarithmic(double p, double nu, double domain_max = 1.0) {
    if (!std::isfinite(p) || !std::isfinite(nu)) throw parameter_error("log index: p and nu must be finite");
    return index_function({index_factor{index_factor::kind::log, p, nu}}, domain_max);
  }

  static index_function product(const std::vector<index_function>& parts) {
    if (parts.empty()) throw parameter_error("product index: no factors");
    std::vector<index_factor> all;
    double dom = std::numeric_limits<double>::infinity();
    for (const auto& p : parts) {
      all.insert(all.end(), p.factors_.begin(), p.factors_.end());
      dom = std::min(dom, p.domain_max_);
    }
    return index_function(std::move(all), dom);
  }

  /// Same factors on a different spectrum bound (e.g. a model's kappa^2).
  index_function with_domain(double domain_max) const { return index_function(factors_, domain_max); }

  /// phi(t); exactly 0 at t = 0.
  double operator()(double t) const {
    if (!(t >= 0.0) || t > domain_max_ * (1.0 + 1e-12))
      throw domain_error("index function evaluated outside [0, " + std::to_string(domain_max_) + "]: t=" +
                         std::to_string(t));
    if (t == 0.0) return 0.0;
    double v = 1.0;
    for (const auto& f : factors_) v *= f(t);
    return v;
  }

  double domain_max() const { return domain_max_; }
  const monotone_flags& flags() const { return flags_; }
  const std::vector<index_factor>& factors() const { return factors_; }

  /// Total Hölder exponent when every factor is Hölder, nullopt otherwise.
  std::optional<double> holder_exponent() const {
    double r = 0.0;
    for (const auto& f : factors_) {
      if (f.type != index_factor::kind::holder) return std::nullopt;
      r += f.exponent;
    }
    return r;
  }

  std::string describe() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      if (i) os << " * ";
      const auto& f = factors_[i];
      if (f.type == index_factor::kind::holder)
        os << "t^" << f.exponent;
      else
        os << "t^" << f.exponent << " log^-" << f.log_power << "(1/t)";
    }
    return os.str();
  }

 private:
  index_function(std::vector<index_factor> factors, double domain_max)
      : factors_(std::move(factors)), domain_max_(domain_max) {
    if (!(domain_max_ > 0.0) || !std::isfinite(domain_max_))
      throw parameter_error("index function: domain_max (kappa^2) must be positive and finite");
    const auto grid = geometric_grid(domain_max_ * monotone_grid_span, domain_max_, default_monotone_grid);
    for (double t : grid) {
      const double v = (*this)(t);
      if (!(v > 0.0) || !std::isfinite(v))
        throw parameter_error("index function " + describe() + " is not positive and finite on (0, kappa^2]");
    }
    auto ev = [this](double t) { return (*this)(t); };
    flags_.phi_nondecreasing = !first_decrease(grid, ev);
    flags_.t_over_phi_nondecreasing = !first_decrease(grid, [&](double t) { return t / ev(t); });
    flags_.sqrt_t_over_phi_nondecreasing = !first_decrease(grid, [&](double t) { return std::sqrt(t) / ev(t); });
    flags_.phi_times_sqrt_t_nondecreasing = !first_decrease(grid, [&](double t) { return ev(t) * std::sqrt(t); });
    if (!flags_.phi_nondecreasing) throw parameter_error("index function " + describe() + " is not nondecreasing");
  }

  std::vector<index_factor> factors_;
  double domain_max_ = 1.0;
  monotone_flags flags_{};
};

/// Checks phi, t/phi, sqrt(t)/phi and phi*sqrt(t) on a geometric grid over [kappa^2 1e-12, kappa^2].
inline monotone_report check_monotone_flags(const index_function& phi, std::size_t grid_size = default_monotone_grid) {
  if (grid_size < 64) throw parameter_error("check_monotone_flags: grid_size must be >= 64");
  const auto grid = geometric_grid(phi.domain_max() * monotone_grid_span, phi.domain_max(), grid_size);
  monotone_report rep;
  rep.grid_size = grid_size;
  auto add = [&](std::string name, auto&& f) {
    auto v = first_decrease(grid, f);
    rep.checks.push_back(monotone_check{std::move(name), !v.has_value(), v});
  };
  add("phi", [&](double t) { return phi(t); });
  add("t/phi", [&](double t) { return t / phi(t); });
  add("sqrt(t)/phi", [&](double t) { return std::sqrt(t) / phi(t); });
  add("phi*sqrt(t)", [&](double t) { return phi(t) * std::sqrt(t); });
  return rep;
}

/// Psi(t) = t^{1/2 + 1/(2b)} phi(t), Theta(t) = t^{1/(2b)} phi(t), psi(t) = t^{1/2} phi(t).
class rate_maps {
 public:
  rate_maps(index_function phi, double b) : phi_(std::move(phi)), b_(b) {
    if (!(b > 0.0) || !std::isfinite(b)) throw parameter_error("rate maps: decay exponent b must be > 0");
    below_decay_regime_ = b <= 1.0;
  }

  double big_psi(double t) const { return std::pow(t, 0.5 + 0.5 / b_) * phi_(t); }
  double theta(double t) const { return std::pow(t, 0.5 / b_) * phi_(t); }
  double small_psi(double t) const { return std::sqrt(t) * phi_(t); }

  double b() const { return b_; }
  const index_function& phi() const { return phi_; }
  /// True for b <= 1, where the polynomial effective-dimension bound is unavailable.
  bool below_decay_regime() const { return below_decay_regime_; }

 private:
  index_function phi_;
  double b_;
  bool below_decay_regime_ = false;
};

inline rate_maps make_rate_maps(const index_function& phi, double b) { return rate_maps(phi, b); }

inline constexpr double inversion_floor = 1e-300;
inline constexpr double default_inversion_tol = 1e-10;
inline constexpr int default_inversion_iterations = 200;

/// Solves F(t) = y for an increasing F on (lo, hi] by geometric bisection.
/// The lower end is pushed down towards 1e-300 until F(lo) <= y.
inline double invert_monotone(const std::function<double(double)>& F, double y, double lo, double hi,
                              double rel_tol = default_inversion_tol,
                              int max_iterations = default_inversion_iterations) {
  if (!(y > 0.0) || !std::isfinite(y)) throw domain_error("invert_monotone: target must be positive and finite");
  if (!(lo > 0.0) || !(hi > lo)) throw domain_error("invert_monotone: need 0 < lo < hi");
  double f_lo = F(lo);
  const double f_hi = F(hi);
  if (f_lo > f_hi) throw contract_error("invert_monotone: F(lo) > F(hi), map is not increasing on the bracket");
  if (std::abs(f_hi - y) <= rel_tol * y) return hi;
  if (y > f_hi) throw domain_error("invert_monotone: target above attainable range F(hi)");
  while (f_lo > y) {
    if (lo <= inversion_floor)
      throw underflow_error("invert_monotone: target below attainable range, bracket floor 1e-300 reached");
    hi = lo;
    lo = std::max(lo * 1e-4, inversion_floor);
    f_lo = F(lo);
  }
  if (std::abs(f_lo - y) <= rel_tol * y) return lo;

  double mid = std::sqrt(lo * hi);
  for (int it = 0; it < max_iterations; ++it) {
    mid = std::sqrt(lo * hi);
    const double f_mid = F(mid);
    if (std::abs(f_mid - y) <= rel_tol * y) return mid;
    if (f_mid < y)
      lo = mid;
    else
      hi = mid;
    if (hi / lo - 1.0 < 4.0 * std::numeric_limits<double>::epsilon()) return mid;
  }
  return mid;
}

}  // namespace ratelab
