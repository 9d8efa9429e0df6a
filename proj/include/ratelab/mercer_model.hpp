#pragma once

// Synthetic Mercer model on X = [0, 2pi] with a trigonometric eigenbasis, targets
// under a general source condition, noise models and the dataset sampler.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ratelab/errors.hpp"
#include "ratelab/index_fn.hpp"
#include "ratelab/rng.hpp"

namespace ratelab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr std::size_t kappa_grid_points = 8192;

enum class spectrum_rule { lower, midpoint, upper, explicit_values };

inline spectrum_rule spectrum_rule_from_name(const std::string& s) {
  if (s == "lower") return spectrum_rule::lower;
  if (s == "midpoint") return spectrum_rule::midpoint;
  if (s == "upper") return spectrum_rule::upper;
  if (s == "explicit") return spectrum_rule::explicit_values;
  throw parameter_error("unknown spectrum_rule '" + s + "'");
}

inline std::string spectrum_rule_name(spectrum_rule r) {
  switch (r) {
    case spectrum_rule::lower: return "lower";
    case spectrum_rule::midpoint: return "midpoint";
    case spectrum_rule::upper: return "upper";
    case spectrum_rule::explicit_values: return "explicit";
  }
  return "?";
}

struct model_params {
  double b = 2.0;
  double alpha = 1.0;
  double beta = 1.0;
  spectrum_rule rule = spectrum_rule::lower;
  std::vector<double> explicit_t;  ///< used with spectrum_rule::explicit_values
  int d = 1;
  int n_trunc = 512;
};

/// Orthonormal trigonometric system in L^2(uniform): e~_1 = 1, e~_2k = sqrt2 cos kx, e~_2k+1 = sqrt2 sin kx.
inline double basis_value(int n, double x) {
  if (n == 1) return 1.0;
  const int k = n / 2;
  return n % 2 == 0 ? std::numbers::sqrt2 * std::cos(k * x) : std::numbers::sqrt2 * std::sin(k * x);
}

inline void basis_row(double x, int n_trunc, double* out) {
  out[0] = 1.0;
  for (int n = 2; n <= n_trunc; ++n) out[n - 1] = basis_value(n, x);
}

class mercer_model {
 public:
  explicit mercer_model(model_params p) : p_(std::move(p)) {
    if (!(p_.b >= 1.0) || !std::isfinite(p_.b)) throw construction_error("mercer model: b must be >= 1");
    if (!(p_.alpha > 0.0) || !(p_.beta >= p_.alpha))
      throw construction_error("mercer model: need 0 < alpha <= beta (empty decay envelope otherwise)");
    if (p_.d < 1) throw construction_error("mercer model: d must be >= 1");
    if (p_.rule == spectrum_rule::explicit_values) {
      if (p_.n_trunc <= 0) p_.n_trunc = static_cast<int>(p_.explicit_t.size());
      if (static_cast<int>(p_.explicit_t.size()) != p_.n_trunc)
        throw construction_error("mercer model: explicit spectrum length must equal N_trunc");
    } else if (p_.n_trunc < 8) {
      throw construction_error("mercer model: N_trunc must be >= 8");
    }
    t_.resize(p_.n_trunc);
    for (int n = 1; n <= p_.n_trunc; ++n) {
      const double base = std::pow(static_cast<double>(n), -p_.b);
      double t = 0.0;
      switch (p_.rule) {
        case spectrum_rule::lower: t = p_.alpha * base; break;
        case spectrum_rule::upper: t = p_.beta * base; break;
        case spectrum_rule::midpoint: t = 0.5 * (p_.alpha + p_.beta) * base; break;
        case spectrum_rule::explicit_values: t = p_.explicit_t[n - 1]; break;
      }
      const double lo = p_.alpha * base, hi = p_.beta * base;
      if (!(t >= lo * (1.0 - 1e-12)) || !(t <= hi * (1.0 + 1e-12)))
        throw construction_error("mercer model: t_" + std::to_string(n) + " outside the decay envelope");
      if (n > 1 && t > t_[n - 2]) throw construction_error("mercer model: spectrum must be nonincreasing");
      t_[n - 1] = t;
    }
    kappa2_ = sup_diagonal(kappa_grid_points) * p_.d;
  }

  /// Model with an explicit spectrum (envelope alpha n^-b <= t_n <= beta n^-b still enforced).
  static mercer_model with_spectrum(std::vector<double> t, double b, double alpha, double beta, int d = 1) {
    model_params p;
    p.b = b;
    p.alpha = alpha;
    p.beta = beta;
    p.rule = spectrum_rule::explicit_values;
    p.n_trunc = static_cast<int>(t.size());
    p.explicit_t = std::move(t);
    p.d = d;
    return mercer_model(std::move(p));
  }

  const model_params& params() const { return p_; }
  int n_trunc() const { return p_.n_trunc; }
  int d() const { return p_.d; }
  double b() const { return p_.b; }
  double alpha() const { return p_.alpha; }
  double beta() const { return p_.beta; }
  const VectorXd& eigenvalues() const { return t_; }
  double t(int n) const { return t_[n - 1]; }
  double kappa2() const { return kappa2_; }
  double kappa() const { return std::sqrt(kappa2_); }

  /// sup over an x-grid of sum_n t_n e~_n(x)^2 (without the channel factor).
  double sup_diagonal(std::size_t grid) const {
    double best = 0.0;
    std::vector<double> row(p_.n_trunc);
    for (std::size_t i = 0; i < grid; ++i) {
      const double x = two_pi * static_cast<double>(i) / static_cast<double>(grid);
      basis_row(x, p_.n_trunc, row.data());
      double s = 0.0;
      for (int n = 0; n < p_.n_trunc; ++n) s += t_[n] * row[n] * row[n];
      best = std::max(best, s);
    }
    return best;
  }

  /// Scalar kernel k(x, x'); the operator-valued kernel is k(x, x') I_d.
  double kernel(double x, double xp) const {
    double s = t_[0];
    for (int n = 2; n <= p_.n_trunc; ++n) s += t_[n - 1] * basis_value(n, x) * basis_value(n, xp);
    return s;
  }

  /// m x N matrix of e~_n(x_i).
  MatrixXd features(const std::vector<double>& xs) const {
    MatrixXd F(static_cast<Eigen::Index>(xs.size()), p_.n_trunc);
    std::vector<double> row(p_.n_trunc);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      basis_row(xs[i], p_.n_trunc, row.data());
      for (int n = 0; n < p_.n_trunc; ++n) F(static_cast<Eigen::Index>(i), n) = row[n];
    }
    return F;
  }

  /// Tail mass sum_{n > N} t_n bounded by beta N^{1-b}/(b-1); infinite for b = 1.
  double tail_bound() const {
    if (p_.b <= 1.0) return std::numeric_limits<double>::infinity();
    return p_.beta * std::pow(static_cast<double>(p_.n_trunc), 1.0 - p_.b) / (p_.b - 1.0);
  }

  /// Eigenvalue the spectrum rule would assign past the truncation (explicit: lower envelope).
  double extended_eigenvalue(long n) const {
    const double base = std::pow(static_cast<double>(n), -p_.b);
    switch (p_.rule) {
      case spectrum_rule::upper: return p_.beta * base;
      case spectrum_rule::midpoint: return 0.5 * (p_.alpha + p_.beta) * base;
      default: return p_.alpha * base;
    }
  }

 private:
  model_params p_;
  VectorXd t_;
  double kappa2_ = 0.0;
};

/// ||c||_H^2 = sum c^2 and ||c||_rho^2 = sum t_n c^2 for H-basis coefficients (rows n, columns channels).
struct expansion_norms {
  double rho = 0.0;
  double h = 0.0;
};

inline expansion_norms norms_of_expansion(const mercer_model& model, const MatrixXd& c) {
  if (c.rows() != model.n_trunc()) throw contract_error("norms_of_expansion: coefficient rows must equal N_trunc");
  const VectorXd row_sq = c.rowwise().squaredNorm();
  return {std::sqrt(model.eigenvalues().dot(row_sq)), std::sqrt(row_sq.sum())};
}

/// f_H = phi(L_K) g in the H-basis e_n = sqrt(t_n) e~_n.
class target_function {
 public:
  target_function(const mercer_model& model, const index_function& phi, MatrixXd source, double R)
      : phi_(phi), source_(std::move(source)), R_(R) {
    if (source_.rows() != model.n_trunc() || source_.cols() != model.d())
      throw contract_error("target: source must be N_trunc x d");
    if (!(R >= 0.0)) throw parameter_error("target: R must be >= 0");
    const double gn = source_.norm();
    if (gn > R * (1.0 + 1e-12)) throw source_violation_error("target: ||g||_H exceeds R");
    coef_.resize(source_.rows(), source_.cols());
    for (Eigen::Index n = 0; n < source_.rows(); ++n) coef_.row(n) = phi_(model.eigenvalues()[n]) * source_.row(n);
    sqrt_t_coef_ = model.eigenvalues().cwiseSqrt().asDiagonal() * coef_;
  }

  const MatrixXd& coefficients() const { return coef_; }
  const MatrixXd& source() const { return source_; }
  const index_function& phi() const { return phi_; }
  double R() const { return R_; }
  double source_norm() const { return source_.norm(); }

  /// Coefficients against the L^2 basis e~_n, i.e. sqrt(t_n) f^_n.
  const MatrixXd& l2_coefficients() const { return sqrt_t_coef_; }

  VectorXd operator()(double x) const {
    VectorXd out = VectorXd::Zero(coef_.cols());
    for (Eigen::Index n = 0; n < coef_.rows(); ++n)
      out += basis_value(static_cast<int>(n) + 1, x) * sqrt_t_coef_.row(n).transpose();
    return out;
  }

  /// m x d values at the rows of a feature matrix.
  MatrixXd values(const MatrixXd& features) const { return features * sqrt_t_coef_; }

 private:
  index_function phi_;
  MatrixXd source_;
  double R_ = 0.0;
  MatrixXd coef_;
  MatrixXd sqrt_t_coef_;
};

/// Source g^_{n,j} proportional to n^{-s} on every channel, normalized to ||g|| = R.
inline MatrixXd power_law_source(const mercer_model& model, double R, double s = 1.0) {
  MatrixXd g(model.n_trunc(), model.d());
  for (int n = 1; n <= model.n_trunc(); ++n) g.row(n - 1).setConstant(std::pow(static_cast<double>(n), -s));
  const double nrm = g.norm();
  return nrm > 0.0 ? MatrixXd(g * (R / nrm)) : g;
}

inline target_function target_from_source(const mercer_model& model, const index_function& phi, MatrixXd source,
                                          double R) {
  return target_function(model, phi, std::move(source), R);
}

/// rho-norm^2 that truncation discards when the power-law source continues past N_trunc.
inline double power_law_truncated_tail(const mercer_model& model, const index_function& phi, double R, double s,
                                       long extend_factor = 64) {
  double head = 0.0;
  for (int n = 1; n <= model.n_trunc(); ++n) head += std::pow(static_cast<double>(n), -2.0 * s);
  const double scale2 = R * R / (head * model.d());
  double tail = 0.0;
  const long stop = static_cast<long>(model.n_trunc()) * extend_factor;
  for (long n = model.n_trunc() + 1; n <= stop; ++n) {
    const double t = model.extended_eigenvalue(n);
    const double f = phi(t);
    tail += t * f * f * std::pow(static_cast<double>(n), -2.0 * s);
  }
  return tail * scale2 * model.d();
}

/// Coefficients of f_lambda = (L_K + lambda)^{-1} L_K f_H.
inline MatrixXd population_regularized(const mercer_model& model, const target_function& f, double lambda) {
  if (!(lambda > 0.0)) throw parameter_error("population_regularized: lambda must be > 0");
  const VectorXd w = model.eigenvalues().array() / (model.eigenvalues().array() + lambda);
  return w.asDiagonal() * f.coefficients();
}

struct approx_error_report {
  double rho = 0.0;
  double h = 0.0;
  bool sqrt_bound_applies = false;  ///< phi sqrt(t) and sqrt(t)/phi nondecreasing
  bool kappa_bound_applies = false;  ///< phi and t/phi nondecreasing
  double bound_rho_sqrt = 0.0;      ///< R phi(lambda) sqrt(lambda)
  double bound_rho_kappa = 0.0;     ///< R kappa phi(lambda)
  double bound_h = 0.0;             ///< R phi(lambda)
  bool holds = true;
  bool any_bound() const { return sqrt_bound_applies || kappa_bound_applies; }
};

inline void attach_approx_bounds(approx_error_report& r, const mercer_model& model, const index_function& phi, double R,
                                 double lambda) {
  const auto& fl = phi.flags();
  r.sqrt_bound_applies = fl.phi_times_sqrt_t_nondecreasing && fl.sqrt_t_over_phi_nondecreasing;
  r.kappa_bound_applies = fl.phi_nondecreasing && fl.t_over_phi_nondecreasing;
  const double pl = phi(lambda);
  r.bound_rho_sqrt = R * pl * std::sqrt(lambda);
  r.bound_rho_kappa = R * model.kappa() * pl;
  r.bound_h = R * pl;
  r.holds = true;
  if (r.sqrt_bound_applies && r.rho > r.bound_rho_sqrt) r.holds = false;
  if (r.kappa_bound_applies && (r.rho > r.bound_rho_kappa || r.h > r.bound_h)) r.holds = false;
}

/// Exact ||f_lambda - f_H|| in both norms for a given source; coefficients lambda/(t+lambda) phi(t) g.
inline approx_error_report approx_error_norms(const mercer_model& model, const index_function& phi,
                                              const MatrixXd& source, double R, double lambda) {
  if (!(lambda > 0.0) || lambda > model.kappa2() * (1.0 + 1e-12))
    throw domain_error("approx_error_norms: lambda must lie in (0, kappa^2]");
  MatrixXd c(source.rows(), source.cols());
  for (Eigen::Index n = 0; n < source.rows(); ++n) {
    const double t = model.eigenvalues()[n];
    c.row(n) = (lambda / (t + lambda)) * phi(t) * source.row(n);
  }
  const auto nr = norms_of_expansion(model, c);
  approx_error_report r;
  r.rho = nr.rho;
  r.h = nr.h;
  attach_approx_bounds(r, model, phi, R, lambda);
  return r;
}

/// Worst case over single-mode sources g = R e_n.
inline approx_error_report approx_error_worst_case(const mercer_model& model, const index_function& phi, double R,
                                                   double lambda) {
  if (!(lambda > 0.0) || lambda > model.kappa2() * (1.0 + 1e-12))
    throw domain_error("approx_error_worst_case: lambda must lie in (0, kappa^2]");
  approx_error_report r;
  for (int n = 0; n < model.n_trunc(); ++n) {
    const double t = model.eigenvalues()[n];
    const double h = lambda / (t + lambda) * phi(t) * R;
    r.h = std::max(r.h, h);
    r.rho = std::max(r.rho, h * std::sqrt(t));
  }
  attach_approx_bounds(r, model, phi, R, lambda);
  return r;
}

enum class noise_kind { gaussian, two_point };

/// Noise model with constants (M, Sigma) for the moment condition
/// E[exp(|y-f|/M) - |y-f|/M - 1] <= Sigma^2/(2M^2).
struct noise_spec {
  noise_kind kind = noise_kind::gaussian;
  double sigma = 0.0;  ///< per-channel std dev (gaussian)
  double L = 0.0;      ///< amplitude (two_point)
  int d = 1;
  double M = 0.0;
  double Sigma = 0.0;
  bool certified = false;
  double moment_lhs = 0.0;  ///< the expectation above, as computed
  double moment_rhs = 0.0;

  static noise_spec gaussian(double sigma, int d);
  static noise_spec two_point(double L, int d);

  /// Sufficient cap on sigma^2 for normal noise from the closed-form analysis (report only).
  double gaussian_variance_cap() const;
};

/// chi_d density of ||Z||, Z ~ N(0, I_d).
inline double chi_density(double u, int d) {
  if (u < 0.0) return 0.0;
  if (u == 0.0) return d == 1 ? std::sqrt(2.0 / std::numbers::pi) : 0.0;
  const double k = 0.5 * d;
  return std::exp((d - 1) * std::log(u) - 0.5 * u * u - (k - 1.0) * std::log(2.0) - std::lgamma(k));
}

/// E[exp(s chi_d) - s chi_d - 1] by composite Simpson on [0, 40 + 2s].
inline double chi_moment_excess(double s, int d) {
  const int n = 20000;
  const double hi = 40.0 + 2.0 * s;
  const double h = hi / n;
  auto f = [&](double u) {
    const double z = s * u;
    return (std::expm1(z) - z) * chi_density(u, d);
  };
  double acc = f(0.0) + f(hi);
  for (int i = 1; i < n; ++i) acc += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

inline noise_spec noise_spec::gaussian(double sigma, int d) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw parameter_error("gaussian noise: sigma must be >= 0");
  if (d < 1) throw parameter_error("gaussian noise: d must be >= 1");
  noise_spec ns;
  ns.kind = noise_kind::gaussian;
  ns.sigma = sigma;
  ns.d = d;
  const double sd = std::sqrt(static_cast<double>(d));
  ns.M = 3.0 * sigma * sd;
  ns.Sigma = 2.0 * sigma * sd;
  if (sigma == 0.0) {
    ns.certified = true;  // the residual vanishes identically
    return ns;
  }
  // ||eta|| = sigma chi_d, so ||eta||/M = chi_d / (3 sqrt d).
  ns.moment_lhs = chi_moment_excess(1.0 / (3.0 * sd), d);
  ns.moment_rhs = ns.Sigma * ns.Sigma / (2.0 * ns.M * ns.M);
  ns.certified = ns.moment_lhs <= ns.moment_rhs;
  return ns;
}

inline noise_spec noise_spec::two_point(double L, int d) {
  if (!(L > 0.0)) throw parameter_error("two-point noise: L must be > 0");
  noise_spec ns;
  ns.kind = noise_kind::two_point;
  ns.L = L;
  ns.d = d;
  // |y - f(x)| <= dL + |f(x)| <= dL + L/4, so the excess is at most e - 2.
  ns.M = d * L + 0.25 * L;
  ns.Sigma = ns.M * std::sqrt(2.0 * (std::exp(1.0) - 2.0));
  ns.moment_lhs = std::exp(1.0) - 2.0;
  ns.moment_rhs = ns.Sigma * ns.Sigma / (2.0 * ns.M * ns.M);
  ns.certified = ns.moment_lhs <= ns.moment_rhs * (1.0 + 1e-12);
  return ns;
}

inline double noise_spec::gaussian_variance_cap() const {
  const int n = 20000;
  const double hi = 40.0;
  const double h = hi / n;
  auto f = [&](double t) { return std::exp(-t * t + t) * std::pow(t, d + 1); };
  double acc = f(0.0) + f(hi);
  for (int i = 1; i < n; ++i) acc += f(i * h) * (i % 2 ? 4.0 : 2.0);
  const double integral = acc * h / 3.0;
  // surface area of the unit sphere in R^d
  const double S = 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
  const double closed = std::pow(std::numbers::pi, 0.5 * d) * Sigma * Sigma / (4.0 * S * integral);
  return std::min(0.5 * M * M, closed);
}

struct dataset {
  std::vector<double> xs;
  MatrixXd ys;  ///< m x d
  std::size_t m() const { return xs.size(); }
  int d() const { return static_cast<int>(ys.cols()); }
};

/// x_i uniform on [0, 2pi], y_i = f_H(x_i) + noise. Deterministic in seed.
inline dataset sample_dataset(const mercer_model& model, const target_function& f, const noise_spec& noise,
                              std::size_t m, std::uint64_t seed) {
  if (m < 1) throw parameter_error("sample_dataset: m must be >= 1");
  rng_engine gen(seed);
  std::uniform_real_distribution<double> ux(0.0, two_pi);
  dataset ds;
  ds.xs.resize(m);
  for (auto& x : ds.xs) x = ux(gen);
  const MatrixXd F = model.features(ds.xs);
  ds.ys = f.values(F);
  const int d = model.d();
  if (noise.kind == noise_kind::gaussian) {
    if (noise.sigma > 0.0) {
      std::normal_distribution<double> nd(0.0, noise.sigma);
      for (std::size_t i = 0; i < m; ++i)
        for (int j = 0; j < d; ++j) ds.ys(static_cast<Eigen::Index>(i), j) += nd(gen);
    }
  } else {
    // Channel j with probability 1/d, then +dL v_j with probability (L + f_j)/(2L), else -dL v_j.
    std::uniform_int_distribution<int> uj(0, d - 1);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const int j = uj(gen);
      const double fj = ds.ys(r, j);
      const double p_plus = (noise.L + fj) / (2.0 * noise.L);
      if (p_plus < -1e-12 || p_plus > 1.0 + 1e-12)
        throw amplitude_error("two-point noise: |f(x)_j| exceeds L");
      const double sign = u01(gen) < p_plus ? 1.0 : -1.0;
      ds.ys.row(r).setZero();
      ds.ys(r, j) = sign * d * noise.L;
    }
  }
  return ds;
}

}  // namespace ratelab
