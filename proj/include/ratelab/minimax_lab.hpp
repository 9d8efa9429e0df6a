#pragma once

// Lower-bound machinery: sign packings, adversarial source families, two-point
// conditional measures, their KL divergence, the Fano bound and the Bayes error.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ratelab/errors.hpp"
#include "ratelab/estimator.hpp"
#include "ratelab/filters.hpp"
#include "ratelab/index_fn.hpp"
#include "ratelab/kernels_gram.hpp"
#include "ratelab/mercer_model.hpp"
#include "ratelab/rng.hpp"

namespace ratelab {

using sign_code = std::vector<int>;

struct sign_packing {
  int ell = 0;
  std::vector<sign_code> codes;
  std::size_t target = 0;
  bool reached = false;
  std::size_t size() const { return codes.size(); }
};

inline int squared_code_distance(const sign_code& a, const sign_code& b) {
  int s = 0;
  for (std::size_t n = 0; n < a.size(); ++n) s += (a[n] - b[n]) * (a[n] - b[n]);
  return s;
}

inline constexpr std::size_t packing_rejection_cap = 1000000;
inline constexpr std::size_t packing_size_cap = 100000;

/// Randomized greedy packing of {-1,+1}^ell with pairwise squared distance >= ell,
/// stopping at ceil(e^{ell/24}) codes.
inline sign_packing build_packing(int ell, std::uint64_t seed) {
  if (ell <= 16) throw parameter_error("build_packing: code length must exceed 16");
  const double target = std::ceil(std::exp(ell / 24.0));
  if (target > static_cast<double>(packing_size_cap))
    throw packing_failure_error("build_packing: target size " + std::to_string(target) + " exceeds the size cap");
  sign_packing p;
  p.ell = ell;
  p.target = static_cast<std::size_t>(target);
  rng_engine gen(seed);
  std::bernoulli_distribution coin(0.5);
  std::size_t rejected = 0;
  sign_code cand(ell);
  while (p.codes.size() < p.target) {
    for (auto& s : cand) s = coin(gen) ? 1 : -1;
    const bool ok = std::all_of(p.codes.begin(), p.codes.end(),
                                [&](const sign_code& c) { return squared_code_distance(c, cand) >= ell; });
    if (ok) {
      p.codes.push_back(cand);
    } else if (++rejected >= packing_rejection_cap) {
      throw packing_failure_error("build_packing: rejection cap hit with " + std::to_string(p.codes.size()) +
                                  " of " + std::to_string(p.target) + " codes");
    }
  }
  p.reached = true;
  return p;
}

struct packing_audit {
  int min_distance = 0;
  bool distance_ok = false;
  bool size_ok = false;
};

/// Exhaustive O(N^2 ell) check of both packing invariants.
inline packing_audit audit_packing(const sign_packing& p) {
  packing_audit a;
  a.min_distance = std::numeric_limits<int>::max();
  for (std::size_t i = 0; i < p.codes.size(); ++i)
    for (std::size_t j = i + 1; j < p.codes.size(); ++j)
      a.min_distance = std::min(a.min_distance, squared_code_distance(p.codes[i], p.codes[j]));
  a.distance_ok = a.min_distance >= p.ell;
  a.size_ok = static_cast<double>(p.codes.size()) >= std::exp(p.ell / 24.0);
  return a;
}

/// psi(t) = sqrt(t) phi(t) on the model's spectrum range.
inline double psi_inverse(const index_function& phi, double y) {
  const double hi = phi.domain_max();
  auto psi = [&](double t) { return std::sqrt(t) * phi(t); };
  if (y >= psi(hi)) return hi;
  return invert_monotone(psi, y, hi * 1e-8, hi);
}

inline double phi_inverse(const index_function& phi, double y) {
  const double hi = phi.domain_max();
  if (y >= phi(hi)) return hi;
  return invert_monotone([&](double t) { return phi(t); }, y, hi * 1e-8, hi);
}

/// (alpha / psi^{-1}(eps/R))^{1/b} before flooring.
inline double code_length_real(const mercer_model& model, const index_function& phi, double R, double eps) {
  const double t = psi_inverse(phi, eps / R);
  return std::pow(model.alpha() / t, 1.0 / model.b());
}

/// (4/5)(alpha / phi^{-1}(sqrt5 eps/(2R)))^{1/b} before rounding down to a multiple of 4.
inline double code_length_rkhs_real(const mercer_model& model, const index_function& phi, double R, double eps) {
  const double t = phi_inverse(phi, std::sqrt(5.0) * eps / (2.0 * R));
  return 0.8 * std::pow(model.alpha() / t, 1.0 / model.b());
}

inline int saturating_floor(double v) {
  constexpr double top = static_cast<double>(std::numeric_limits<int>::max());
  return v >= top ? std::numeric_limits<int>::max() : static_cast<int>(std::floor(v));
}

/// floor((alpha / psi^{-1}(eps/R))^{1/b})
inline int code_length(const mercer_model& model, const index_function& phi, double R, double eps) {
  return saturating_floor(code_length_real(model, phi, R, eps));
}

/// 4 floor((4/5)(alpha / phi^{-1}(sqrt5 eps/(2R)))^{1/b} / 4)
inline int code_length_rkhs(const mercer_model& model, const index_function& phi, double R, double eps) {
  const int q = saturating_floor(code_length_rkhs_real(model, phi, R, eps) / 4.0);
  return q > std::numeric_limits<int>::max() / 4 ? std::numeric_limits<int>::max() / 4 * 4 : 4 * q;
}

/// An epsilon whose code length is exactly ell: R psi(alpha (ell + 1/2)^{-b}).
inline double epsilon_for_code_length(const mercer_model& model, const index_function& phi, double R, int ell) {
  const double t = model.alpha() * std::pow(ell + 0.5, -model.b());
  return R * std::sqrt(t) * phi(t);
}

/// Largest eps with code length > 16, found by bisection on the code-length formula.
inline double epsilon_zero(const mercer_model& model, const index_function& phi, double R, bool rkhs_variant = false) {
  auto len = [&](double e) {
    return rkhs_variant ? code_length_rkhs(model, phi, R, e) : code_length(model, phi, R, e);
  };
  const int need = rkhs_variant ? 20 : 17;
  double hi = R * std::sqrt(phi.domain_max()) * phi(phi.domain_max());
  if (len(hi) >= need) return hi;
  double lo = hi;
  for (int k = 0; k < 300 && len(lo) < need; ++k) {
    hi = lo;
    lo *= 0.1;
  }
  if (len(lo) < need) throw underflow_error("epsilon_zero: no epsilon above 1e-300 reaches the code length");
  for (int it = 0; it < 2000 && hi / lo - 1.0 > 1e-13; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (len(mid) >= need)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

struct adversarial_family {
  std::vector<target_function> members;
  std::vector<sign_code> codes;  ///< the full codes used (padded for the RKHS variant)
  int ell = 0;
  double epsilon = 0.0;
  bool rkhs_variant = false;
  double min_separation = 0.0;  ///< in the rho-norm, or the H-norm for the RKHS variant
  double max_separation = 0.0;
  double max_rho_sq = 0.0;       ///< max ||f_i - f_j||_rho^2
  double rho_sq_bound = 0.0;     ///< c' eps^2 / ell^b (RKHS variant)
  double max_source_norm = 0.0;
};

/// f_i = phi(L_K) g_i with g_i coefficients eps s_n / (sqrt(ell t_n) phi(t_n)) on channel 0, or
/// for the RKHS variant eps s_n / (sqrt(ell) phi(t_n)) over the padded code (a, sigma_i).
inline adversarial_family make_adversarial_family(const mercer_model& model, const index_function& phi, double R,
                                                  double eps, const sign_packing& packing, bool rkhs_variant = false,
                                                  std::uint64_t pad_seed = 0) {
  const int ell = packing.ell;
  const int len = rkhs_variant ? ell + ell / 4 : ell;
  if (rkhs_variant && ell % 4 != 0) throw parameter_error("adversarial family: RKHS variant needs ell divisible by 4");
  if (len > model.n_trunc())
    throw truncation_error("adversarial family: code length " + std::to_string(len) + " exceeds N_trunc");
  adversarial_family fam;
  fam.ell = ell;
  fam.epsilon = eps;
  fam.rkhs_variant = rkhs_variant;
  sign_code pad;
  if (rkhs_variant) {
    rng_engine gen(pad_seed);
    std::bernoulli_distribution coin(0.5);
    for (int n = 0; n < ell / 4; ++n) pad.push_back(coin(gen) ? 1 : -1);
  }
  for (const auto& sigma : packing.codes) {
    sign_code code = pad;
    code.insert(code.end(), sigma.begin(), sigma.end());
    MatrixXd g = MatrixXd::Zero(model.n_trunc(), model.d());
    for (int n = 0; n < len; ++n) {
      const double t = model.eigenvalues()[n];
      const double denom = rkhs_variant ? std::sqrt(static_cast<double>(ell)) * phi(t)
                                        : std::sqrt(ell * t) * phi(t);
      g(n, 0) = eps * code[n] / denom;
    }
    const double gn = g.norm();
    fam.max_source_norm = std::max(fam.max_source_norm, gn);
    if (gn > R * (1.0 + 1e-12))
      throw construction_error("adversarial family: ||g_i|| = " + std::to_string(gn) + " exceeds R");
    fam.members.emplace_back(model, phi, std::move(g), R);
    fam.codes.push_back(std::move(code));
  }
  fam.min_separation = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < fam.members.size(); ++i) {
    for (std::size_t j = i + 1; j < fam.members.size(); ++j) {
      const auto nr = norms_of_expansion(model, fam.members[i].coefficients() - fam.members[j].coefficients());
      const double sep = rkhs_variant ? nr.h : nr.rho;
      fam.min_separation = std::min(fam.min_separation, sep);
      fam.max_separation = std::max(fam.max_separation, sep);
      fam.max_rho_sq = std::max(fam.max_rho_sq, nr.rho * nr.rho);
    }
  }
  if (rkhs_variant) {
    const double b = model.b();
    const double cprime = model.beta() * std::pow(4.0, b) * (1.0 - std::pow(5.0, 1.0 - b)) / (b - 1.0);
    fam.rho_sq_bound = cprime * eps * eps / std::pow(static_cast<double>(ell), b);
  }
  return fam;
}

/// Amplitude L = 4 kappa phi(kappa^2) R of the two-point construction.
inline double two_point_amplitude(const mercer_model& model, const index_function& phi, double R) {
  return 4.0 * model.kappa() * phi(model.kappa2()) * R;
}

struct atom {
  int channel = 0;
  int sign = 1;  ///< location sign * dL v_channel
  double weight = 0.0;
};

/// Weights (L + f_j)/(2dL) at +dL v_j and (L - f_j)/(2dL) at -dL v_j.
inline std::vector<atom> two_point_conditional(double L, const VectorXd& fx) {
  const auto d = static_cast<int>(fx.size());
  std::vector<atom> out;
  out.reserve(2 * d);
  for (int j = 0; j < d; ++j) {
    const double b = (L + fx[j]) / (2.0 * d * L);
    const double a = (L - fx[j]) / (2.0 * d * L);
    if (a < -1e-15 || b < -1e-15) throw amplitude_error("two-point measure: |f(x)_j| exceeds L");
    out.push_back({j, 1, std::max(b, 0.0)});
    out.push_back({j, -1, std::max(a, 0.0)});
  }
  return out;
}

inline VectorXd atom_mean(double L, const std::vector<atom>& atoms, int d) {
  VectorXd m = VectorXd::Zero(d);
  for (const auto& a : atoms) m[a.channel] += a.weight * a.sign * d * L;
  return m;
}

inline constexpr int kl_quadrature_default = 512;

/// Per-sample KL(rho_{f1} || rho_{f2}) by the periodic trapezoid rule in x.
inline double kl_divergence(double L, const target_function& f1, const target_function& f2,
                            int quadrature_points = kl_quadrature_default) {
  if (quadrature_points < 256) throw parameter_error("kl_divergence: need at least 256 quadrature points");
  if (f1.coefficients().cols() != f2.coefficients().cols()) throw contract_error("kl_divergence: atom mismatch");
  double acc = 0.0;
  for (int q = 0; q < quadrature_points; ++q) {
    const double x = two_pi * q / quadrature_points;
    const auto a1 = two_point_conditional(L, f1(x));
    const auto a2 = two_point_conditional(L, f2(x));
    for (std::size_t k = 0; k < a1.size(); ++k) {
      if (a1[k].weight <= 0.0) continue;
      if (a2[k].weight <= 0.0) return std::numeric_limits<double>::infinity();
      acc += a1[k].weight * std::log(a1[k].weight / a2[k].weight);
    }
  }
  return std::max(acc / quadrature_points, 0.0);
}

/// 16/(15 d L^2) ||f1 - f2||_rho^2
inline double kl_upper_bound(const mercer_model& model, double L, const target_function& f1,
                             const target_function& f2) {
  const auto nr = norms_of_expansion(model, f1.coefficients() - f2.coefficients());
  return 16.0 / (15.0 * model.d() * L * L) * nr.rho * nr.rho;
}

inline const double fano_theta = std::exp(-3.0 / std::exp(1.0));

struct fano_result {
  double value = 0.0;
  double first = 0.0;   ///< 1/(1 + e^{-ell/24})
  double second = 0.0;  ///< theta e^{ell/48 - kl}
  std::string binding;  ///< "first" or "second"
};

inline fano_result fano_from_kl(int ell, double kl) {
  fano_result r;
  r.first = 1.0 / (1.0 + std::exp(-ell / 24.0));
  r.second = fano_theta * std::exp(ell / 48.0 - kl);
  r.binding = r.second < r.first ? "second" : "first";
  r.value = std::clamp(std::min(r.first, r.second), 0.0, 1.0);
  return r;
}

/// min{1/(1+e^{-ell/24}), theta e^{ell/48 - 64 m eps^2/(15 d L^2)}}
inline fano_result fano_bound(int ell, double m, double eps, int d, double L) {
  if (ell <= 0 || !(m > 0.0) || !(eps > 0.0) || d < 1 || !(L > 0.0)) throw parameter_error("fano_bound: arguments must be positive");
  return fano_from_kl(ell, 64.0 * m * eps * eps / (15.0 * d * L * L));
}

/// RKHS variant: exponent ell/48 - c m eps^2/ell^b, c = beta 4^{b+2}(1 - 5^{1-b})/(15(b-1) d L^2).
inline fano_result fano_bound_rkhs(int ell, double m, double eps, int d, double L, double b, double beta) {
  if (ell <= 0 || !(m > 0.0) || !(eps > 0.0) || d < 1 || !(L > 0.0) || !(b > 1.0))
    throw parameter_error("fano_bound_rkhs: arguments must be positive and b > 1");
  const double c = beta * std::pow(4.0, b + 2.0) * (1.0 - std::pow(5.0, 1.0 - b)) / (15.0 * (b - 1.0) * d * L * L);
  return fano_from_kl(ell, c * m * eps * eps / std::pow(static_cast<double>(ell), b));
}

struct fano_check {
  double max_frequency = 0.0;   ///< max over i of the failure frequency
  double pooled_frequency = 0.0;
  std::size_t max_index_trials = 0;
  double bound = 0.0;
  std::string binding;
  double slack = 0.0;  ///< 3 binomial standard errors at the bound
  bool consistent = false;
};

/// Draws i uniformly, samples m points from rho_{f_i}, fits with (filter, lambda) and records
/// whether the error (rho-norm, or H-norm for the RKHS variant) exceeds eps/2.
inline fano_check empirical_fano_check(const std::shared_ptr<const mercer_model>& model,
                                       const adversarial_family& fam, double L, std::size_t m, std::size_t trials,
                                       const spectral_filter& filter, double lambda, const fano_result& bound,
                                       std::uint64_t seed) {
  const auto n_members = fam.members.size();
  if (n_members == 0) throw parameter_error("empirical_fano_check: empty family");
  std::vector<std::size_t> count(n_members, 0), fail(n_members, 0);
  const auto noise = noise_spec::two_point(L, model->d());
  const auto k = kernel::mercer(model);
  std::size_t total_fail = 0;
  for (std::size_t tr = 0; tr < trials; ++tr) {
    rng_engine pick(derive_seed(seed, {tr, 0}));
    const auto i = std::uniform_int_distribution<std::size_t>(0, n_members - 1)(pick);
    const auto ds = sample_dataset(*model, fam.members[i], noise, m, derive_seed(seed, {tr, 1}));
    const MatrixXd F = model->features(ds.xs);
    const auto ge = spectral_decomposition(*model, F);
    const MatrixXd c = filter_coefficients(ge, filter, lambda, ds.ys);
    const auto nr = error_norms(*model, F, c, fam.members[i]);
    const double err = fam.rkhs_variant ? nr.h : nr.rho;
    ++count[i];
    if (err > 0.5 * fam.epsilon) {
      ++fail[i];
      ++total_fail;
    }
  }
  fano_check out;
  out.bound = bound.value;
  out.binding = bound.binding;
  out.pooled_frequency = static_cast<double>(total_fail) / static_cast<double>(trials);
  for (std::size_t i = 0; i < n_members; ++i) {
    if (!count[i]) continue;
    const double f = static_cast<double>(fail[i]) / static_cast<double>(count[i]);
    if (f > out.max_frequency || out.max_index_trials == 0) {
      out.max_frequency = f;
      out.max_index_trials = count[i];
    }
  }
  const double p = std::clamp(bound.value, 0.0, 1.0);
  out.slack = 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(std::max<std::size_t>(out.max_index_trials, 1)));
  out.consistent = out.max_frequency >= out.bound - out.slack;
  return out;
}

/// Phi(-||Gamma||/sigma) for deciding s in {-1,+1} from y = s Gamma + eta.
inline double bayes_error(const VectorXd& gamma, double sigma) {
  if (!(sigma > 0.0)) throw domain_error("bayes_error: sigma must be > 0");
  return 0.5 * std::erfc(gamma.norm() / (sigma * std::sqrt(2.0)));
}

struct bayes_simulation {
  double frequency = 0.0;
  double standard_error = 0.0;
};

/// Likelihood-ratio decision sign(<Gamma, y>) on simulated draws.
inline bayes_simulation bayes_error_monte_carlo(const VectorXd& gamma, double sigma, std::size_t draws,
                                                std::uint64_t seed) {
  rng_engine gen(seed);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> nd(0.0, sigma);
  std::size_t wrong = 0;
  for (std::size_t k = 0; k < draws; ++k) {
    const double s = coin(gen) ? 1.0 : -1.0;
    double proj = 0.0;
    for (Eigen::Index i = 0; i < gamma.size(); ++i) proj += gamma[i] * (s * gamma[i] + nd(gen));
    const double decision = proj >= 0.0 ? 1.0 : -1.0;
    wrong += decision != s;
  }
  bayes_simulation out;
  out.frequency = static_cast<double>(wrong) / static_cast<double>(draws);
  const double p = bayes_error(gamma, sigma);
  out.standard_error = std::sqrt(p * (1.0 - p) / static_cast<double>(draws));
  return out;
}

}  // namespace ratelab
