#pragma once

// Monte Carlo checks of the two concentration inequalities behind the upper rates.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ratelab/effdim_param.hpp"
#include "ratelab/errors.hpp"
#include "ratelab/kernels_gram.hpp"
#include "ratelab/mercer_model.hpp"
#include "ratelab/rng.hpp"

namespace ratelab {

enum class statistic_kind { sample_error, operator_deviation };

inline statistic_kind statistic_kind_from_name(const std::string& s) {
  if (s == "sample") return statistic_kind::sample_error;
  if (s == "operator") return statistic_kind::operator_deviation;
  throw parameter_error("unknown statistic '" + s + "' (expected sample or operator)");
}

/// ||(L_K + lambda)^{-1/2}(S_x^* y - S_x^* S_x f_H)||_H in the truncated basis.
inline double sample_error_stat(const mercer_model& model, const target_function& f, const MatrixXd& features,
                                const MatrixXd& ys, double lambda) {
  if (!(lambda > 0.0)) throw parameter_error("sample_error_stat: lambda must be > 0");
  const MatrixXd resid = ys - f.values(features);
  const VectorXd& t = model.eigenvalues();
  const VectorXd w = (t.array().sqrt() / (t.array() + lambda).sqrt()) / static_cast<double>(features.rows());
  return (w.asDiagonal() * (features.transpose() * resid)).norm();
}

inline double sample_error_stat(const mercer_model& model, const target_function& f, const dataset& ds,
                                double lambda) {
  return sample_error_stat(model, f, model.features(ds.xs), ds.ys, lambda);
}

/// Spectral norm of (1/m) T^{1/2} F^T F T^{1/2} - T. The operator is block diagonal over
/// channels with identical blocks, so one block suffices.
inline double operator_deviation(const mercer_model& model, const MatrixXd& features) {
  const VectorXd st = model.eigenvalues().cwiseSqrt();
  const MatrixXd Fs = features * st.asDiagonal();
  MatrixXd D = Fs.transpose() * Fs / static_cast<double>(features.rows());
  D.diagonal() -= model.eigenvalues();
  D = 0.5 * (D + D.transpose()).eval();
  const VectorXd w = lapack_syevd(D);
  return std::max(std::abs(w[0]), std::abs(w[w.size() - 1]));
}

inline double operator_deviation(const mercer_model& model, const dataset& ds) {
  return operator_deviation(model, model.features(ds.xs));
}

/// 2(kappa M/(m sqrt(lambda)) + sqrt(Sigma^2 N(lambda)/m)) log(4/eta)
inline double sample_error_bound(const mercer_model& model, const noise_spec& noise, double lambda, double m,
                                 double eta) {
  const double n_lambda = effective_dimension(model, lambda);
  return 2.0 * (model.kappa() * noise.M / (m * std::sqrt(lambda)) + std::sqrt(noise.Sigma * noise.Sigma * n_lambda / m)) *
         std::log(4.0 / eta);
}

/// 2(kappa^2/m + kappa^2/sqrt(m)) log(4/eta)
inline double operator_deviation_bound(const mercer_model& model, double m, double eta) {
  const double k2 = model.kappa2();
  return 2.0 * (k2 / m + k2 / std::sqrt(m)) * std::log(4.0 / eta);
}

struct tail_samples {
  statistic_kind kind = statistic_kind::sample_error;
  std::size_t m = 0;
  double lambda = 0.0;
  std::vector<double> values;  ///< by replicate index
  double truncation_tail = 0.0;
};

/// Evaluates the statistic on independent datasets; replicate i uses derive_seed(seed, {m, i}).
inline tail_samples draw_statistics(statistic_kind kind, const mercer_model& model, const target_function& f,
                                    const noise_spec& noise, double lambda, std::size_t m, std::size_t replicates,
                                    std::uint64_t seed) {
  tail_samples out;
  out.kind = kind;
  out.m = m;
  out.lambda = lambda;
  out.truncation_tail = model.tail_bound();
  out.values.resize(replicates);
  for (std::size_t i = 0; i < replicates; ++i) {
    const auto ds = sample_dataset(model, f, noise, m, derive_seed(seed, {m, i}));
    const MatrixXd F = model.features(ds.xs);
    out.values[i] = kind == statistic_kind::sample_error ? sample_error_stat(model, f, F, ds.ys, lambda)
                                                         : operator_deviation(model, F);
  }
  return out;
}

struct tail_result {
  double frequency = 0.0;
  double bound = 0.0;
  std::vector<double> statistics;
  std::vector<bool> violated;
  bool within_eta = true;
};

inline double tail_bound_for(const tail_samples& s, const mercer_model& model, const noise_spec& noise, double eta) {
  const double m = static_cast<double>(s.m);
  return s.kind == statistic_kind::sample_error ? sample_error_bound(model, noise, s.lambda, m, eta)
                                                : operator_deviation_bound(model, m, eta);
}

inline tail_result violation_frequency(const tail_samples& s, const mercer_model& model, const noise_spec& noise,
                                       double eta) {
  tail_result r;
  r.bound = tail_bound_for(s, model, noise, eta);
  r.statistics = s.values;
  std::size_t hits = 0;
  for (double v : s.values) {
    const bool bad = v > r.bound;
    r.violated.push_back(bad);
    hits += bad;
  }
  r.frequency = s.values.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(s.values.size());
  r.within_eta = r.frequency <= eta;
  return r;
}

inline tail_result tail_test(statistic_kind kind, const mercer_model& model, const target_function& f,
                             const noise_spec& noise, double lambda, std::size_t m, double eta,
                             std::size_t replicates, std::uint64_t seed) {
  if (!noise.certified) throw contract_error("tail_test: noise constants (M, Sigma) are not certified");
  if (replicates < 100) throw parameter_error("tail_test: need at least 100 replicates");
  if (!(eta > 0.0) || !(eta < 1.0)) throw parameter_error("tail_test: eta must lie in (0, 1)");
  return violation_frequency(draw_statistics(kind, model, f, noise, lambda, m, replicates, seed), model, noise, eta);
}

}  // namespace ratelab
