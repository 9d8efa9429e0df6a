#pragma once

// Spectral-filter estimator f_{z,lambda} = sum_i K_{x_i} c_i and its error norms.
//
// Scaling convention: the sampling operator carries the 1/m weight of ||y||_m^2 =
// (1/m) sum ||y_i||^2, so (1/m)K is the matrix of S_x S_x^*, and ridge regression solves
// ((1/m)K + lambda I) c = y/m, i.e. (K + m lambda I) c = y on the unscaled Gram.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "ratelab/errors.hpp"
#include "ratelab/filters.hpp"
#include "ratelab/kernels_gram.hpp"
#include "ratelab/mercer_model.hpp"
#include "ratelab/rng.hpp"

namespace ratelab {

struct fitted_estimator {
  MatrixXd c;  ///< m x d
  double lambda = 0.0;
  std::string filter;
  std::vector<double> xs;
  std::optional<kernel> k;

  /// sum_i k(x, x_i) c_i
  VectorXd predict(double x) const {
    VectorXd out = VectorXd::Zero(c.cols());
    for (std::size_t i = 0; i < xs.size(); ++i) out += (*k)(x, xs[i]) * c.row(static_cast<Eigen::Index>(i)).transpose();
    return out;
  }
};

/// c = (1/m) U g(mu) U^T y, channelwise; the implicit null space of a thin
/// decomposition receives the sigma -> 0 limit of g.
inline MatrixXd filter_coefficients(const gram_eigen& ge, const spectral_filter& f, double lambda,
                                    const MatrixXd& y) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw parameter_error("fit: lambda must be > 0");
  if (static_cast<std::size_t>(y.rows()) != ge.m) throw contract_error("fit: y rows must equal m");
  VectorXd gv(ge.values.size());
  for (Eigen::Index i = 0; i < gv.size(); ++i) gv[i] = f.on_spectrum(ge.values[i], lambda);
  const MatrixXd proj = ge.vectors.transpose() * y;
  MatrixXd c = ge.vectors * (gv.asDiagonal() * proj);
  if (ge.thin()) {
    const double g0 = f.at_zero(lambda);
    if (g0 != 0.0) c += g0 * (y - ge.vectors * proj);
  }
  c /= static_cast<double>(ge.m);
  return c;
}

inline fitted_estimator fit(const dataset& ds, const kernel& k, const spectral_filter& f, double lambda,
                            const gram_eigen* cached = nullptr) {
  if (!(lambda > 0.0)) throw parameter_error("fit: lambda must be > 0");
  std::optional<gram_eigen> local;
  if (!cached) {
    local = spectral_decomposition(k, ds.xs);
    cached = &*local;
  }
  fitted_estimator out;
  out.c = filter_coefficients(*cached, f, lambda, ds.ys);
  out.lambda = lambda;
  out.filter = f.name();
  out.xs = ds.xs;
  out.k = k;
  return out;
}

/// Independent oracle: direct symmetric solve of ((1/m)K + lambda I) c = y/m.
inline fitted_estimator fit_tikhonov_direct(const dataset& ds, const kernel& k, double lambda) {
  if (!(lambda > 0.0)) throw parameter_error("fit_tikhonov_direct: lambda must be > 0");
  MatrixXd A = assemble_gram(k, ds.xs);
  A.diagonal().array() += lambda;
  Eigen::LDLT<MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw numerical_error("fit_tikhonov_direct: LDLT failed");
  fitted_estimator out;
  out.c = ldlt.solve(ds.ys / static_cast<double>(ds.m()));
  if (!out.c.allFinite()) throw numerical_error("fit_tikhonov_direct: non-finite solution");
  out.lambda = lambda;
  out.filter = "tikhonov(direct)";
  out.xs = ds.xs;
  out.k = k;
  return out;
}

/// H-basis coefficients sqrt(t_n) sum_i e~_n(x_i) c_i of a fitted Mercer estimator.
inline MatrixXd h_coefficients(const mercer_model& model, const MatrixXd& features, const MatrixXd& c) {
  return model.eigenvalues().cwiseSqrt().asDiagonal() * (features.transpose() * c);
}

inline expansion_norms error_norms(const mercer_model& model, const MatrixXd& features, const MatrixXd& c,
                                   const target_function& target) {
  return norms_of_expansion(model, h_coefficients(model, features, c) - target.coefficients());
}

/// Exact (up to truncation) rho- and H-norms of f_{z,lambda} - f_H by basis projection.
inline expansion_norms error_norms(const fitted_estimator& fz, const target_function& target) {
  if (!fz.k || !fz.k->is_mercer())
    throw unsupported_norm_error("error_norms: exact norms need the model kernel; use monte_carlo_rho_error");
  const auto& model = fz.k->model();
  return error_norms(model, model.features(fz.xs), fz.c, target);
}

/// Monte Carlo ||f_{z,lambda} - f_H||_rho with uniform points, predictions via the representer form.
inline double monte_carlo_rho_error(const fitted_estimator& fz, const target_function& target,
                                    std::size_t points, std::uint64_t seed) {
  rng_engine gen(seed);
  std::uniform_real_distribution<double> ux(0.0, two_pi);
  double acc = 0.0;
  for (std::size_t p = 0; p < points; ++p) {
    const double x = ux(gen);
    acc += (fz.predict(x) - target(x)).squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(points));
}

}  // namespace ratelab
