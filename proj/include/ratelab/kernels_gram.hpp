#pragma once

// Kernels, scaled Gram matrices (1/m)K and their symmetric eigendecompositions.

#include <lapacke.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "ratelab/errors.hpp"
#include "ratelab/mercer_model.hpp"

namespace ratelab {

/// Scalar kernel; vector-valued use is k(x, x') I_d.
class kernel {
 public:
  static kernel mercer(std::shared_ptr<const mercer_model> model) {
    if (!model) throw parameter_error("kernel: null model");
    kernel k;
    k.model_ = std::move(model);
    return k;
  }

  static kernel gaussian_rbf(double lengthscale) {
    if (!(lengthscale > 0.0)) throw parameter_error("gaussian_rbf: lengthscale must be > 0");
    kernel k;
    k.lengthscale_ = lengthscale;
    return k;
  }

  bool is_mercer() const { return static_cast<bool>(model_); }
  const mercer_model& model() const {
    if (!model_) throw unsupported_norm_error("kernel is not a Mercer-truncated model kernel");
    return *model_;
  }
  std::shared_ptr<const mercer_model> model_ptr() const { return model_; }

  double operator()(double x, double xp) const {
    if (model_) return model_->kernel(x, xp);
    const double r = (x - xp) / lengthscale_;
    return std::exp(-0.5 * r * r);
  }

  std::string describe() const {
    if (model_) return "mercer(N=" + std::to_string(model_->n_trunc()) + ")";
    return "gaussian_rbf(" + std::to_string(lengthscale_) + ")";
  }

 private:
  kernel() = default;
  std::shared_ptr<const mercer_model> model_;
  double lengthscale_ = 1.0;
};

/// Symmetric (1/m)[k(x_i, x_j)].
inline MatrixXd assemble_gram(const kernel& k, const std::vector<double>& xs) {
  const auto m = static_cast<Eigen::Index>(xs.size());
  if (m < 1) throw data_error("assemble_gram: empty input");
  MatrixXd G(m, m);
  if (k.is_mercer()) {
    const auto& model = k.model();
    const MatrixXd F = model.features(xs);
    const MatrixXd Fs = F * model.eigenvalues().cwiseSqrt().asDiagonal();
    G.noalias() = Fs * Fs.transpose();
  } else {
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) G(i, j) = k(xs[i], xs[j]);
  }
  if (!G.allFinite()) throw data_error("assemble_gram: non-finite kernel value");
  G /= static_cast<double>(m);
  MatrixXd S = 0.5 * (G + G.transpose());
  return S;
}

/// Descending spectrum and orthonormal eigenvectors of a scaled Gram matrix.
/// When vectors has fewer than m columns, the remaining eigenvalues are exactly 0.
struct gram_eigen {
  VectorXd values;   ///< mu_1 >= ... >= 0, length = vectors.cols()
  MatrixXd vectors;  ///< m x r
  std::size_t m = 0;
  double clamp_magnitude = 0.0;  ///< most negative raw eigenvalue that was clamped (as a positive number)
  bool negative_warning = false;  ///< a raw eigenvalue fell below -1e-10 mu_1
  std::string route = "dense";
  double top() const { return values.size() ? values[0] : 0.0; }
  bool thin() const { return static_cast<std::size_t>(vectors.cols()) < m; }
};

/// Raw LAPACK dsyevd; returns ascending eigenvalues and overwrites A with eigenvectors.
inline VectorXd lapack_syevd(MatrixXd& A) {
  const auto n = static_cast<lapack_int>(A.rows());
  if (A.cols() != A.rows()) throw contract_error("eigendecompose: matrix must be square");
  VectorXd w(n);
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', n, A.data(), n, w.data());
  if (info != 0) {
    const double nrm = A.norm();
    throw numerical_error("eigendecompose: dsyevd failed with info=" + std::to_string(info) +
                          ", Frobenius norm " + std::to_string(nrm));
  }
  return w;
}

inline constexpr double negative_eig_warning = 1e-10;

inline gram_eigen eigendecompose(const MatrixXd& gram) {
  if (!gram.allFinite()) throw data_error("eigendecompose: non-finite entry");
  MatrixXd A = gram;
  VectorXd w = lapack_syevd(A);
  const auto n = w.size();
  gram_eigen ge;
  ge.m = static_cast<std::size_t>(n);
  ge.values.resize(n);
  ge.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ge.values[i] = w[n - 1 - i];
    ge.vectors.col(i) = A.col(n - 1 - i);
  }
  const double top = std::max(ge.values[0], 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (ge.values[i] < 0.0) {
      ge.clamp_magnitude = std::max(ge.clamp_magnitude, -ge.values[i]);
      if (ge.values[i] < -negative_eig_warning * top) ge.negative_warning = true;
      ge.values[i] = 0.0;
    }
  }
  return ge;
}

/// Exact route for Mercer kernels with m > N: (1/m)K = B B^T with B = F T^{1/2}/sqrt(m),
/// so the nonzero spectrum comes from the N x N matrix B^T B.
inline gram_eigen factored_eigendecompose(const mercer_model& model, const MatrixXd& features) {
  const auto m = features.rows();
  MatrixXd B = features * model.eigenvalues().cwiseSqrt().asDiagonal();
  B /= std::sqrt(static_cast<double>(m));
  MatrixXd C = B.transpose() * B;
  C = 0.5 * (C + C.transpose()).eval();
  VectorXd w = lapack_syevd(C);
  const auto n = w.size();
  const double top = std::max(w[n - 1], 0.0);
  gram_eigen ge;
  ge.m = static_cast<std::size_t>(m);
  ge.route = "factored";
  // Directions with mu below this are numerically null and left implicit.
  const double keep = 1e-13 * top;
  Eigen::Index r = 0;
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    if (w[i] < 0.0) {
      ge.clamp_magnitude = std::max(ge.clamp_magnitude, -w[i]);
      if (w[i] < -negative_eig_warning * top) ge.negative_warning = true;
    }
    if (w[i] > keep) ++r;
  }
  ge.values.resize(r);
  MatrixXd V(n, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    ge.values[i] = w[n - 1 - i];
    V.col(i) = C.col(n - 1 - i);
  }
  ge.vectors = B * V;
  for (Eigen::Index i = 0; i < r; ++i) ge.vectors.col(i) /= std::sqrt(ge.values[i]);
  return ge;
}

/// Picks the factored route for Mercer kernels when m > 2N, otherwise dense.
inline gram_eigen spectral_decomposition(const kernel& k, const std::vector<double>& xs) {
  if (k.is_mercer() && xs.size() > 2 * static_cast<std::size_t>(k.model().n_trunc()))
    return factored_eigendecompose(k.model(), k.model().features(xs));
  return eigendecompose(assemble_gram(k, xs));
}

/// Same as above with features already computed.
inline gram_eigen spectral_decomposition(const mercer_model& model, const MatrixXd& features) {
  if (features.rows() > 2 * static_cast<Eigen::Index>(model.n_trunc()))
    return factored_eigendecompose(model, features);
  const MatrixXd Fs = features * model.eigenvalues().cwiseSqrt().asDiagonal();
  MatrixXd G = Fs * Fs.transpose() / static_cast<double>(features.rows());
  G = 0.5 * (G + G.transpose()).eval();
  return eigendecompose(G);
}

/// max |G - U diag(mu) U^T|.
inline double reconstruction_error(const MatrixXd& gram, const gram_eigen& ge) {
  const MatrixXd R = ge.vectors * ge.values.asDiagonal() * ge.vectors.transpose();
  return (gram - R).cwiseAbs().maxCoeff();
}

}  // namespace ratelab
