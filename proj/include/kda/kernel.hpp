#pragma once

#include <cmath>
#include <string>

#include "kda/core.hpp"

namespace kda {

enum class KernelKind { linear, polynomial, rbf };

inline const char* kernel_name(KernelKind k) {
  switch (k) {
    case KernelKind::linear: return "linear";
    case KernelKind::polynomial: return "polynomial";
    case KernelKind::rbf: return "rbf";
  }
  return "?";
}

/// Positive-definite kernel description.
///   linear:      k(x, y) = x.y
///   polynomial:  k(x, y) = (gamma * x.y + coef0)^degree
///   rbf:         k(x, y) = exp(-gamma * |x - y|^2)
struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  double gamma = 1.0;
  int degree = 3;
  double coef0 = 1.0;

  void validate() const {
    if (kind == KernelKind::rbf || kind == KernelKind::polynomial) {
      if (!(gamma > 0.0)) throw input_error("kernel gamma must be > 0");
    }
    if (kind == KernelKind::polynomial && degree < 1)
      throw input_error("polynomial degree must be >= 1");
    if (!std::isfinite(gamma) || !std::isfinite(coef0))
      throw input_error("kernel parameters must be finite");
  }
};

/// Single kernel evaluation between two points of equal dimension.
inline double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                          const Eigen::Ref<const Vector>& y) {
  if (x.size() != y.size()) throw input_error("kernel arguments differ in dimension");
  if (x.size() < 1) throw input_error("kernel arguments must have dimension >= 1");
  switch (spec.kind) {
    case KernelKind::linear:
      return x.dot(y);
    case KernelKind::polynomial:
      return std::pow(spec.gamma * x.dot(y) + spec.coef0, spec.degree);
    case KernelKind::rbf:
      return std::exp(-spec.gamma * (x - y).squaredNorm());
  }
  throw input_error("unknown kernel kind");
}

/// Gram matrix of the training set plus (once centered) everything needed to
/// center out-of-sample kernel rows against the same statistics.
struct GramBundle {
  Matrix K;           // n x n, exactly symmetric by construction
  Matrix K_centered;  // n x n, populated by center_gram
  Vector col_means;   // column means of K
  double grand_mean = 0.0;
  Index n_train = 0;
  bool centered = false;
};

/// Builds the Gram matrix K[i,j] = k(x_i, x_j) for the rows of X.
/// The upper triangle is computed and mirrored so K is bitwise symmetric.
inline GramBundle gram_matrix(const KernelSpec& spec, const Matrix& X) {
  spec.validate();
  const Index n = X.rows();
  if (n < 2) throw input_error("gram_matrix needs at least two samples");
  if (X.cols() < 1) throw input_error("gram_matrix needs at least one feature");
  GramBundle out;
  out.n_train = n;
  out.K.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      const double v = eval_kernel(spec, X.row(i).transpose(), X.row(j).transpose());
      out.K(i, j) = v;
      out.K(j, i) = v;
    }
  }
  return out;
}

/// Double-centers the Gram matrix: K_centered = (I - J/n) K (I - J/n) with J
/// the all-ones matrix, realized entrywise through column means and the grand
/// mean so that out-of-sample centering reproduces training rows exactly.
inline GramBundle center_gram(GramBundle bundle) {
  const Index n = bundle.n_train;
  if (n == 0 || bundle.K.rows() != n) throw state_error("center_gram: bundle has no Gram matrix");
  bundle.col_means = bundle.K.colwise().mean();
  bundle.grand_mean = bundle.col_means.mean();
  bundle.K_centered.resize(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      bundle.K_centered(i, j) = bundle.K(i, j) - bundle.col_means(i) - bundle.col_means(j) + bundle.grand_mean;
  bundle.centered = true;
  return bundle;
}

/// Kernel rows between new points (rows of X_new) and the training set:
/// out[m, j] = k(x_new_m, x_train_j).
inline Matrix cross_gram(const KernelSpec& spec, const Matrix& X_train, const Matrix& X_new) {
  spec.validate();
  if (X_train.cols() != X_new.cols())
    throw input_error("cross_gram: feature dimension mismatch (train has " +
                      std::to_string(X_train.cols()) + ", query has " +
                      std::to_string(X_new.cols()) + ")");
  Matrix out(X_new.rows(), X_train.rows());
  for (Index m = 0; m < X_new.rows(); ++m)
    for (Index j = 0; j < X_train.rows(); ++j)
      out(m, j) = eval_kernel(spec, X_new.row(m).transpose(), X_train.row(j).transpose());
  return out;
}

/// Centers one out-of-sample kernel row against the training statistics:
/// out[j] = k[j] - mean(k) - col_means[j] + grand_mean.
/// Applied to a training row of K this reproduces the matching row of
/// K_centered bitwise (same arithmetic, same order).
inline Vector center_cross(const Vector& k_row, const GramBundle& bundle) {
  if (!bundle.centered) throw state_error("center_cross: bundle is not centered");
  if (k_row.size() != bundle.n_train)
    throw input_error("center_cross: row length does not match training size");
  const double row_mean = k_row.mean();
  Vector out(k_row.size());
  for (Index j = 0; j < k_row.size(); ++j)
    out(j) = k_row(j) - row_mean - bundle.col_means(j) + bundle.grand_mean;
  return out;
}

}  // namespace kda
