#pragma once

#include <cmath>
#include <vector>

#include "kda/core.hpp"
#include "kda/kernel.hpp"

namespace kda {

/// Grouping of sample indices by class, in first-appearance order of the
/// original labels. Class c of the partition keeps the original label value
/// in `labels[c]` so downstream consumers can report in the caller's space.
struct ClassPartition {
  int n_classes = 0;
  Index n_total = 0;
  std::vector<std::vector<Index>> index_sets;
  std::vector<Index> counts;
  std::vector<double> priors;
  std::vector<long long> labels;
};

inline ClassPartition build_partition(const std::vector<long long>& y) {
  if (y.empty()) throw input_error("build_partition: empty label list");
  ClassPartition p;
  p.n_total = static_cast<Index>(y.size());
  for (Index i = 0; i < p.n_total; ++i) {
    int c = -1;
    for (int k = 0; k < p.n_classes; ++k)
      if (p.labels[static_cast<size_t>(k)] == y[static_cast<size_t>(i)]) { c = k; break; }
    if (c < 0) {
      c = p.n_classes++;
      p.labels.push_back(y[static_cast<size_t>(i)]);
      p.index_sets.emplace_back();
    }
    p.index_sets[static_cast<size_t>(c)].push_back(i);
  }
  if (p.n_classes < 2) throw input_error("build_partition: need at least two classes");
  p.counts.resize(static_cast<size_t>(p.n_classes));
  p.priors.resize(static_cast<size_t>(p.n_classes));
  for (int c = 0; c < p.n_classes; ++c) {
    p.counts[static_cast<size_t>(c)] = static_cast<Index>(p.index_sets[static_cast<size_t>(c)].size());
    p.priors[static_cast<size_t>(c)] =
        static_cast<double>(p.counts[static_cast<size_t>(c)]) / static_cast<double>(p.n_total);
  }
  return p;
}

/// Maps label values onto partition class ids 0..C-1 by lookup, so it also
/// applies to held-out label vectors.
inline std::vector<int> class_ids(const ClassPartition& p, const std::vector<long long>& y) {
  std::vector<int> ids(y.size(), -1);
  for (size_t i = 0; i < y.size(); ++i) {
    for (int c = 0; c < p.n_classes; ++c) {
      if (p.labels[static_cast<size_t>(c)] == y[i]) {
        ids[i] = c;
        break;
      }
    }
    if (ids[i] < 0) throw input_error("class_ids: label not present in partition");
  }
  return ids;
}

/// Block projector E = blockdiag over classes of (1/N_c) * ones(N_c, N_c),
/// laid out in original sample order. E is symmetric, idempotent, and acts
/// on a vector by replacing each entry with its class mean.
inline Matrix centered_between(const ClassPartition& p) {
  const Index n = p.n_total;
  Matrix E = Matrix::Zero(n, n);
  for (int c = 0; c < p.n_classes; ++c) {
    const auto& idx = p.index_sets[static_cast<size_t>(c)];
    const double w = 1.0 / static_cast<double>(idx.size());
    for (Index a : idx)
      for (Index b : idx) E(a, b) = w;
  }
  return E;
}

/// Applies E (class-mean projection) to the rows of M without materializing E.
inline Matrix class_mean_project(const ClassPartition& p, const Matrix& M) {
  if (M.rows() != p.n_total) throw input_error("class_mean_project: row count mismatch");
  Matrix out(M.rows(), M.cols());
  for (int c = 0; c < p.n_classes; ++c) {
    const auto& idx = p.index_sets[static_cast<size_t>(c)];
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(M.cols());
    for (Index i : idx) mean += M.row(i);
    mean /= static_cast<double>(idx.size());
    for (Index i : idx) out.row(i) = mean;
  }
  return out;
}

/// Quadratic-form coefficient matrices. With J = ones(n, n) and the block
/// projector E above:
///   B_w = (1/n)(I - E)        trace (n - C)/n
///   B_b = (1/n)(E - J/n)      trace (C - 1)/n
///   B_t = (1/n)(I - J/n)      trace (n - 1)/n
/// B_b + B_w = B_t holds exactly entrywise.
struct CoefficientMatrices {
  Matrix B_b, B_w, B_t;
};

inline CoefficientMatrices coefficient_matrices(const ClassPartition& p) {
  const Index n = p.n_total;
  const double invn = 1.0 / static_cast<double>(n);
  const Matrix E = centered_between(p);
  CoefficientMatrices out;
  out.B_w = invn * (Matrix::Identity(n, n) - E);
  out.B_b = invn * (E - Matrix::Constant(n, n, invn));
  out.B_t = invn * (Matrix::Identity(n, n) - Matrix::Constant(n, n, invn));
  return out;
}

/// Kernel-space scatter K * B * K, symmetrized to wash out the round-off
/// asymmetry of the two products.
inline Matrix kernel_scatter(const Matrix& K, const Matrix& B) {
  if (K.rows() != K.cols() || B.rows() != B.cols() || K.rows() != B.rows())
    throw input_error("kernel_scatter: shape mismatch");
  Matrix S = K * B * K;
  return 0.5 * (S + S.transpose());
}

/// Thin factors with S_x = K_x * K_x^T:
///   K_b = K * H               (n x C), H[:,c] = sqrt(N_c/n) ((1/N_c) 1_c - (1/n) 1)
///   K_w = (1/sqrt(n)) K (I - E)
///   K_t = (1/sqrt(n)) K (I - J/n)
struct FactorSet {
  Matrix K_b, K_w, K_t;
};

inline FactorSet factor_kb_kw_kt(const GramBundle& bundle, const ClassPartition& p) {
  const Index n = bundle.n_train;
  if (p.n_total != n) throw input_error("factor_kb_kw_kt: partition does not match Gram size");
  const Matrix& K = bundle.K;
  FactorSet f;

  Matrix H = Matrix::Zero(n, p.n_classes);
  const double invn = 1.0 / static_cast<double>(n);
  for (int c = 0; c < p.n_classes; ++c) {
    const double nc = static_cast<double>(p.counts[static_cast<size_t>(c)]);
    const double scale = std::sqrt(nc / static_cast<double>(n));
    H.col(c).setConstant(-scale * invn);
    for (Index i : p.index_sets[static_cast<size_t>(c)]) H(i, c) += scale / nc;
  }
  f.K_b = K * H;

  const double invsqrtn = 1.0 / std::sqrt(static_cast<double>(n));
  // K (I - E) = K - (E K^T)^T; E is symmetric and K is symmetric, so the
  // row-wise class-mean projection of K gives E K = (K E)^T.
  f.K_w = invsqrtn * (K - class_mean_project(p, K).transpose());
  Vector row_means = K.rowwise().mean();
  f.K_t = invsqrtn * (K.colwise() - row_means);
  return f;
}

/// All scatter-side artifacts for one (Gram, partition) pair. S_b, S_w, S_t
/// are the defining K*B*K forms; the factors satisfy S_x = K_x K_x^T up to
/// round-off and are what the rank probes and the stacked solver consume.
struct ScatterSet {
  CoefficientMatrices B;
  Matrix E;  // block projector, also the between-class coefficient of the centered path
  Matrix S_b, S_w, S_t;
  FactorSet factors;
};

inline ScatterSet build_scatter_set(const GramBundle& bundle, const ClassPartition& p) {
  ScatterSet s;
  s.E = centered_between(p);
  s.B = coefficient_matrices(p);
  s.S_b = kernel_scatter(bundle.K, s.B.B_b);
  s.S_w = kernel_scatter(bundle.K, s.B.B_w);
  s.S_t = kernel_scatter(bundle.K, s.B.B_t);
  s.factors = factor_kb_kw_kt(bundle, p);
  return s;
}

/// Scatter pair of the centered path: S_bar_b = Kc E Kc, S_bar_t = Kc Kc,
/// with Kc the double-centered Gram. The fast solver is normalized against
/// these, so its report is checked against the same pair.
inline void centered_scatter_pair(const GramBundle& bundle, const ClassPartition& p,
                                  Matrix& S_bar_b, Matrix& S_bar_t) {
  if (!bundle.centered) throw state_error("centered_scatter_pair: bundle is not centered");
  const Matrix& Kc = bundle.K_centered;
  Matrix EKc = class_mean_project(p, Kc);
  S_bar_b = Kc * EKc;
  S_bar_b = 0.5 * (S_bar_b + S_bar_b.transpose()).eval();
  S_bar_t = Kc * Kc;
  S_bar_t = 0.5 * (S_bar_t + S_bar_t.transpose()).eval();
}

}  // namespace kda
