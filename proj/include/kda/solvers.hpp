#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "kda/core.hpp"
#include "kda/scatter.hpp"

namespace kda {

enum class SolverKind {
  reg_cholqr,
  gsvd_cod,
  svd_total,
  crossproduct,
  spectral_regression,
  oracle_pinv
};

inline const char* solver_name(SolverKind s) {
  switch (s) {
    case SolverKind::reg_cholqr: return "cholqr";
    case SolverKind::gsvd_cod: return "gsvd";
    case SolverKind::svd_total: return "svd";
    case SolverKind::crossproduct: return "cross";
    case SolverKind::spectral_regression: return "sr";
    case SolverKind::oracle_pinv: return "oracle";
  }
  return "?";
}

enum class EpsilonMode { absolute, trace_scaled };

/// Shared solver knobs. `epsilon` is either the ridge itself (absolute mode)
/// or a multiplier of trace(reference)/n (trace_scaled mode, the default).
struct SolverOptions {
  double epsilon = 1e-4;
  EpsilonMode epsilon_mode = EpsilonMode::trace_scaled;
  double rank_tol_rel = 1e-10;
  std::optional<Index> max_dims;

  void validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
      throw input_error("solver epsilon must be finite and >= 0");
    if (!(rank_tol_rel > 0.0 && rank_tol_rel < 1.0))
      throw input_error("rank tolerance must lie in (0, 1)");
    if (max_dims && *max_dims < 1) throw input_error("max_dims must be >= 1");
  }
};

/// Ridge value for a given reference matrix under the chosen mode.
inline double resolve_epsilon(const SolverOptions& opts, const Matrix& reference) {
  if (opts.epsilon_mode == EpsilonMode::absolute) return opts.epsilon;
  if (reference.rows() == 0) return opts.epsilon;
  return opts.epsilon * reference.trace() / static_cast<double>(reference.rows());
}

/// Count of entries of a non-increasing, non-negative sequence that exceed
/// tol_rel times the leading entry. Zero when the leading entry is not
/// positive.
inline Index numerical_rank(const Vector& descending_values, double tol_rel) {
  if (descending_values.size() == 0) return 0;
  const double top = descending_values(0);
  if (!(top > 0.0)) return 0;
  const double cut = tol_rel * top;
  Index r = 0;
  while (r < descending_values.size() && descending_values(r) > cut) ++r;
  return r;
}

namespace detail {

struct SymEig {
  Vector values;   // descending
  Matrix vectors;  // columns aligned with values
};

inline SymEig sym_eig_descending(const Matrix& A) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(A);
  if (es.info() != Eigen::Success) throw solver_error("symmetric eigendecomposition failed");
  SymEig out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  return out;
}

/// Fixes the sign of each column so its largest-magnitude entry is positive.
inline void canonicalize_signs(Matrix& W) {
  for (Index j = 0; j < W.cols(); ++j) {
    Index imax = 0;
    W.col(j).cwiseAbs().maxCoeff(&imax);
    if (W(imax, j) < 0.0) W.col(j) = -W.col(j);
  }
}

class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

/// Output of every pencil solver. W is n x D with eigvals descending and
/// non-negative; D <= C-1 and D <= rank of the between scatter. The rank
/// fields are filled by the fitting layer (they need the factor set), not by
/// the individual solvers.
struct EigResult {
  Matrix W;
  Vector eigvals;
  Index rank_t = -1, rank_w = -1, rank_b = -1;
  bool rank_condition_holds = false;
  double residual = 0.0;
  SolverKind solver = SolverKind::oracle_pinv;
  double wall_time = 0.0;

  Index dims() const { return W.cols(); }
};

/// Worst relative eigenpair residual of the pencil (S_b, S_check):
///   max_i |S_b w_i - lambda_i S_check w_i| / ((|S_b|_F + lambda_i |S_check|_F) |w_i|)
/// Also stores the value on the result. Empty results score 0.
inline double residual(const Matrix& S_b, const Matrix& S_check, EigResult& r) {
  if (r.W.cols() == 0) {
    r.residual = 0.0;
    return 0.0;
  }
  if (S_b.rows() != r.W.rows() || S_check.rows() != r.W.rows())
    throw input_error("residual: shape mismatch");
  const double nb = S_b.norm();
  const double nc = S_check.norm();
  double worst = 0.0;
  for (Index i = 0; i < r.W.cols(); ++i) {
    const Vector w = r.W.col(i);
    const double lambda = r.eigvals(i);
    const double num = (S_b * w - lambda * (S_check * w)).norm();
    const double den = (nb + lambda * nc) * w.norm();
    if (den > 0.0) worst = std::max(worst, num / den);
  }
  r.residual = worst;
  return worst;
}

/// Largest principal angle (radians) between the column spans of A and B.
/// Returns 0 for two empty spans and pi/2 when the dimensions differ.
inline double max_principal_angle(const Matrix& A, const Matrix& B) {
  if (A.cols() == 0 && B.cols() == 0) return 0.0;
  if (A.cols() != B.cols()) return 1.5707963267948966;
  Eigen::HouseholderQR<Matrix> qa(A), qb(B);
  const Matrix Qa = qa.householderQ() * Matrix::Identity(A.rows(), A.cols());
  const Matrix Qb = qb.householderQ() * Matrix::Identity(B.rows(), B.cols());
  Eigen::JacobiSVD<Matrix> svd(Qa.transpose() * Qb);
  const double smin = std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0);
  return std::acos(smin);
}

/// Reference solver: spectral pseudoinverse of S_check. Restricts the pencil
/// to the numerical range of S_check, whitens it there, and solves the dense
/// symmetric problem. Slow and allocation-heavy, but has no tuning knobs
/// beyond the rank cut, which is what makes it a trustworthy yardstick.
inline EigResult oracle_pinv_gep(const Matrix& S_b, const Matrix& S_check, double rank_tol_rel) {
  if (!(rank_tol_rel > 0.0 && rank_tol_rel < 1.0))
    throw input_error("rank tolerance must lie in (0, 1)");
  if (S_b.rows() != S_check.rows()) throw input_error("oracle_pinv_gep: shape mismatch");
  detail::StopWatch watch;
  EigResult res;
  res.solver = SolverKind::oracle_pinv;
  const Index n = S_b.rows();

  detail::SymEig chk = detail::sym_eig_descending(S_check);
  const Index r = numerical_rank(chk.values, rank_tol_rel);
  if (r == 0) throw solver_error("oracle_pinv_gep: S_check is numerically zero");
  const Matrix Qr = chk.vectors.leftCols(r);
  const Vector inv_sqrt = chk.values.head(r).cwiseSqrt().cwiseInverse();

  Matrix M = inv_sqrt.asDiagonal() * (Qr.transpose() * S_b * Qr) * inv_sqrt.asDiagonal();
  M = 0.5 * (M + M.transpose()).eval();
  detail::SymEig me = detail::sym_eig_descending(M);
  const Index d = numerical_rank(me.values, rank_tol_rel);

  res.W.resize(n, d);
  if (d > 0) res.W = Qr * (inv_sqrt.asDiagonal() * me.vectors.leftCols(d));
  res.eigvals = me.values.head(d).cwiseMax(0.0);
  detail::canonicalize_signs(res.W);
  res.wall_time = watch.seconds();
  return res;
}

/// Ridge-Cholesky route: factor S_check + eps I = L L^T, fold the pencil into
/// the ordinary symmetric problem L^-1 S_b L^-T, and map eigenvectors back
/// through L^-T. The returned pairs solve the *ridged* pencil exactly:
/// W^T (S_check + eps I) W = I.
inline EigResult solve_reg_cholqr(const Matrix& S_b, const Matrix& S_check,
                                  const SolverOptions& opts, Index d_target = -1) {
  opts.validate();
  if (S_b.rows() != S_check.rows() || S_b.rows() != S_b.cols() || S_check.rows() != S_check.cols())
    throw input_error("solve_reg_cholqr: shape mismatch");
  detail::StopWatch watch;
  EigResult res;
  res.solver = SolverKind::reg_cholqr;
  const Index n = S_b.rows();

  double eps = resolve_epsilon(opts, S_check);
  if (eps == 0.0) eps = 1e-12;  // keep the factorization strictly positive definite
  Matrix A = S_check;
  A.diagonal().array() += eps;
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success)
    throw solver_error("solve_reg_cholqr: Cholesky failed; increase epsilon");

  // C = L^-1 S_b L^-T through two triangular solves; S_b symmetric.
  Matrix Y = llt.matrixL().solve(S_b);
  Matrix C = llt.matrixL().solve(Y.transpose());
  C = 0.5 * (C + C.transpose()).eval();

  detail::SymEig ce = detail::sym_eig_descending(C);
  Index d = numerical_rank(ce.values, opts.rank_tol_rel);
  if (d_target >= 0) d = std::min(d, d_target);
  res.W.resize(n, d);
  if (d > 0) res.W = llt.matrixU().solve(ce.vectors.leftCols(d));
  res.eigvals = ce.values.head(d).cwiseMax(0.0);
  detail::canonicalize_signs(res.W);
  res.wall_time = watch.seconds();
  return res;
}

/// Total-scatter SVD route: thin SVD of the total factor K_t (so S_t = U S^2 U^T),
/// then the pencil restricted to the numerical range of S_t becomes the dense
/// symmetric problem S^-1 U^T S_b U S^-1 whose eigenvalues land in [0, 1].
inline EigResult solve_svd_total(const Matrix& K_t, const Matrix& S_b,
                                 const SolverOptions& opts, Index d_target = -1) {
  opts.validate();
  if (K_t.rows() != S_b.rows()) throw input_error("solve_svd_total: shape mismatch");
  detail::StopWatch watch;
  EigResult res;
  res.solver = SolverKind::svd_total;
  const Index n = K_t.rows();

  Eigen::BDCSVD<Matrix> svd(K_t, Eigen::ComputeThinU);
  const Vector sig = svd.singularValues();
  const Index r = numerical_rank(sig, opts.rank_tol_rel);
  if (r == 0) throw solver_error("solve_svd_total: total scatter is numerically zero");
  const Matrix Ur = svd.matrixU().leftCols(r);
  const Vector inv_sig = sig.head(r).cwiseInverse();

  Matrix M = inv_sig.asDiagonal() * (Ur.transpose() * S_b * Ur) * inv_sig.asDiagonal();
  M = 0.5 * (M + M.transpose()).eval();
  detail::SymEig me = detail::sym_eig_descending(M);
  Index d = numerical_rank(me.values, opts.rank_tol_rel);
  if (d_target >= 0) d = std::min(d, d_target);
  res.W.resize(n, d);
  if (d > 0) res.W = Ur * (inv_sig.asDiagonal() * me.vectors.leftCols(d));
  res.eigvals = me.values.head(d).cwiseMax(0.0);
  detail::canonicalize_signs(res.W);
  res.wall_time = watch.seconds();
  return res;
}

/// Stacked-factor route. Stacks Z = [K_b, K_w]^T, so Z^T Z equals the total
/// scatter, and realizes a complete orthogonal decomposition of Z by a
/// column-pivoted QR followed by a QR of the transposed leading block:
///   Z = Q [R 0; 0 0] V^T,   R square and invertible of size t = rank(Z).
/// The singular values of the first C rows of Q's leading t columns are the
/// cosines b_i^(1/2) of the pencil; eigenvectors come back through R. All
/// retained directions satisfy W^T S_t W = I and eigenvalues land in [0, 1].
inline EigResult solve_gsvd_cod(const Matrix& K_b, const Matrix& K_w,
                                const SolverOptions& opts, Index d_target = -1) {
  opts.validate();
  if (K_b.rows() != K_w.rows()) throw input_error("solve_gsvd_cod: factor row mismatch");
  detail::StopWatch watch;
  EigResult res;
  res.solver = SolverKind::gsvd_cod;
  const Index n = K_b.rows();
  const Index c = K_b.cols();

  Matrix Z(c + K_w.cols(), n);
  Z.topRows(c) = K_b.transpose();
  Z.bottomRows(K_w.cols()) = K_w.transpose();

  Eigen::ColPivHouseholderQR<Matrix> qr(Z);
  // Column pivoting keeps |R(i,i)| non-increasing, so the diagonal doubles as
  // a rank probe.
  const Vector rdiag = qr.matrixR().diagonal().cwiseAbs();
  const Index t = numerical_rank(rdiag, opts.rank_tol_rel);
  if (t == 0) throw solver_error("solve_gsvd_cod: stacked factor is numerically zero");

  // Compress the rank-deficient trailing block: T = R1 P^T (t x n), then a QR
  // of T^T yields Z = Q [Rt^T 0; 0 0] Qtilde^T.
  Matrix R1 = qr.matrixR().topRows(t).triangularView<Eigen::Upper>();
  Matrix T = R1 * qr.colsPermutation().transpose();
  Eigen::HouseholderQR<Matrix> qr2(T.transpose());
  const Matrix Qtilde = qr2.householderQ() * Matrix::Identity(n, t);
  Matrix Rt = qr2.matrixQR().topRows(t).triangularView<Eigen::Upper>();

  // Leading C x t block of Q, extracted by applying Q^T to the first C
  // columns of the identity (cheap: C columns instead of t).
  Matrix slab = Matrix::Identity(c + K_w.cols(), c);
  Matrix QtSlab = qr.householderQ().adjoint() * slab;
  Matrix P11 = QtSlab.topRows(t).transpose();

  Eigen::JacobiSVD<Matrix> svd(P11, Eigen::ComputeThinV);
  const Vector sig = svd.singularValues();
  Index d = numerical_rank(sig, opts.rank_tol_rel);
  d = std::min(d, c > 0 ? c - 1 : Index(0));
  if (d_target >= 0) d = std::min(d, d_target);

  res.W.resize(n, d);
  res.eigvals.resize(d);
  if (d > 0) {
    // Back-substitute through R: columns are Qtilde * R^-1 * V_d with
    // R = Rt^T lower triangular.
    Matrix Y = Rt.transpose().triangularView<Eigen::Lower>().solve(svd.matrixV().leftCols(d));
    res.W = Qtilde * Y;
    res.eigvals = sig.head(d).array().square().min(1.0 + 1e-9).matrix();
  }
  detail::canonicalize_signs(res.W);
  res.wall_time = watch.seconds();
  return res;
}

/// Cross-product route: eigendecompose the small C x C product K_b^T K_b to
/// get an orthonormal basis of the between-scatter range, then diagonalize
/// the within scatter inside that basis and rescale by (lambda_w + eps)^-1/2.
/// Cheap, but the basis never leaves range(S_b), so it degrades whenever the
/// within scatter couples that range to its complement; callers get the
/// honest (often large) pencil residual in the report.
inline EigResult solve_crossproduct(const Matrix& K_b, const Matrix& S_w,
                                    const SolverOptions& opts, Index d_target = -1) {
  opts.validate();
  if (K_b.rows() != S_w.rows()) throw input_error("solve_crossproduct: shape mismatch");
  detail::StopWatch watch;
  EigResult res;
  res.solver = SolverKind::crossproduct;
  const Index n = K_b.rows();

  detail::SymEig be = detail::sym_eig_descending(K_b.transpose() * K_b);
  const Index rb = numerical_rank(be.values, opts.rank_tol_rel);
  if (rb == 0) throw solver_error("solve_crossproduct: between scatter is numerically zero");
  const Matrix Ub =
      K_b * (be.vectors.leftCols(rb) * be.values.head(rb).cwiseSqrt().cwiseInverse().asDiagonal());

  Matrix Mw = Ub.transpose() * S_w * Ub;
  Mw = 0.5 * (Mw + Mw.transpose()).eval();
  detail::SymEig we = detail::sym_eig_descending(Mw);

  double eps = resolve_epsilon(opts, S_w);
  if (eps == 0.0) eps = 1e-12;
  const Vector lam_w = we.values.cwiseMax(0.0);
  const Matrix Gamma = Ub * we.vectors * (lam_w.array() + eps).rsqrt().matrix().asDiagonal();

  // Report eigenvalues as the between-scatter quadratic forms of the columns,
  // sorted descending. These live on the (S_b, S_w + eps I) scale, not [0, 1].
  Vector diag_b(rb);
  for (Index i = 0; i < rb; ++i) diag_b(i) = (K_b.transpose() * Gamma.col(i)).squaredNorm();
  std::vector<Index> order(static_cast<size_t>(rb));
  for (Index i = 0; i < rb; ++i) order[static_cast<size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return diag_b(a) > diag_b(b); });

  Index d = rb;
  if (d_target >= 0) d = std::min(d, d_target);
  res.W.resize(n, d);
  res.eigvals.resize(d);
  for (Index i = 0; i < d; ++i) {
    res.W.col(i) = Gamma.col(order[static_cast<size_t>(i)]);
    res.eigvals(i) = std::max(diag_b(order[static_cast<size_t>(i)]), 0.0);
  }
  detail::canonicalize_signs(res.W);
  res.wall_time = watch.seconds();
  return res;
}

/// Orthonormal class-indicator basis used by the fast route: the constant
/// vector is prepended as a pivot, the C class indicators are Gram-Schmidt
/// orthonormalized against it and each other (the last one is linearly
/// dependent and drops out), and the pivot itself is discarded. The result
/// V is n x (C-1) with V^T V = I, V^T 1 = 0, and E V = V.
inline Matrix sr_indicator_basis(const ClassPartition& p) {
  const Index n = p.n_total;
  if (p.n_classes < 2) throw input_error("sr_indicator_basis: need at least two classes");
  std::vector<Vector> accepted;
  accepted.reserve(static_cast<size_t>(p.n_classes));
  Vector pivot = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  accepted.push_back(pivot);
  for (int c = 0; c < p.n_classes; ++c) {
    Vector v = Vector::Zero(n);
    for (Index i : p.index_sets[static_cast<size_t>(c)]) v(i) = 1.0;
    const double orig = v.norm();
    // Two projection passes; the indicators are mutually orthogonal already,
    // so this is overkill everywhere except against the pivot, where it
    // guarantees orthogonality to working precision.
    for (int pass = 0; pass < 2; ++pass)
      for (const Vector& u : accepted) v -= u.dot(v) * u;
    const double nv = v.norm();
    if (nv > 1e-12 * orig) accepted.push_back(v / nv);
  }
  if (static_cast<int>(accepted.size()) != p.n_classes)
    throw solver_error("sr_indicator_basis: unexpected indicator rank");
  Matrix V(n, p.n_classes - 1);
  for (int c = 1; c < p.n_classes; ++c) V.col(c - 1) = accepted[static_cast<size_t>(c)];
  return V;
}

/// Fast route: instead of an eigendecomposition, solve the ridged linear
/// system (K_centered + eps I) G = V for the indicator basis V by Cholesky.
/// As eps -> 0 (and K_centered nonsingular off the constant vector) the
/// columns of G satisfy G^T Kc Kc G = G^T Kc E Kc G = I, i.e. they span the
/// leading eigenspace of the centered pencil. Reported eigenvalues are the
/// between-scatter forms diag(G^T Kc E Kc G), sorted descending.
inline EigResult solve_spectral_regression(const Matrix& K_centered, const ClassPartition& p,
                                           const SolverOptions& opts) {
  opts.validate();
  if (K_centered.rows() != K_centered.cols() || K_centered.rows() != p.n_total)
    throw input_error("solve_spectral_regression: shape mismatch");
  detail::StopWatch watch;
  EigResult res;
  res.solver = SolverKind::spectral_regression;

  const Matrix V = sr_indicator_basis(p);
  Matrix A = K_centered;
  A.diagonal().array() += resolve_epsilon(opts, K_centered);
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success)
    throw solver_error(
        "solve_spectral_regression: Cholesky failed (centered Gram too close to singular); "
        "increase epsilon");
  Matrix G = llt.solve(V);

  // diag(G^T Kc E Kc G) without forming the dense scatter.
  const Matrix KcG = K_centered * G;
  const Matrix EKcG = class_mean_project(p, KcG);
  Vector vals(G.cols());
  for (Index i = 0; i < G.cols(); ++i) vals(i) = KcG.col(i).dot(EKcG.col(i));

  std::vector<Index> order(static_cast<size_t>(G.cols()));
  for (Index i = 0; i < G.cols(); ++i) order[static_cast<size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return vals(a) > vals(b); });
  res.W.resize(G.rows(), G.cols());
  res.eigvals.resize(G.cols());
  for (Index i = 0; i < G.cols(); ++i) {
    res.W.col(i) = G.col(order[static_cast<size_t>(i)]);
    res.eigvals(i) = std::max(vals(order[static_cast<size_t>(i)]), 0.0);
  }
  detail::canonicalize_signs(res.W);
  res.wall_time = watch.seconds();
  return res;
}

}  // namespace kda
