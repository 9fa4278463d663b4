#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "kda/classify.hpp"
#include "kda/core.hpp"
#include "kda/dataset.hpp"
#include "kda/kernel.hpp"
#include "kda/scatter.hpp"
#include "kda/solvers.hpp"

namespace kda {

/// Normalization applied to a fitted basis. `raw` keeps whatever scaling the
/// solver produced; the others rescale or rotate columns without changing
/// the spanned subspace (degenerate directions excepted):
///   kda  : each column scaled so its within-scatter form is 1 (or left
///          alone when that form is numerically 0)
///   kuda : W^T S_t W = I via the symmetric inverse square root
///   okda : W^T K W = I via the symmetric inverse square root
enum class Variant { raw, kda, kuda, okda };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::raw: return "raw";
    case Variant::kda: return "kda";
    case Variant::kuda: return "kuda";
    case Variant::okda: return "okda";
  }
  return "?";
}

/// Training-time context a model keeps in memory so constraints can be
/// re-applied without re-evaluating the kernel. Deliberately not persisted:
/// the model file stores only what out-of-sample embedding needs.
struct FitContext {
  GramBundle bundle;
  ClassPartition partition;
  ScatterSet scatter;
  std::vector<long long> labels;
};

struct NdaModel {
  KernelSpec kernel;
  Matrix train_X;     // n x L, retained for out-of-sample kernel rows
  Vector col_means;   // Gram column means frozen at fit time
  double grand_mean = 0.0;
  Matrix W;           // n x D discriminant coefficients
  Vector eigvals;     // solver spectrum, descending (unchanged by variants)
  Variant variant = Variant::raw;
  SolverKind solver = SolverKind::oracle_pinv;
  EigResult report;
  std::vector<std::string> warnings;
  std::shared_ptr<const FitContext> context;  // absent on models loaded from disk

  Index n_train() const { return train_X.rows(); }
  Index dims() const { return W.cols(); }
};

namespace detail {

/// Symmetric inverse square root of an SPD form, dropping directions whose
/// eigenvalue falls below tol_rel times the largest. Returns the number of
/// kept directions through `kept`.
inline Matrix sym_inverse_sqrt(const Matrix& A, double tol_rel, Index& kept) {
  SymEig ae = sym_eig_descending(A);
  kept = numerical_rank(ae.values, tol_rel);
  if (kept == 0) throw solver_error("constraint form is numerically zero");
  return ae.vectors.leftCols(kept) * ae.values.head(kept).cwiseSqrt().cwiseInverse().asDiagonal();
}

inline Vector factor_singular_spectrum(const Matrix& M) {
  return Eigen::BDCSVD<Matrix>(M).singularValues();
}

}  // namespace detail

/// Fits a discriminant basis on the dataset with the requested solver.
/// The returned model is `raw`; apply_constraint turns it into one of the
/// normalized variants. The report carries the solver spectrum, the factor
/// ranks, whether rank additivity (rank S_t = rank S_w + rank S_b) holds,
/// and the eigenpair residual of the pencil the solver actually addressed:
///   cholqr        (S_b, S_t + eps I)
///   gsvd/svd/oracle (S_b, S_t)
///   cross         (S_b, S_w + eps I)
///   sr            (Kc E Kc, Kc Kc), the centered pair it is normalized on
inline NdaModel fit(const LabeledDataset& data, const KernelSpec& kernel, SolverKind solver,
                    const SolverOptions& opts = {}) {
  kernel.validate();
  opts.validate();
  if (data.n() != static_cast<Index>(data.y.size()))
    throw input_error("fit: label count does not match sample count");
  if (data.n() < 2) throw input_error("fit: need at least two samples");
  if (!data.X.allFinite()) throw input_error("fit: features contain NaN or Inf");

  auto ctx = std::make_shared<FitContext>();
  ctx->labels = data.y;
  ctx->partition = build_partition(data.y);
  if (ctx->partition.n_classes < 2) throw input_error("fit: need at least two classes");
  ctx->bundle = center_gram(gram_matrix(kernel, data.X));
  ctx->scatter = build_scatter_set(ctx->bundle, ctx->partition);

  const Index c = ctx->partition.n_classes;
  Index d_target = c - 1;
  if (opts.max_dims) d_target = std::min<Index>(d_target, *opts.max_dims);

  EigResult res;
  switch (solver) {
    case SolverKind::reg_cholqr:
      res = solve_reg_cholqr(ctx->scatter.S_b, ctx->scatter.S_t, opts, d_target);
      break;
    case SolverKind::gsvd_cod:
      res = solve_gsvd_cod(ctx->scatter.factors.K_b, ctx->scatter.factors.K_w, opts, d_target);
      break;
    case SolverKind::svd_total:
      res = solve_svd_total(ctx->scatter.factors.K_t, ctx->scatter.S_b, opts, d_target);
      break;
    case SolverKind::crossproduct:
      res = solve_crossproduct(ctx->scatter.factors.K_b, ctx->scatter.S_w, opts, d_target);
      break;
    case SolverKind::spectral_regression:
      res = solve_spectral_regression(ctx->bundle.K_centered, ctx->partition, opts);
      break;
    case SolverKind::oracle_pinv:
      res = oracle_pinv_gep(ctx->scatter.S_b, ctx->scatter.S_t, opts.rank_tol_rel);
      if (res.dims() > d_target) {
        res.W = res.W.leftCols(d_target).eval();
        res.eigvals = res.eigvals.head(d_target).eval();
      }
      break;
  }
  if (res.dims() == 0)
    throw solver_error("fit: no discriminant directions (between scatter numerically zero)");

  res.rank_b = numerical_rank(detail::factor_singular_spectrum(ctx->scatter.factors.K_b),
                              opts.rank_tol_rel);
  res.rank_w = numerical_rank(detail::factor_singular_spectrum(ctx->scatter.factors.K_w),
                              opts.rank_tol_rel);
  res.rank_t = numerical_rank(detail::factor_singular_spectrum(ctx->scatter.factors.K_t),
                              opts.rank_tol_rel);
  res.rank_condition_holds = res.rank_t == res.rank_w + res.rank_b;

  switch (solver) {
    case SolverKind::reg_cholqr: {
      Matrix ridged = ctx->scatter.S_t;
      double eps = resolve_epsilon(opts, ctx->scatter.S_t);
      if (eps == 0.0) eps = 1e-12;
      ridged.diagonal().array() += eps;
      residual(ctx->scatter.S_b, ridged, res);
      break;
    }
    case SolverKind::crossproduct: {
      Matrix ridged = ctx->scatter.S_w;
      double eps = resolve_epsilon(opts, ctx->scatter.S_w);
      if (eps == 0.0) eps = 1e-12;
      ridged.diagonal().array() += eps;
      residual(ctx->scatter.S_b, ridged, res);
      break;
    }
    case SolverKind::spectral_regression: {
      Matrix sbb, sbt;
      centered_scatter_pair(ctx->bundle, ctx->partition, sbb, sbt);
      residual(sbb, sbt, res);
      break;
    }
    default:
      residual(ctx->scatter.S_b, ctx->scatter.S_t, res);
      break;
  }

  NdaModel m;
  m.kernel = kernel;
  m.train_X = data.X;
  m.col_means = ctx->bundle.col_means;
  m.grand_mean = ctx->bundle.grand_mean;
  m.W = res.W;
  m.eigvals = res.eigvals;
  m.variant = Variant::raw;
  m.solver = solver;
  m.report = res;
  m.context = std::move(ctx);
  return m;
}

/// Re-normalizes the fitted basis per the requested variant. Needs the
/// training context, so it works on freshly fitted models but not on models
/// loaded from disk (those no longer know their class labels).
inline NdaModel apply_constraint(const NdaModel& model, Variant variant) {
  NdaModel out = model;
  out.variant = variant;
  if (variant == Variant::raw) return out;
  if (!model.context)
    throw state_error("apply_constraint: model has no training context (loaded from disk?); "
                      "re-fit before applying a variant");
  const ScatterSet& sc = model.context->scatter;
  const double tol = 1e-8;

  if (variant == Variant::kda) {
    const double floor = tol * sc.S_w.norm();
    for (Index i = 0; i < out.W.cols(); ++i) {
      const Vector w = out.W.col(i);
      const double s = w.dot(sc.S_w * w);
      if (s > floor * w.squaredNorm()) out.W.col(i) /= std::sqrt(s);
      // else: direction lies in the within-scatter null space; its form is
      // already 0 and any rescaling would be arbitrary.
    }
    return out;
  }

  const Matrix& metric = variant == Variant::kuda ? sc.S_t : model.context->bundle.K;
  Matrix A = out.W.transpose() * metric * out.W;
  A = 0.5 * (A + A.transpose()).eval();
  Index kept = 0;
  // Symmetric inverse square root: a near-identity form stays near identity,
  // so re-applying a constraint a model already satisfies is a no-op.
  detail::SymEig ae = detail::sym_eig_descending(A);
  kept = numerical_rank(ae.values, tol);
  if (kept == 0) throw solver_error("apply_constraint: constraint form is numerically zero");
  if (kept < A.rows()) {
    out.warnings.push_back(std::string(variant_name(variant)) + ": dropped " +
                           std::to_string(A.rows() - kept) +
                           " degenerate direction(s) during normalization");
    out.W = (out.W * ae.vectors.leftCols(kept) *
             ae.values.head(kept).cwiseSqrt().cwiseInverse().asDiagonal())
                .eval();
    out.eigvals = out.eigvals.head(kept).eval();
  } else {
    const Matrix inv_sqrt = ae.vectors *
                            ae.values.cwiseSqrt().cwiseInverse().asDiagonal() *
                            ae.vectors.transpose();
    out.W = (out.W * inv_sqrt).eval();
  }
  return out;
}

/// Embeds new points: each kernel row against the training set is centered
/// with the frozen training statistics and projected through W. Applied to
/// the training rows themselves this reproduces Kc * W column for column.
inline Matrix transform(const NdaModel& model, const Matrix& X_new) {
  if (model.n_train() == 0) throw state_error("transform: model is empty");
  if (X_new.cols() != model.train_X.cols())
    throw input_error("transform: expected " + std::to_string(model.train_X.cols()) +
                      " features, got " + std::to_string(X_new.cols()));
  GramBundle stats;
  stats.n_train = model.n_train();
  stats.col_means = model.col_means;
  stats.grand_mean = model.grand_mean;
  stats.centered = true;
  const Matrix cross = cross_gram(model.kernel, model.train_X, X_new);
  Matrix Z(X_new.rows(), model.dims());
  for (Index i = 0; i < cross.rows(); ++i)
    Z.row(i) = (model.W.transpose() * center_cross(cross.row(i).transpose(), stats)).transpose();
  return Z;
}

// ---------------------------------------------------------------------------
// Persistence. Little-endian throughout; layout:
//   magic "KDAMODEL", format version u32
//   n_train u64, n_features u64, dims u64
//   kernel: kind u32, gamma f64, degree u32, coef0 f64
//   variant u32, solver u32
//   payload: train_X row-major, col_means, grand_mean, W column-major,
//            eigvals (all f64)
//   crc32 of the payload bytes, u32
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr char kModelMagic[8] = {'K', 'D', 'A', 'M', 'O', 'D', 'E', 'L'};
inline constexpr std::uint32_t kModelVersion = 1;

inline std::uint32_t crc32(const unsigned char* data, size_t len) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xffffffffu;
  for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
  return crc ^ 0xffffffffu;
}

inline void append_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
inline void append_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
inline void append_f64(std::string& buf, double v) {
  append_u64(buf, std::bit_cast<std::uint64_t>(v));
}

struct Cursor {
  const unsigned char* p;
  size_t remaining;
  void need(size_t k) const {
    if (remaining < k) throw load_error(load_error::Kind::truncated, "model file is truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    p += 4;
    remaining -= 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    p += 8;
    remaining -= 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
};

}  // namespace detail

inline void save_model(const NdaModel& model, const std::string& path) {
  std::string head;
  head.append(detail::kModelMagic, sizeof(detail::kModelMagic));
  detail::append_u32(head, detail::kModelVersion);
  detail::append_u64(head, static_cast<std::uint64_t>(model.n_train()));
  detail::append_u64(head, static_cast<std::uint64_t>(model.train_X.cols()));
  detail::append_u64(head, static_cast<std::uint64_t>(model.dims()));
  detail::append_u32(head, static_cast<std::uint32_t>(model.kernel.kind));
  detail::append_f64(head, model.kernel.gamma);
  detail::append_u32(head, static_cast<std::uint32_t>(model.kernel.degree));
  detail::append_f64(head, model.kernel.coef0);
  detail::append_u32(head, static_cast<std::uint32_t>(model.variant));
  detail::append_u32(head, static_cast<std::uint32_t>(model.solver));

  std::string payload;
  payload.reserve(static_cast<size_t>(
      8 * (model.train_X.size() + model.col_means.size() + 1 + model.W.size() +
           model.eigvals.size())));
  for (Index i = 0; i < model.train_X.rows(); ++i)
    for (Index j = 0; j < model.train_X.cols(); ++j) detail::append_f64(payload, model.train_X(i, j));
  for (Index i = 0; i < model.col_means.size(); ++i) detail::append_f64(payload, model.col_means(i));
  detail::append_f64(payload, model.grand_mean);
  for (Index j = 0; j < model.W.cols(); ++j)
    for (Index i = 0; i < model.W.rows(); ++i) detail::append_f64(payload, model.W(i, j));
  for (Index i = 0; i < model.eigvals.size(); ++i) detail::append_f64(payload, model.eigvals(i));

  std::string tail;
  detail::append_u32(tail, detail::crc32(reinterpret_cast<const unsigned char*>(payload.data()),
                                         payload.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw load_error(load_error::Kind::io, "cannot write '" + path + "'");
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  out.write(tail.data(), static_cast<std::streamsize>(tail.size()));
  if (!out) throw load_error(load_error::Kind::io, "failed writing '" + path + "'");
}

inline NdaModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw load_error(load_error::Kind::io, "cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(detail::kModelMagic) ||
      std::string_view(bytes.data(), sizeof(detail::kModelMagic)) !=
          std::string_view(detail::kModelMagic, sizeof(detail::kModelMagic)))
    throw load_error(load_error::Kind::bad_magic, "'" + path + "' is not a model file");

  detail::Cursor cur{reinterpret_cast<const unsigned char*>(bytes.data()) +
                         sizeof(detail::kModelMagic),
                     bytes.size() - sizeof(detail::kModelMagic)};
  const std::uint32_t version = cur.u32();
  if (version != detail::kModelVersion)
    throw load_error(load_error::Kind::bad_version,
                     "unsupported model format version " + std::to_string(version));
  const auto n = static_cast<Index>(cur.u64());
  const auto l = static_cast<Index>(cur.u64());
  const auto d = static_cast<Index>(cur.u64());
  if (n < 0 || l < 0 || d < 0 || n > (Index(1) << 32) || l > (Index(1) << 32) || d > n)
    throw load_error(load_error::Kind::truncated, "model header is inconsistent");

  NdaModel m;
  m.kernel.kind = static_cast<KernelKind>(cur.u32());
  m.kernel.gamma = cur.f64();
  m.kernel.degree = static_cast<int>(cur.u32());
  m.kernel.coef0 = cur.f64();
  m.variant = static_cast<Variant>(cur.u32());
  m.solver = static_cast<SolverKind>(cur.u32());

  const size_t doubles = static_cast<size_t>(n) * static_cast<size_t>(l) +
                         static_cast<size_t>(n) + 1 +
                         static_cast<size_t>(n) * static_cast<size_t>(d) +
                         static_cast<size_t>(d);
  if (cur.remaining != doubles * 8 + 4)
    throw load_error(load_error::Kind::truncated,
                     cur.remaining < doubles * 8 + 4 ? "model file is truncated"
                                                     : "model file has trailing bytes");
  const std::uint32_t stored = detail::crc32(cur.p, doubles * 8);
  m.train_X.resize(n, l);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < l; ++j) m.train_X(i, j) = cur.f64();
  m.col_means.resize(n);
  for (Index i = 0; i < n; ++i) m.col_means(i) = cur.f64();
  m.grand_mean = cur.f64();
  m.W.resize(n, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < n; ++i) m.W(i, j) = cur.f64();
  m.eigvals.resize(d);
  for (Index i = 0; i < d; ++i) m.eigvals(i) = cur.f64();
  const std::uint32_t declared = cur.u32();
  if (stored != declared)
    throw load_error(load_error::Kind::bad_checksum, "model payload checksum mismatch");
  return m;
}

}  // namespace kda
