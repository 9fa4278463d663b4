#pragma once

// Synthetic SPSD factor pencils with controlled spectral structure, used by
// the self-check command and the validation suites.  Each pencil is built
// from an explicit orthonormal basis so that exact eigenvalues, eigenspaces,
// and rank counts are known by construction.

#include <algorithm>
#include <cstdint>

#include <Eigen/Dense>

#include "kda/core.hpp"
#include "kda/random.hpp"

namespace kda {

// A between/within factor pair plus the derived scatter matrices.
// S_b = K_b K_b^T, S_w = K_w K_w^T, S_t = S_b + S_w, and K_t stacks the two
// factor blocks so that K_t K_t^T = S_t holds exactly.
struct FactorPencil {
  Matrix K_b;  // n x (rank_b + 1); last column zero (mimics a dependent column)
  Matrix K_w;  // n x (rank_b + rank_w)
  Matrix K_t;  // n x (K_b.cols() + K_w.cols())
  Matrix S_b;
  Matrix S_w;
  Matrix S_t;
  Vector between_values;  // exact nonzero eigenvalues of S_b, descending
  Vector within_on_range; // action of S_w on range(S_b), aligned with between_values
};

// Builds a pencil in which S_w acts diagonally on range(S_b) in the same
// eigenbasis as S_b (the two matrices commute on that subspace).  On such
// pencils every solution strategy — including the round-off-sensitive
// cross-product algorithm — admits an exact answer: the generalized
// eigenvalues are between_values(i) / (within_on_range(i) + epsilon) and the
// eigenvectors span range(S_b).
inline FactorPencil make_commuting_pencil(Index n, Index rank_b, Index rank_w,
                                          std::uint64_t seed) {
  if (n < 2 || rank_b < 1 || rank_w < 0 || rank_b + rank_w > n) {
    throw input_error("make_commuting_pencil: invalid ranks for size n");
  }
  SplitMix64 rng(seed);
  Matrix G(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) G(i, j) = rng.next_normal();
  }
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ() * Matrix::Identity(n, n);
  Matrix U1 = Q.leftCols(rank_b);
  Matrix U2 = Q.middleCols(rank_b, rank_w);

  // Distinct, descending between-eigenvalues and distinct within-actions so
  // that every eigenvalue ordering below is unambiguous.
  Vector lb(rank_b), mu(rank_b), lw(std::max<Index>(rank_w, 1));
  for (Index i = 0; i < rank_b; ++i) {
    lb(i) = 2.0 - 1.4 * double(i) / double(std::max<Index>(1, rank_b));
    mu(i) = 0.4 + 0.3 * double(i);
  }
  for (Index i = 0; i < rank_w; ++i) lw(i) = 0.2 + 2.5 * rng.next_uniform();

  FactorPencil p;
  p.K_b = Matrix::Zero(n, rank_b + 1);
  p.K_b.leftCols(rank_b) = U1 * lb.cwiseSqrt().asDiagonal();
  p.K_w = Matrix::Zero(n, rank_b + rank_w);
  p.K_w.leftCols(rank_b) = U1 * mu.cwiseSqrt().asDiagonal();
  if (rank_w > 0) {
    p.K_w.rightCols(rank_w) = U2 * lw.head(rank_w).cwiseSqrt().asDiagonal();
  }
  p.K_t.resize(n, p.K_b.cols() + p.K_w.cols());
  p.K_t << p.K_b, p.K_w;
  p.S_b = p.K_b * p.K_b.transpose();
  p.S_w = p.K_w * p.K_w.transpose();
  p.S_t = p.S_b + p.S_w;
  p.between_values = lb;
  p.within_on_range = mu;
  return p;
}

}  // namespace kda
