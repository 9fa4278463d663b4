#pragma once

#include <cmath>
#include <cstdint>

#include "kda/core.hpp"
#include "kda/dataset.hpp"
#include "kda/random.hpp"

namespace kda {

/// Gaussian class blobs with unit isotropic noise. Class c is centered at
/// separation * e_{c mod dim}; when there are more classes than axes the
/// magnitude grows by one separation unit per wrap so means stay distinct.
/// Samples are laid out class by class; labels are 0..C-1.
inline LabeledDataset gen_gaussians(int n_classes, Index n_per_class, Index dim,
                                    double separation, std::uint64_t seed) {
  if (n_classes < 2) throw input_error("gen_gaussians: need at least two classes");
  if (n_per_class < 1) throw input_error("gen_gaussians: need at least one sample per class");
  if (dim < 1) throw input_error("gen_gaussians: dimension must be >= 1");
  if (!(separation >= 0.0)) throw input_error("gen_gaussians: separation must be >= 0");
  SplitMix64 rng(seed);
  LabeledDataset d;
  d.X.resize(static_cast<Index>(n_classes) * n_per_class, dim);
  d.y.resize(static_cast<size_t>(d.X.rows()));
  Index row = 0;
  for (int c = 0; c < n_classes; ++c) {
    Vector mean = Vector::Zero(dim);
    mean(static_cast<Index>(c) % dim) =
        separation * (1.0 + static_cast<double>(c / static_cast<int>(dim)));
    for (Index s = 0; s < n_per_class; ++s, ++row) {
      for (Index j = 0; j < dim; ++j) d.X(row, j) = mean(j) + rng.next_normal();
      d.y[static_cast<size_t>(row)] = c;
    }
  }
  return d;
}

/// Two concentric rings: class 0 on radius 1, class 1 on radius 3, with
/// Gaussian radial noise. Linearly inseparable by construction.
inline LabeledDataset gen_circles(Index n, double noise, std::uint64_t seed) {
  if (n < 8) throw input_error("gen_circles: need at least 8 samples");
  if (!(noise >= 0.0)) throw input_error("gen_circles: noise must be >= 0");
  SplitMix64 rng(seed);
  LabeledDataset d;
  d.X.resize(n, 2);
  d.y.resize(static_cast<size_t>(n));
  const Index n0 = n / 2;
  for (Index i = 0; i < n; ++i) {
    const bool outer = i >= n0;
    const double radius = (outer ? 3.0 : 1.0) + noise * rng.next_normal();
    const double theta = 2.0 * 3.141592653589793238462643383279502884 * rng.next_uniform();
    d.X(i, 0) = radius * std::cos(theta);
    d.X(i, 1) = radius * std::sin(theta);
    d.y[static_cast<size_t>(i)] = outer ? 1 : 0;
  }
  return d;
}

/// Four Gaussian blobs at (+-1, +-1) with standard deviation `noise`;
/// diagonally opposite blobs share a class, so no single direction separates
/// the classes.
inline LabeledDataset gen_xor(Index n, double noise, std::uint64_t seed) {
  if (n < 8) throw input_error("gen_xor: need at least 8 samples");
  if (!(noise >= 0.0)) throw input_error("gen_xor: noise must be >= 0");
  SplitMix64 rng(seed);
  LabeledDataset d;
  d.X.resize(n, 2);
  d.y.resize(static_cast<size_t>(n));
  const double cx[4] = {1.0, -1.0, 1.0, -1.0};
  const double cy[4] = {1.0, -1.0, -1.0, 1.0};
  Index row = 0;
  for (int blob = 0; blob < 4; ++blob) {
    const Index count = n / 4 + (static_cast<Index>(blob) < n % 4 ? 1 : 0);
    for (Index s = 0; s < count; ++s, ++row) {
      d.X(row, 0) = cx[blob] + noise * rng.next_normal();
      d.X(row, 1) = cy[blob] + noise * rng.next_normal();
      d.y[static_cast<size_t>(row)] = blob < 2 ? 0 : 1;
    }
  }
  return d;
}

}  // namespace kda
