#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "kda/core.hpp"

namespace kda {

namespace detail {

/// Distinct labels in first-appearance order plus each row's class id.
inline std::vector<long long> enumerate_classes(const std::vector<long long>& y,
                                                std::vector<int>& ids) {
  std::vector<long long> classes;
  ids.resize(y.size());
  for (size_t i = 0; i < y.size(); ++i) {
    auto it = std::find(classes.begin(), classes.end(), y[i]);
    if (it == classes.end()) {
      classes.push_back(y[i]);
      it = std::prev(classes.end());
    }
    ids[i] = static_cast<int>(it - classes.begin());
  }
  return classes;
}

}  // namespace detail

/// Per-class mean points in the embedded space.
struct CentroidModel {
  Matrix centroids;                 // C x D
  std::vector<long long> classes;   // first-appearance order
};

inline CentroidModel nearest_centroid_fit(const Matrix& Z, const std::vector<long long>& y) {
  if (Z.rows() != static_cast<Index>(y.size()))
    throw input_error("nearest_centroid_fit: row/label count mismatch");
  if (Z.rows() == 0) throw input_error("nearest_centroid_fit: empty input");
  std::vector<int> ids;
  CentroidModel m;
  m.classes = detail::enumerate_classes(y, ids);
  const Index c = static_cast<Index>(m.classes.size());
  m.centroids = Matrix::Zero(c, Z.cols());
  Vector counts = Vector::Zero(c);
  for (Index i = 0; i < Z.rows(); ++i) {
    m.centroids.row(ids[static_cast<size_t>(i)]) += Z.row(i);
    counts(ids[static_cast<size_t>(i)]) += 1.0;
  }
  for (Index k = 0; k < c; ++k) m.centroids.row(k) /= counts(k);
  return m;
}

/// Euclidean nearest centroid; ties go to the earlier class in fit order.
inline std::vector<long long> nearest_centroid_predict(const CentroidModel& m, const Matrix& Z) {
  if (Z.cols() != m.centroids.cols())
    throw input_error("nearest_centroid_predict: dimension mismatch");
  std::vector<long long> out(static_cast<size_t>(Z.rows()));
  for (Index i = 0; i < Z.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    Index arg = 0;
    for (Index k = 0; k < m.centroids.rows(); ++k) {
      const double dist = (Z.row(i) - m.centroids.row(k)).squaredNorm();
      if (dist < best) {
        best = dist;
        arg = k;
      }
    }
    out[static_cast<size_t>(i)] = m.classes[static_cast<size_t>(arg)];
  }
  return out;
}

/// One-vs-rest regularized least squares on +-1 targets with an unpenalized
/// intercept. With lambda -> infinity the coefficients vanish and the
/// intercepts tend to the target means, so prediction degrades gracefully to
/// the majority class.
struct RidgeModel {
  Matrix beta;                     // (D+1) x C, last row is the intercept
  std::vector<long long> classes;  // first-appearance order
};

inline RidgeModel ridge_fit(const Matrix& Z, const std::vector<long long>& y, double lambda) {
  if (Z.rows() != static_cast<Index>(y.size()))
    throw input_error("ridge_fit: row/label count mismatch");
  if (Z.rows() == 0) throw input_error("ridge_fit: empty input");
  if (!(lambda > 0.0)) throw input_error("ridge_fit: lambda must be > 0");
  std::vector<int> ids;
  RidgeModel m;
  m.classes = detail::enumerate_classes(y, ids);
  const Index d = Z.cols();
  Matrix A(Z.rows(), d + 1);
  A.leftCols(d) = Z;
  A.col(d).setOnes();
  Matrix G = A.transpose() * A;
  for (Index j = 0; j < d; ++j) G(j, j) += lambda;
  Eigen::LDLT<Matrix> ldlt(G);
  if (ldlt.info() != Eigen::Success) throw solver_error("ridge_fit: normal equations failed");
  m.beta.resize(d + 1, static_cast<Index>(m.classes.size()));
  for (size_t c = 0; c < m.classes.size(); ++c) {
    Vector t(Z.rows());
    for (Index i = 0; i < Z.rows(); ++i)
      t(i) = ids[static_cast<size_t>(i)] == static_cast<int>(c) ? 1.0 : -1.0;
    m.beta.col(static_cast<Index>(c)) = ldlt.solve(A.transpose() * t);
  }
  return m;
}

/// Highest one-vs-rest score wins; ties go to the earlier class in fit order.
inline std::vector<long long> ridge_predict(const RidgeModel& m, const Matrix& Z) {
  if (Z.cols() + 1 != m.beta.rows()) throw input_error("ridge_predict: dimension mismatch");
  std::vector<long long> out(static_cast<size_t>(Z.rows()));
  for (Index i = 0; i < Z.rows(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    Index arg = 0;
    for (Index c = 0; c < m.beta.cols(); ++c) {
      const double score = Z.row(i).dot(m.beta.col(c).head(Z.cols())) + m.beta(Z.cols(), c);
      if (score > best) {
        best = score;
        arg = c;
      }
    }
    out[static_cast<size_t>(i)] = m.classes[static_cast<size_t>(arg)];
  }
  return out;
}

/// Accuracy, confusion counts (rows = truth, columns = prediction, both in
/// first-appearance order over truth then predictions), per-class recall.
struct Metrics {
  double accuracy = 0.0;
  Eigen::MatrixXi confusion;
  std::vector<double> per_class_recall;
  std::vector<long long> classes;
};

inline Metrics evaluate(const std::vector<long long>& predicted,
                        const std::vector<long long>& truth) {
  if (predicted.size() != truth.size() || truth.empty())
    throw input_error("evaluate: prediction/truth size mismatch or empty");
  Metrics m;
  for (long long v : truth)
    if (std::find(m.classes.begin(), m.classes.end(), v) == m.classes.end()) m.classes.push_back(v);
  for (long long v : predicted)
    if (std::find(m.classes.begin(), m.classes.end(), v) == m.classes.end()) m.classes.push_back(v);
  const Index c = static_cast<Index>(m.classes.size());
  auto id = [&](long long v) {
    return static_cast<Index>(std::find(m.classes.begin(), m.classes.end(), v) - m.classes.begin());
  };
  m.confusion = Eigen::MatrixXi::Zero(c, c);
  Index hits = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    m.confusion(id(truth[i]), id(predicted[i])) += 1;
    if (truth[i] == predicted[i]) ++hits;
  }
  m.accuracy = static_cast<double>(hits) / static_cast<double>(truth.size());
  m.per_class_recall.resize(static_cast<size_t>(c), 0.0);
  for (Index k = 0; k < c; ++k) {
    const int row_total = m.confusion.row(k).sum();
    m.per_class_recall[static_cast<size_t>(k)] =
        row_total > 0 ? static_cast<double>(m.confusion(k, k)) / row_total : 0.0;
  }
  return m;
}

}  // namespace kda
