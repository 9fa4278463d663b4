#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kda/core.hpp"
#include "kda/random.hpp"

namespace kda {

/// Dense labeled dataset; one sample per row.
struct LabeledDataset {
  Matrix X;
  std::vector<long long> y;
  std::vector<std::string> feature_names;  // empty when the source had no header

  Index n() const { return X.rows(); }
  Index dim() const { return X.cols(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline bool parse_integral(const std::string& s, long long& out) {
  double v = 0.0;
  if (!parse_double(s, v)) return false;
  if (!std::isfinite(v) || v != std::floor(v) || std::abs(v) > 9.0e15) return false;
  out = static_cast<long long>(v);
  return true;
}

}  // namespace detail

/// Loads a comma-separated table. The first line is treated as a header when
/// any of its fields fails numeric parsing. `label_col` selects the label
/// column (negative means last). Labels must be integral numbers; a fully
/// non-numeric label column is mapped to 0..C-1 in first-appearance order.
/// Every malformed row fails with its 1-based line number.
inline LabeledDataset load_csv(const std::string& path, int label_col = -1) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  // Ignore a single trailing newline; reject files with nothing else.
  while (!lines.empty() && detail::trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw parse_error("'" + path + "' contains no data");

  size_t first_data = 0;
  std::vector<std::string> header;
  {
    // A first row is a header when any FEATURE field is non-numeric; the
    // label column is excluded so string-labeled data keeps its first row.
    auto fields = detail::split_fields(lines[0], ',');
    size_t label_idx = label_col < 0 ? (fields.empty() ? 0 : fields.size() - 1)
                                     : static_cast<size_t>(label_col);
    bool features_numeric = true;
    for (size_t f = 0; f < fields.size(); ++f) {
      if (f == label_idx) continue;
      double v;
      if (!detail::parse_double(fields[f], v)) {
        features_numeric = false;
        break;
      }
    }
    if (!features_numeric) {
      header = fields;
      first_data = 1;
    }
  }
  if (first_data >= lines.size()) throw parse_error("'" + path + "' has a header but no data rows");

  const size_t width = detail::split_fields(lines[first_data], ',').size();
  if (width < 2) throw parse_error("need at least one feature and a label column",
                                   static_cast<long>(first_data + 1));
  if (!header.empty() && header.size() != width)
    throw parse_error("header has " + std::to_string(header.size()) + " fields, rows have " +
                          std::to_string(width),
                      1);
  size_t lcol = label_col < 0 ? width - 1 : static_cast<size_t>(label_col);
  if (lcol >= width) throw parse_error("label column " + std::to_string(label_col) +
                                       " out of range for width " + std::to_string(width));

  const size_t n = lines.size() - first_data;
  LabeledDataset d;
  d.X.resize(static_cast<Index>(n), static_cast<Index>(width - 1));
  d.y.resize(n);
  std::vector<std::string> raw_labels(n);

  for (size_t r = 0; r < n; ++r) {
    const long lineno = static_cast<long>(first_data + r + 1);
    auto fields = detail::split_fields(lines[first_data + r], ',');
    if (fields.size() != width)
      throw parse_error("expected " + std::to_string(width) + " fields, got " +
                            std::to_string(fields.size()),
                        lineno);
    Index col = 0;
    for (size_t f = 0; f < width; ++f) {
      if (f == lcol) {
        raw_labels[r] = fields[f];
        continue;
      }
      double v;
      if (!detail::parse_double(fields[f], v))
        throw parse_error("field '" + fields[f] + "' is not a number", lineno);
      if (!std::isfinite(v)) throw parse_error("non-finite value '" + fields[f] + "'", lineno);
      d.X(static_cast<Index>(r), col++) = v;
    }
  }

  // Label column: integral numbers, or a categorical column mapped in
  // first-appearance order when nothing in it parses as a number.
  bool any_numeric = false;
  for (const auto& s : raw_labels) {
    double v;
    if (detail::parse_double(s, v)) {
      any_numeric = true;
      break;
    }
  }
  if (any_numeric) {
    for (size_t r = 0; r < n; ++r) {
      long long v;
      if (!detail::parse_integral(raw_labels[r], v))
        throw parse_error("label '" + raw_labels[r] + "' is not an integer",
                          static_cast<long>(first_data + r + 1));
      d.y[r] = v;
    }
  } else {
    std::vector<std::string> seen;
    for (size_t r = 0; r < n; ++r) {
      auto it = std::find(seen.begin(), seen.end(), raw_labels[r]);
      if (it == seen.end()) {
        seen.push_back(raw_labels[r]);
        it = std::prev(seen.end());
      }
      d.y[r] = static_cast<long long>(it - seen.begin());
    }
  }

  if (!header.empty()) {
    for (size_t f = 0; f < width; ++f)
      if (f != lcol) d.feature_names.push_back(header[f]);
  }
  return d;
}

/// Loads the sparse "label idx:value ..." format with 1-based, strictly
/// ascending indices per line. Width is the largest index seen anywhere;
/// missing entries are zero.
inline LabeledDataset load_libsvm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open '" + path + "'");
  struct Row {
    long long label;
    std::vector<std::pair<Index, double>> entries;
  };
  std::vector<Row> rows;
  Index width = 0;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    std::istringstream ss(t);
    std::string tok;
    ss >> tok;
    Row row;
    {
      std::string lt = tok;
      if (!lt.empty() && lt[0] == '+') lt = lt.substr(1);
      if (!detail::parse_integral(lt, row.label))
        throw parse_error("label '" + tok + "' is not an integer", lineno);
    }
    Index prev = 0;
    while (ss >> tok) {
      const size_t colon = tok.find(':');
      if (colon == std::string::npos)
        throw parse_error("malformed feature '" + tok + "' (expected idx:value)", lineno);
      long long idx;
      if (!detail::parse_integral(tok.substr(0, colon), idx) || idx < 1)
        throw parse_error("feature index '" + tok.substr(0, colon) + "' must be a positive integer",
                          lineno);
      if (idx <= prev)
        throw parse_error("feature indices must be strictly ascending (got " +
                              std::to_string(idx) + " after " + std::to_string(prev) + ")",
                          lineno);
      double val;
      if (!detail::parse_double(tok.substr(colon + 1), val) || !std::isfinite(val))
        throw parse_error("feature value '" + tok.substr(colon + 1) + "' is not a finite number",
                          lineno);
      prev = static_cast<Index>(idx);
      width = std::max(width, prev);
      row.entries.emplace_back(prev - 1, val);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw parse_error("'" + path + "' contains no data");

  LabeledDataset d;
  d.X = Matrix::Zero(static_cast<Index>(rows.size()), width);
  d.y.resize(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    d.y[r] = rows[r].label;
    for (auto [j, v] : rows[r].entries) d.X(static_cast<Index>(r), j) = v;
  }
  return d;
}

/// Writes features plus the label as the final column, no header, with
/// enough digits that reading the file back reproduces doubles exactly.
inline void save_csv(const LabeledDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw parse_error("cannot write '" + path + "'");
  char buf[64];
  for (Index i = 0; i < d.n(); ++i) {
    for (Index j = 0; j < d.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", d.X(i, j));
      out << buf << ',';
    }
    out << d.y[static_cast<size_t>(i)] << '\n';
  }
  if (!out) throw parse_error("failed writing '" + path + "'");
}

struct SplitResult {
  LabeledDataset train, test;
};

/// Stratified split: within each class (first-appearance order) the indices
/// are shuffled by a seeded Fisher-Yates pass and round(count * fraction) of
/// them (clamped to leave at least one on each side) go to the test set.
/// Classes with fewer than two samples cannot be stratified and are an error.
/// Row order within each side follows the original dataset order.
inline SplitResult split(const LabeledDataset& d, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw input_error("test fraction must lie strictly between 0 and 1");
  std::vector<long long> classes;
  std::vector<std::vector<Index>> groups;
  for (Index i = 0; i < d.n(); ++i) {
    auto it = std::find(classes.begin(), classes.end(), d.y[static_cast<size_t>(i)]);
    if (it == classes.end()) {
      classes.push_back(d.y[static_cast<size_t>(i)]);
      groups.emplace_back();
      it = std::prev(classes.end());
    }
    groups[static_cast<size_t>(it - classes.begin())].push_back(i);
  }
  SplitMix64 rng(seed);
  std::vector<bool> in_test(static_cast<size_t>(d.n()), false);
  for (size_t g = 0; g < groups.size(); ++g) {
    auto& idx = groups[g];
    if (idx.size() < 2)
      throw input_error("class " + std::to_string(classes[g]) +
                        " has fewer than 2 samples; cannot stratify");
    for (size_t i = 0; i + 1 < idx.size(); ++i) {
      const size_t j = i + static_cast<size_t>(rng.next_u64() % (idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    size_t n_test = static_cast<size_t>(std::llround(static_cast<double>(idx.size()) * test_fraction));
    n_test = std::clamp<size_t>(n_test, 1, idx.size() - 1);
    for (size_t i = 0; i < n_test; ++i) in_test[static_cast<size_t>(idx[i])] = true;
  }

  std::vector<Index> tr, te;
  for (Index i = 0; i < d.n(); ++i) (in_test[static_cast<size_t>(i)] ? te : tr).push_back(i);
  auto take = [&](const std::vector<Index>& which) {
    LabeledDataset out;
    out.X.resize(static_cast<Index>(which.size()), d.dim());
    out.y.resize(which.size());
    for (size_t k = 0; k < which.size(); ++k) {
      out.X.row(static_cast<Index>(k)) = d.X.row(which[k]);
      out.y[k] = d.y[static_cast<size_t>(which[k])];
    }
    out.feature_names = d.feature_names;
    return out;
  };
  return SplitResult{take(tr), take(te)};
}

}  // namespace kda
