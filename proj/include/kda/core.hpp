#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace kda {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for every error the toolkit throws on purpose.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Caller passed an invalid argument (bad shape, out-of-range parameter, ...).
struct input_error : error {
  using error::error;
};

/// Operation requires context the object does not carry (e.g. a model loaded
/// from disk no longer knows its training labels).
struct state_error : error {
  using error::error;
};

/// Malformed data file. Carries the 1-based line number when one is known.
struct parse_error : error {
  parse_error(const std::string& msg, long line = -1)
      : error(line >= 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_number(line) {}
  long line_number;
};

/// Numerical failure inside a solver (singular factorization, empty pencil).
struct solver_error : error {
  using error::error;
};

/// Model deserialization failure, split by cause so callers can distinguish
/// a stale format from a corrupted or cut-off file.
struct load_error : error {
  enum class Kind { bad_magic, bad_version, truncated, bad_checksum, io };
  load_error(Kind k, const std::string& msg) : error(msg), kind(k) {}
  Kind kind;
};

}  // namespace kda
