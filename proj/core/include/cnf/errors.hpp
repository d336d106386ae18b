#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace cnf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NonFiniteValue : public Error {
 public:
  using Error::Error;
};

/// Raised when elimination meets a pivot below the singularity threshold.
/// `pivot_index` is the elimination step; `cond` is the condition surrogate
/// the caller should record (always +inf here).
class SingularMatrix : public Error {
 public:
  SingularMatrix(std::size_t pivot_index, std::string what_arg);

  std::size_t pivot_index() const { return pivot_index_; }
  double cond() const { return std::numeric_limits<double>::infinity(); }

 private:
  std::size_t pivot_index_;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

class UnsupportedOrder : public Error {
 public:
  using Error::Error;
};

class OrderTooLow : public Error {
 public:
  using Error::Error;
};

class ArchMismatch : public Error {
 public:
  using Error::Error;
};

class BadConfig : public Error {
 public:
  using Error::Error;
};

class StaleWeights : public Error {
 public:
  using Error::Error;
};

class BadTarget : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class UnknownCoefficient : public Error {
 public:
  using Error::Error;
};

/// Operator-DSL syntax error. `offset` is a byte offset into the source text.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, std::vector<std::string> expected, std::string message);

  std::size_t offset() const { return offset_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

/// A solved system violated its hard-constraint residual bound.
class ResidualViolation : public Error {
 public:
  ResidualViolation(double residual, double bound, std::string where);

  double residual() const { return residual_; }
  double bound() const { return bound_; }

 private:
  double residual_;
  double bound_;
};

/// Run-config syntax or schema error, with 1-based line number (0 if unknown).
class ConfigError : public Error {
 public:
  ConfigError(std::size_t line, std::string message);

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cnf
