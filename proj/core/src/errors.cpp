#include "cnf/errors.hpp"

#include <sstream>
#include <utility>

namespace cnf {

SingularMatrix::SingularMatrix(std::size_t pivot_index, std::string what_arg)
    : Error(std::move(what_arg)), pivot_index_(pivot_index) {}

namespace {

std::string format_parse_error(std::size_t offset, const std::vector<std::string>& expected,
                               const std::string& message) {
  std::ostringstream os;
  os << "parse error at offset " << offset << ": " << message;
  if (!expected.empty()) {
    os << " (expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) os << " | ";
      os << expected[i];
    }
    os << ")";
  }
  return os.str();
}

}  // namespace

ParseError::ParseError(std::size_t offset, std::vector<std::string> expected, std::string message)
    : Error(format_parse_error(offset, expected, message)),
      offset_(offset),
      expected_(std::move(expected)) {}

ResidualViolation::ResidualViolation(double residual, double bound, std::string where)
    : Error("constraint residual " + std::to_string(residual) + " exceeds bound " +
            std::to_string(bound) + " (" + where + ")"),
      residual_(residual),
      bound_(bound) {}

ConfigError::ConfigError(std::size_t line, std::string message)
    : Error(line ? "config line " + std::to_string(line) + ": " + message : "config: " + message),
      line_(line) {}

}  // namespace cnf
