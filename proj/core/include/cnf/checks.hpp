#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cnf {

struct CheckResult {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool pass() const { return error <= tolerance; }
};

/// Quick oracle and finite-difference verification of the numerical core:
/// LU against naive elimination, transpose solves, κ̃ gradient, encoder and
/// basis derivatives, the full loss gradient through the solve, and the patch
/// solver against a global solve. Deterministic.
std::vector<CheckResult> run_checks();

/// Prints one PASS/FAIL line per check; true when all pass.
bool report_checks(const std::vector<CheckResult>& results, std::ostream& os);

}  // namespace cnf
