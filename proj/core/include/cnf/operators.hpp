#pragma once

#include "cnf/diff.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace cnf {

/// Position-dependent coefficient field, e.g. β(x) of an advection operator.
using CoefficientField = std::function<double(const Point&)>;

/// Named coefficients referenced by operator terms.
class CoefficientRegistry {
 public:
  void set(const std::string& name, double value);
  void set(const std::string& name, CoefficientField field);
  bool has(const std::string& name) const { return fields_.count(name) != 0; }
  /// Throws UnknownCoefficient, NonFiniteValue.
  double eval(const std::string& name, const Point& at) const;

 private:
  std::map<std::string, CoefficientField> fields_;
};

/// scale · [name](x) · ∂^multi_index. An empty name means a constant term.
struct DerivativeTerm {
  std::vector<int> multi_index;
  double scale = 1.0;
  std::string name;

  int order() const;
  bool operator==(const DerivativeTerm&) const = default;
};

/// Σ terms, canonical: one term per (multi-index, coefficient name), sorted by
/// total order, then with earlier dimensions first, then by name.
struct LinearOperator {
  std::vector<std::string> dim_names;
  std::vector<DerivativeTerm> terms;

  int dims() const { return static_cast<int>(dim_names.size()); }
  bool operator==(const LinearOperator&) const = default;
};

/// Grammar (whitespace insensitive):
///
///   expr   := ["+"|"-"] term (("+"|"-") term)*
///   term   := (coeff "*")* atom
///   coeff  := real | identifier
///   atom   := "id" | "d"dim ["^2"] | "d"dim "d"dim
///
/// e.g. "dt + beta*dx", "dx^2 + dy^2", "2*dx dy - id".
/// Throws ParseError with the byte offset and the expected tokens.
LinearOperator parse_operator(const std::string& text, const std::vector<std::string>& dim_names);

/// Text that reparses to the same canonical operator.
std::string to_string(const LinearOperator& op);

int operator_order(const LinearOperator& op);

/// The identity operator over the given dimensions.
LinearOperator identity_operator(const std::vector<std::string>& dim_names);

/// Operator as weights over bundle slots at `at` (length slot_count(M, order)).
SlotWeights operator_slots(const LinearOperator& op, const Point& at, const CoefficientRegistry& coeffs = {});

/// Σ_terms coeff(at) · selected bundle entry, one value per bundle feature.
/// Throws OrderTooLow, DimensionMismatch, UnknownCoefficient.
Eigen::VectorXd apply_operator(const LinearOperator& op, const DerivativeBundle& bundle, const Point& at,
                               const CoefficientRegistry& coeffs = {});

/// Same, with precomputed slot weights.
Eigen::VectorXd apply_slots(const SlotWeights& slots, const DerivativeBundle& bundle);

}  // namespace cnf
