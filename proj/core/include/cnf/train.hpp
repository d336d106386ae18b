#pragma once

#include "cnf/csv.hpp"
#include "cnf/losses.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace cnf {

struct LossTerm {
  double weight = 1.0;
  std::shared_ptr<const FieldObjective> objective;
};

/// Weighted sum of objectives.
struct LossSpec {
  std::vector<LossTerm> terms;

  LossSpec& add(double weight, std::shared_ptr<const FieldObjective> objective);
  std::vector<std::string> names() const;
  /// Throws BadConfig on negative weights or an empty spec.
  void validate() const;
};

struct LossReport {
  double total = 0.0;
  std::vector<double> terms;  ///< unweighted term values
  ParamCotangent grad;        ///< empty unless requested
};

/// Evaluates every term once on the solved field and, when asked, the full
/// gradient through the solve (one adjoint solve for all terms).
LossReport total_loss_grad(const ConstrainedField& field, const LossSpec& spec, std::mt19937_64& rng,
                           bool with_grad = true);

struct AdamState {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<double> m;
  std::vector<double> v;
  /// Optional: 0 entries are frozen.
  std::vector<char> mask;

  AdamState() = default;
  AdamState(double learning_rate, std::size_t params);
};

/// Bias-corrected Adam update. Throws ShapeMismatch.
std::vector<double> adam_step(AdamState& state, std::span<const double> params, std::span<const double> grad);

struct TraceRow {
  int iter = 0;
  double loss_total = 0.0;
  std::vector<double> terms;
  double cond = 0.0;
  double residual_max = 0.0;
};

struct TrainTrace {
  std::vector<std::string> term_names;
  std::vector<TraceRow> rows;
  /// Set when a re-solve met a singular matrix; rows stop there.
  bool singular = false;
  std::string message;

  /// Columns iter,loss_total,loss_<term>...,cond_surrogate,residual_max.
  CsvTable table() const;
};

struct TrainOptions {
  int iterations = 0;
  double lr = 5e-4;
  std::uint64_t seed = 0;
  /// Called after every successful re-solve with the iteration just taken.
  std::function<void(int, const ConstrainedField&)> on_iteration;
};

/// Adam on the basis parameters; the field is re-assembled and re-solved after
/// every step and the residual bound is checked (ResidualViolation). On a
/// singular re-solve the last good parameters are restored and the trace is
/// returned with `singular` set.
TrainTrace train(ConstrainedField& field, const LossSpec& spec, const TrainOptions& options);

}  // namespace cnf
