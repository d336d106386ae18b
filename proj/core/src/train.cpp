#include "cnf/train.hpp"

#include "cnf/errors.hpp"

#include <cmath>

namespace cnf {

LossSpec& LossSpec::add(double weight, std::shared_ptr<const FieldObjective> objective) {
  terms.push_back(LossTerm{weight, std::move(objective)});
  return *this;
}

std::vector<std::string> LossSpec::names() const {
  std::vector<std::string> out;
  for (const auto& t : terms) out.push_back(t.objective->name());
  return out;
}

void LossSpec::validate() const {
  if (terms.empty()) throw BadConfig("loss: at least one term is required");
  for (const auto& t : terms) {
    if (!t.objective) throw BadConfig("loss: missing objective");
    if (!(t.weight >= 0.0) || !std::isfinite(t.weight)) throw BadConfig("loss: weights must be finite and >= 0");
  }
}

LossReport total_loss_grad(const ConstrainedField& field, const LossSpec& spec, std::mt19937_64& rng, bool with_grad) {
  spec.validate();
  LossReport report;
  LossEvaluation combined;
  for (const auto& t : spec.terms) {
    LossEvaluation e = t.objective->evaluate(field, rng);
    report.terms.push_back(e.value);
    report.total += t.weight * e.value;
    if (!with_grad || t.weight == 0.0) continue;
    for (auto& p : e.probes) {
      p.cot *= t.weight;
      combined.probes.push_back(std::move(p));
    }
    if (!e.matrix_cot.empty()) {
      if (combined.matrix_cot.empty()) {
        for (auto& m : e.matrix_cot) combined.matrix_cot.push_back(t.weight * m);
      } else {
        for (std::size_t i = 0; i < e.matrix_cot.size(); ++i) combined.matrix_cot[i] += t.weight * e.matrix_cot[i];
      }
    }
  }
  if (with_grad) report.grad = total_loss_grad(field, combined);
  return report;
}

AdamState::AdamState(double learning_rate, std::size_t params) : lr(learning_rate), m(params, 0.0), v(params, 0.0) {}

std::vector<double> adam_step(AdamState& s, std::span<const double> params, std::span<const double> grad) {
  if (params.size() != grad.size()) throw ShapeMismatch("adam: parameter and gradient lengths differ");
  if (s.m.empty() && s.v.empty()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  if (s.m.size() != params.size() || s.v.size() != params.size()) {
    throw ShapeMismatch("adam: moment vectors do not match the parameter count");
  }
  if (!s.mask.empty() && s.mask.size() != params.size()) throw ShapeMismatch("adam: mask length");
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  std::vector<double> out(params.begin(), params.end());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!s.mask.empty() && !s.mask[i]) continue;
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grad[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    const double mh = s.m[i] / c1;
    const double vh = s.v[i] / c2;
    out[i] -= s.lr * mh / (std::sqrt(vh) + s.eps);
  }
  return out;
}

CsvTable TrainTrace::table() const {
  std::vector<std::string> header{"iter", "loss_total"};
  for (const auto& n : term_names) header.push_back("loss_" + n);
  header.push_back("cond_surrogate");
  header.push_back("residual_max");
  CsvTable t(header);
  for (const auto& r : rows) {
    std::vector<double> v{static_cast<double>(r.iter), r.loss_total};
    v.insert(v.end(), r.terms.begin(), r.terms.end());
    v.push_back(r.cond);
    v.push_back(r.residual_max);
    t.add_row(v);
  }
  return t;
}

TrainTrace train(ConstrainedField& field, const LossSpec& spec, const TrainOptions& options) {
  spec.validate();
  if (options.iterations < 0) throw BadConfig("train: iterations must be >= 0");
  TrainTrace trace;
  trace.term_names = spec.names();
  if (field.stale()) field.solve();
  if (options.iterations == 0) return trace;

  std::mt19937_64 rng(options.seed);
  AdamState adam(options.lr, field.family().params().size());
  adam.mask = field.family().trainable_mask();

  for (int it = 0; it < options.iterations; ++it) {
    const LossReport rep = total_loss_grad(field, spec, rng, true);
    check_residual(field.system(), field.weights(), "iteration " + std::to_string(it));
    trace.rows.push_back(TraceRow{it, rep.total, rep.terms, field.system().cond, field.max_residual()});

    const std::vector<double> before(field.family().params().begin(), field.family().params().end());
    const std::vector<double> next = adam_step(adam, before, rep.grad);
    field.set_params(next);
    try {
      field.solve();
    } catch (const SingularMatrix& e) {
      field.set_params(before);
      field.solve();
      trace.singular = true;
      trace.message = "singular system after iteration " + std::to_string(it) + ": " + e.what();
      return trace;
    }
    if (options.on_iteration) options.on_iteration(it, field);
  }
  return trace;
}

}  // namespace cnf
