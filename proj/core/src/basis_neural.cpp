#include "basis_internal.hpp"
#include "cnf/errors.hpp"

namespace cnf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void check_items(const BasisFamily& b, std::span<const GradItem> items, std::span<double> grad) {
  if (static_cast<int>(grad.size()) != b.param_count()) {
    throw DimensionMismatch(b.kind() + ": gradient buffer has wrong length");
  }
  for (const auto& item : items) {
    if (item.feature_weights.size() != b.features()) {
      throw DimensionMismatch(b.kind() + ": feature weights length");
    }
    if (item.slots.size() != slot_count(b.input_dim(), item.order)) {
      throw DimensionMismatch(b.kind() + ": slot weights length");
    }
  }
}

// Single-feature cotangent w · slots.
DerivativeBundle scaled_slots(const GradItem& item, Index m, double w) {
  DerivativeBundle cot = DerivativeBundle::zeros(1, m, item.order);
  cot.value[0] = w * item.slots[0];
  if (item.order >= 1) cot.jac.row(0) = w * item.slots.segment(1, m).transpose();
  if (item.order >= 2) cot.hess.row(0) = w * item.slots.segment(1 + m, m * m).transpose();
  return cot;
}

void place(const DerivativeBundle& one, DerivativeBundle& out, Index f) {
  out.value[f] = one.value[0];
  if (out.order >= 1) out.jac.row(f) = one.jac.row(0);
  if (out.order >= 2) out.hess.row(f) = one.hess.row(0);
}

}  // namespace

// ----------------------------------------------------------- IndependentBasis

IndependentBasis::IndependentBasis(EncoderArch arch, int count, std::vector<double> params)
    : arch_(std::move(arch)), count_(count) {
  arch_.validate();
  if (arch_.output_dim() != 1) throw ArchMismatch("independent: encoders must have one output");
  if (count_ <= 0) throw BadConfig("independent: count must be positive");
  if (params.size() != static_cast<std::size_t>(count_) * static_cast<std::size_t>(arch_.param_count())) {
    throw ArchMismatch("independent: parameter count must be count × encoder parameters");
  }
  params_ = std::move(params);
}

DerivativeBundle IndependentBasis::eval_all(const Point& x, int order) const {
  check_query(x, order);
  const std::size_t np = static_cast<std::size_t>(arch_.param_count());
  DerivativeBundle out = DerivativeBundle::zeros(count_, input_dim(), order);
  for (int c = 0; c < count_; ++c) {
    const std::span<const double> p(params_.data() + c * np, np);
    place(encoder_eval(arch_, p, x, order), out, c);
  }
  return out;
}

void IndependentBasis::param_grad(std::span<const GradItem> items, std::span<double> grad) const {
  check_items(*this, items, grad);
  const std::size_t np = static_cast<std::size_t>(arch_.param_count());
  for (const auto& item : items) {
    check_query(item.x, item.order);
    for (int c = 0; c < count_; ++c) {
      const double w = item.feature_weights[c];
      if (w == 0.0) continue;
      const std::span<const double> p(params_.data() + c * np, np);
      EncoderTape tape(arch_, p, item.x, item.order);
      tape.backward(scaled_slots(item, input_dim(), w), grad.subspan(c * np, np));
    }
  }
}

std::unique_ptr<BasisFamily> IndependentBasis::clone() const { return std::make_unique<IndependentBasis>(*this); }

// ------------------------------------------------------- ConstraintLayerBasis

ConstraintLayerBasis::ConstraintLayerBasis(EncoderArch arch, std::vector<double> params) : arch_(std::move(arch)) {
  arch_.validate();
  if (static_cast<int>(params.size()) != arch_.param_count()) {
    throw ArchMismatch("constraint_layer: parameter count does not match architecture");
  }
  params_ = std::move(params);
}

DerivativeBundle ConstraintLayerBasis::eval_all(const Point& x, int order) const {
  check_query(x, order);
  return encoder_eval(arch_, params_, x, order);
}

void ConstraintLayerBasis::param_grad(std::span<const GradItem> items, std::span<double> grad) const {
  check_items(*this, items, grad);
  for (const auto& item : items) {
    check_query(item.x, item.order);
    EncoderTape tape(arch_, params_, item.x, item.order);
    tape.backward(detail::expand_item(item, input_dim(), {}), grad);
  }
}

std::unique_ptr<BasisFamily> ConstraintLayerBasis::clone() const {
  return std::make_unique<ConstraintLayerBasis>(*this);
}

// -------------------------------------------------------------- HypernetBasis

HypernetBasis::HypernetBasis(EncoderArch target, EncoderArch hyper, std::vector<double> hyper_params)
    : target_(std::move(target)), hyper_(std::move(hyper)) {
  target_.validate();
  hyper_.validate();
  if (target_.output_dim() != 1) throw ArchMismatch("hypernet: target encoder must have one output");
  if (hyper_.output_dim() != target_.param_count()) {
    throw ArchMismatch("hypernet: hypernet output does not match target parameter count");
  }
  if (static_cast<int>(hyper_params.size()) != hyper_.param_count()) {
    throw ArchMismatch("hypernet: parameter count does not match architecture");
  }
  params_ = std::move(hyper_params);
  refresh();
}

void HypernetBasis::refresh() {
  const int n = size();
  generated_.resize(n, target_.param_count());
  for (int c = 0; c < n; ++c) {
    generated_.row(c) = encoder_eval(hyper_, params_, Point::Unit(n, c), 0).value.transpose();
  }
}

DerivativeBundle HypernetBasis::eval_all(const Point& x, int order) const {
  check_query(x, order);
  const std::size_t np = static_cast<std::size_t>(target_.param_count());
  DerivativeBundle out = DerivativeBundle::zeros(size(), input_dim(), order);
  for (int c = 0; c < size(); ++c) {
    const std::span<const double> p(generated_.data() + c * np, np);
    place(encoder_eval(target_, p, x, order), out, c);
  }
  return out;
}

void HypernetBasis::param_grad(std::span<const GradItem> items, std::span<double> grad) const {
  check_items(*this, items, grad);
  const int n = size();
  const Index np = target_.param_count();
  MatrixXd gen_bar = MatrixXd::Zero(np, n);
  std::vector<char> touched(static_cast<std::size_t>(n), 0);
  for (const auto& item : items) {
    check_query(item.x, item.order);
    for (int c = 0; c < n; ++c) {
      const double w = item.feature_weights[c];
      if (w == 0.0) continue;
      const std::span<const double> p(generated_.data() + c * np, static_cast<std::size_t>(np));
      EncoderTape tape(target_, p, item.x, item.order);
      tape.backward(scaled_slots(item, input_dim(), w),
                    std::span<double>(gen_bar.col(c).data(), static_cast<std::size_t>(np)));
      touched[static_cast<std::size_t>(c)] = 1;
    }
  }
  for (int c = 0; c < n; ++c) {
    if (!touched[static_cast<std::size_t>(c)]) continue;
    EncoderTape tape(hyper_, params_, Point::Unit(n, c), 0);
    DerivativeBundle cot = DerivativeBundle::zeros(np, n, 0);
    cot.value = gen_bar.col(c);
    tape.backward(cot, grad);
  }
}

std::unique_ptr<BasisFamily> HypernetBasis::clone() const { return std::make_unique<HypernetBasis>(*this); }

}  // namespace cnf
