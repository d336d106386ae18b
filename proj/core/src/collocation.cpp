#include "cnf/collocation.hpp"

#include "cnf/errors.hpp"

#include <cmath>
#include <limits>

namespace cnf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using linalg::DenseMatrix;

// -------------------------------------------------------------- ConstraintSet

ConstraintSet::ConstraintSet(std::vector<Constraint> constraints, int channels, CoefficientRegistry coeffs)
    : constraints_(std::move(constraints)), channels_(channels), coeffs_(std::move(coeffs)) {
  if (channels_ <= 0) throw BadConfig("constraints: channel count must be positive");
  if (constraints_.empty()) throw BadConfig("constraints: at least one constraint is required");
  dims_ = static_cast<int>(constraints_.front().anchor.size());
  for (std::size_t r = 0; r < constraints_.size(); ++r) {
    const auto& c = constraints_[r];
    if (c.anchor.size() != dims_ || c.op.dims() != dims_) {
      throw DimensionMismatch("constraints: row " + std::to_string(r) + " has the wrong dimension");
    }
    if (c.target.size() != channels_) {
      throw DimensionMismatch("constraints: row " + std::to_string(r) + " target must have " +
                              std::to_string(channels_) + " channels");
    }
    if (!c.anchor.allFinite() || !c.target.allFinite()) {
      throw NonFiniteValue("constraints: row " + std::to_string(r) + " is not finite");
    }
  }
  // Group rows by identical anchors; reject duplicate (op, anchor) pairs.
  for (std::size_t r = 0; r < constraints_.size(); ++r) {
    const auto& c = constraints_[r];
    bool placed = false;
    for (auto& g : groups_) {
      const auto& head = constraints_[static_cast<std::size_t>(g.front())];
      if (head.anchor != c.anchor) continue;
      for (int other : g) {
        if (constraints_[static_cast<std::size_t>(other)].op == c.op) {
          throw BadConfig("constraints: rows " + std::to_string(other) + " and " + std::to_string(r) +
                          " repeat the operator '" + to_string(c.op) + "' at the same anchor");
        }
      }
      g.push_back(static_cast<int>(r));
      placed = true;
      break;
    }
    if (!placed) groups_.push_back({static_cast<int>(r)});
  }
  slots_.reserve(constraints_.size());
  for (const auto& c : constraints_) slots_.push_back(operator_slots(c.op, c.anchor, coeffs_));
}

int ConstraintSet::max_order() const {
  int o = 0;
  for (int r = 0; r < size(); ++r) o = std::max(o, order(r));
  return o;
}

MatrixXd ConstraintSet::targets() const {
  MatrixXd g(size(), channels_);
  for (int r = 0; r < size(); ++r) g.row(r) = constraints_[static_cast<std::size_t>(r)].target.transpose();
  return g;
}

void ConstraintSet::set_targets(const MatrixXd& g) {
  if (g.rows() != size() || g.cols() != channels_) throw DimensionMismatch("constraints: target matrix shape");
  if (!g.allFinite()) throw NonFiniteValue("constraints: targets are not finite");
  for (int r = 0; r < size(); ++r) constraints_[static_cast<std::size_t>(r)].target = g.row(r).transpose();
}

std::vector<Point> ConstraintSet::anchors() const {
  std::vector<Point> out;
  out.reserve(constraints_.size());
  for (const auto& c : constraints_) out.push_back(c.anchor);
  return out;
}

// ------------------------------------------------------------------ assembly

namespace {

void check_compatible(const BasisFamily& family, const ConstraintSet& cs) {
  if (family.size() != cs.size()) {
    throw DimensionMismatch("collocation: family has " + std::to_string(family.size()) + " bases for " +
                            std::to_string(cs.size()) + " constraints");
  }
  if (family.input_dim() != cs.dims()) throw DimensionMismatch("collocation: family and constraint dimensions differ");
  if (family.width() != 1 && family.width() != cs.channels()) {
    throw DimensionMismatch("collocation: vector basis width must equal the channel count");
  }
}

}  // namespace

std::vector<DenseMatrix> assemble_matrices(const BasisFamily& family, const ConstraintSet& cs) {
  check_compatible(family, cs);
  const int n = cs.size();
  const int width = family.width();
  const int count = width == 1 ? 1 : cs.channels();
  std::vector<DenseMatrix> mats(static_cast<std::size_t>(count), DenseMatrix::Zero(n, n));
  for (const auto& group : cs.anchor_groups()) {
    int order = 0;
    for (int r : group) order = std::max(order, cs.order(r));
    const Point& anchor = cs[group.front()].anchor;
    const DerivativeBundle b = family.eval_all(anchor, order);
    for (int r : group) {
      const VectorXd vals = apply_slots(cs.slots(r), b);
      if (width == 1) {
        mats[0].row(r) = vals.transpose();
      } else {
        for (int ch = 0; ch < count; ++ch)
          for (int c = 0; c < n; ++c) mats[static_cast<std::size_t>(ch)](r, c) = vals[c * width + ch];
      }
    }
  }
  for (const auto& m : mats) linalg::require_finite(m, "collocation matrix");
  return mats;
}

CollocationSystem assemble(const BasisFamily& family, const ConstraintSet& cs) {
  CollocationSystem sys;
  sys.matrices = assemble_matrices(family, cs);
  sys.rhs = cs.targets();
  sys.cond = 0.0;
  for (const auto& m : sys.matrices) {
    sys.factors.push_back(linalg::lu_factor(m));
    sys.inverses.push_back(linalg::lu_inverse(sys.factors.back()));
    sys.conds.push_back(m.norm() * sys.inverses.back().norm());
    sys.cond = std::max(sys.cond, sys.conds.back());
  }
  return sys;
}

MatrixXd solve_weights(const CollocationSystem& sys) {
  if (sys.factors.empty()) throw StaleWeights("collocation: system has not been factored");
  if (sys.shared()) return linalg::lu_solve(sys.factors[0], linalg::RhsBlock(sys.rhs));
  MatrixXd b(sys.size(), sys.channels());
  for (int ch = 0; ch < sys.channels(); ++ch) {
    b.col(ch) = linalg::lu_solve(sys.factors[static_cast<std::size_t>(ch)], linalg::Vector(sys.rhs.col(ch)));
  }
  return b;
}

VectorXd residual(const CollocationSystem& sys, const MatrixXd& weights) {
  VectorXd out(sys.channels());
  for (int ch = 0; ch < sys.channels(); ++ch) {
    out[ch] = (sys.matrix(ch) * weights.col(ch) - sys.rhs.col(ch)).lpNorm<Eigen::Infinity>();
  }
  return out;
}

double residual_bound(const CollocationSystem& sys, int channel) {
  const double eps = std::numeric_limits<double>::epsilon();
  return 64.0 * eps * sys.channel_cond(channel) * (sys.rhs.col(channel).lpNorm<Eigen::Infinity>() + 1.0);
}

void check_residual(const CollocationSystem& sys, const MatrixXd& weights, const std::string& where) {
  const VectorXd r = residual(sys, weights);
  for (int ch = 0; ch < sys.channels(); ++ch) {
    const double bound = residual_bound(sys, ch);
    if (!(r[ch] <= bound)) throw ResidualViolation(r[ch], bound, where);
  }
}

// --------------------------------------------------------------- gradients

ParamCotangent matrix_vjp(const BasisFamily& family, const ConstraintSet& cs, const std::vector<DenseMatrix>& dA) {
  check_compatible(family, cs);
  const int n = cs.size();
  const int width = family.width();
  if (dA.size() != (width == 1 ? 1u : static_cast<std::size_t>(cs.channels()))) {
    throw DimensionMismatch("collocation: matrix cotangent count");
  }
  std::vector<GradItem> items;
  items.reserve(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    GradItem item;
    item.x = cs[r].anchor;
    item.order = cs.order(r);
    item.slots = cs.slots(r);
    if (width == 1) {
      item.feature_weights = dA[0].row(r).transpose();
    } else {
      item.feature_weights.resize(static_cast<Index>(n) * width);
      for (int ch = 0; ch < width; ++ch)
        for (int c = 0; c < n; ++c) item.feature_weights[c * width + ch] = dA[static_cast<std::size_t>(ch)](r, c);
    }
    if (item.feature_weights.isZero(0.0)) continue;
    items.push_back(std::move(item));
  }
  ParamCotangent grad(family.params().size(), 0.0);
  family.param_grad(items, grad);
  return grad;
}

std::vector<DenseMatrix> adjoint_matrix_cotangent(const CollocationSystem& sys, const MatrixXd& weights,
                                                  const MatrixXd& dL_dB) {
  if (dL_dB.rows() != sys.size() || dL_dB.cols() != sys.channels()) {
    throw DimensionMismatch("collocation: dL/dB shape");
  }
  std::vector<DenseMatrix> dA(sys.matrices.size(), DenseMatrix::Zero(sys.size(), sys.size()));
  for (int ch = 0; ch < sys.channels(); ++ch) {
    if (dL_dB.col(ch).isZero(0.0)) continue;
    const std::size_t m = static_cast<std::size_t>(sys.matrix_index(ch));
    const VectorXd lambda = linalg::lu_solve_transpose(sys.factors[m], linalg::Vector(dL_dB.col(ch)));
    dA[m].noalias() -= lambda * weights.col(ch).transpose();
  }
  return dA;
}

ParamCotangent vjp_through_solve(const CollocationSystem& sys, const BasisFamily& family, const ConstraintSet& cs,
                                 const MatrixXd& weights, const MatrixXd& dL_dB) {
  return matrix_vjp(family, cs, adjoint_matrix_cotangent(sys, weights, dL_dB));
}

// ----------------------------------------------------------- ConstrainedField

ConstrainedField::ConstrainedField(std::unique_ptr<BasisFamily> family, ConstraintSet constraints)
    : family_(std::move(family)), constraints_(std::move(constraints)) {
  if (!family_) throw BadConfig("field: missing basis family");
  check_compatible(*family_, constraints_);
}

ConstrainedField::ConstrainedField(const ConstrainedField& other)
    : family_(other.family_->clone()),
      constraints_(other.constraints_),
      system_(other.system_),
      weights_(other.weights_),
      stale_(other.stale_) {}

ConstrainedField& ConstrainedField::operator=(const ConstrainedField& other) {
  if (this != &other) *this = ConstrainedField(other);
  return *this;
}

void ConstrainedField::solve() {
  stale_ = true;
  system_ = assemble(*family_, constraints_);
  weights_ = solve_weights(system_);
  check_residual(system_, weights_, "field solve");
  stale_ = false;
}

void ConstrainedField::set_params(std::span<const double> p) {
  family_->set_params(p);
  stale_ = true;
}

void ConstrainedField::resolve_targets(const MatrixXd& g) {
  require_fresh();
  constraints_.set_targets(g);
  system_.rhs = constraints_.targets();
  weights_ = solve_weights(system_);
  check_residual(system_, weights_, "target re-solve");
}

void ConstrainedField::require_fresh() const {
  if (stale_) throw StaleWeights("field: weights are stale; call solve() first");
}

const CollocationSystem& ConstrainedField::system() const {
  require_fresh();
  return system_;
}

const MatrixXd& ConstrainedField::weights() const {
  require_fresh();
  return weights_;
}

double ConstrainedField::max_residual() const {
  require_fresh();
  return residual(system_, weights_).maxCoeff();
}

bool ConstrainedField::outside_support(const Point& x) const {
  if (!family_->support_radius()) return false;
  const auto* hybrid = dynamic_cast<const HybridKernelBasis*>(family_.get());
  return hybrid != nullptr && hybrid->supported(x).empty();
}

DerivativeBundle ConstrainedField::eval_bundle(const Point& x, int order) const {
  require_fresh();
  const int nch = channels();
  const Index m = dims();
  if (outside_support(x)) {
    DerivativeBundle out = DerivativeBundle::zeros(nch, m, order);
    out.value.setConstant(*family_->fallback_value());
    return out;
  }
  const DerivativeBundle b = family_->eval_all(x, order);
  DerivativeBundle out = DerivativeBundle::zeros(nch, m, order);
  if (family_->width() == 1) {
    out.value = weights_.transpose() * b.value;
    if (order >= 1) out.jac = weights_.transpose() * b.jac;
    if (order >= 2) out.hess = weights_.transpose() * b.hess;
  } else {
    const int w = family_->width();
    for (int ch = 0; ch < nch; ++ch) {
      for (int c = 0; c < family_->size(); ++c) {
        const double beta = weights_(c, ch);
        const Index f = static_cast<Index>(c) * w + ch;
        out.value[ch] += beta * b.value[f];
        if (order >= 1) out.jac.row(ch) += beta * b.jac.row(f);
        if (order >= 2) out.hess.row(ch) += beta * b.hess.row(f);
      }
    }
  }
  return out;
}

VectorXd ConstrainedField::eval(const Point& x) const { return eval_bundle(x, 0).value; }

VectorXd ConstrainedField::eval(const Point& x, const LinearOperator& op) const {
  if (outside_support(x)) {
    require_fresh();
    return VectorXd::Constant(channels(), *family_->fallback_value());
  }
  return apply_operator(op, eval_bundle(x, operator_order(op)), x, constraints_.coefficients());
}

MatrixXd ConstrainedField::weight_cotangent(const std::vector<FieldProbe>& probes) const {
  require_fresh();
  const int n = family_->size();
  const int w = family_->width();
  MatrixXd dB = MatrixXd::Zero(n, channels());
  for (const auto& p : probes) {
    if (p.cot.rows() != channels()) throw DimensionMismatch("field: probe cotangent rows must equal channels");
    const DerivativeBundle b = family_->eval_all(p.x, p.order);
    for (int ch = 0; ch < channels(); ++ch) {
      const SlotWeights s = p.cot.row(ch).transpose();
      if (s.isZero(0.0)) continue;
      const VectorXd vals = apply_slots(s, b);
      for (int c = 0; c < n; ++c) dB(c, ch) += vals[static_cast<Index>(c) * w + (w == 1 ? 0 : ch)];
    }
  }
  return dB;
}

ParamCotangent ConstrainedField::direct_grad(const std::vector<FieldProbe>& probes) const {
  require_fresh();
  const int n = family_->size();
  const int w = family_->width();
  std::vector<GradItem> items;
  for (const auto& p : probes) {
    for (int ch = 0; ch < channels(); ++ch) {
      GradItem item;
      item.x = p.x;
      item.order = p.order;
      item.slots = p.cot.row(ch).transpose();
      if (item.slots.isZero(0.0)) continue;
      if (w == 1) {
        item.feature_weights = weights_.col(ch);
      } else {
        item.feature_weights = VectorXd::Zero(static_cast<Index>(n) * w);
        for (int c = 0; c < n; ++c) item.feature_weights[static_cast<Index>(c) * w + ch] = weights_(c, ch);
      }
      items.push_back(std::move(item));
    }
  }
  ParamCotangent grad(family_->params().size(), 0.0);
  if (!items.empty()) family_->param_grad(items, grad);
  return grad;
}

ParamCotangent total_loss_grad(const ConstrainedField& field, const LossEvaluation& loss) {
  const auto& sys = field.system();
  ParamCotangent grad = field.direct_grad(loss.probes);
  const MatrixXd dB = field.weight_cotangent(loss.probes);
  std::vector<DenseMatrix> dA = adjoint_matrix_cotangent(sys, field.weights(), dB);
  if (!loss.matrix_cot.empty()) {
    if (loss.matrix_cot.size() != dA.size()) throw DimensionMismatch("loss: matrix cotangent count");
    for (std::size_t i = 0; i < dA.size(); ++i) dA[i] += loss.matrix_cot[i];
  }
  const ParamCotangent indirect = matrix_vjp(field.family(), field.constraints(), dA);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += indirect[i];
  return grad;
}

}  // namespace cnf
