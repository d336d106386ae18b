#include "cnf/losses.hpp"

#include "cnf/errors.hpp"

#include <cmath>

namespace cnf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double Box::volume() const {
  double v = 1.0;
  for (Index k = 0; k < lo.size(); ++k) v *= hi[k] - lo[k];
  return v;
}

Point Box::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Point p(lo.size());
  for (Index k = 0; k < lo.size(); ++k) p[k] = lo[k] + (hi[k] - lo[k]) * u(rng);
  return p;
}

namespace {

void check_box(const Box& b, const char* who) {
  if (b.lo.size() == 0 || b.lo.size() != b.hi.size() || !(b.hi.array() > b.lo.array()).all()) {
    throw BadConfig(std::string(who) + ": invalid domain box");
  }
}

}  // namespace

EikonalLoss::EikonalLoss(Box domain, int samples) : domain_(std::move(domain)), samples_(samples) {
  check_box(domain_, "eikonal");
  if (samples_ <= 0) throw BadConfig("eikonal: sample count must be positive");
}

LossEvaluation EikonalLoss::evaluate(const ConstrainedField& field, std::mt19937_64& rng) const {
  if (field.dims() != domain_.lo.size()) throw DimensionMismatch("eikonal: domain dimension");
  LossEvaluation out;
  const Index m = field.dims();
  const double inv = 1.0 / samples_;
  for (int s = 0; s < samples_; ++s) {
    const Point x = domain_.sample(rng);
    const DerivativeBundle b = field.eval_bundle(x, 1);
    const VectorXd g = b.jac.row(0).transpose();
    const double n = std::max(g.norm(), kNormFloor);
    out.value += (n - 1.0) * (n - 1.0) * inv;
    FieldProbe p;
    p.x = x;
    p.order = 1;
    p.cot = MatrixXd::Zero(field.channels(), slot_count(m, 1));
    p.cot.row(0).segment(1, m) = (2.0 * (n - 1.0) / n * inv) * g.transpose();
    out.probes.push_back(std::move(p));
  }
  return out;
}

TotalVariationLoss::TotalVariationLoss(Box domain, int samples) : domain_(std::move(domain)), samples_(samples) {
  check_box(domain_, "total_variation");
  if (samples_ <= 0) throw BadConfig("total_variation: sample count must be positive");
}

LossEvaluation TotalVariationLoss::evaluate(const ConstrainedField& field, std::mt19937_64& rng) const {
  if (field.dims() != domain_.lo.size()) throw DimensionMismatch("total_variation: domain dimension");
  LossEvaluation out;
  const Index m = field.dims();
  const double scale = domain_.volume() / samples_;
  for (int s = 0; s < samples_; ++s) {
    const Point x = domain_.sample(rng);
    const DerivativeBundle b = field.eval_bundle(x, 1);
    FieldProbe p;
    p.x = x;
    p.order = 1;
    p.cot = MatrixXd::Zero(field.channels(), slot_count(m, 1));
    for (int ch = 0; ch < field.channels(); ++ch) {
      const VectorXd g = b.jac.row(ch).transpose();
      const double n = g.norm();
      out.value += scale * n;
      p.cot.row(ch).segment(1, m) = (scale / std::max(n, kNormFloor)) * g.transpose();
    }
    out.probes.push_back(std::move(p));
  }
  return out;
}

LossEvaluation CondLoss::evaluate(const ConstrainedField& field, std::mt19937_64&) const {
  const auto& sys = field.system();
  LossEvaluation out;
  for (std::size_t i = 0; i < sys.matrices.size(); ++i) {
    const auto cg = linalg::cond_surrogate_with_grad(sys.matrices[i], sys.inverses[i]);
    out.value += std::log(cg.cond);
    out.matrix_cot.push_back(cg.grad / cg.cond);
  }
  return out;
}

DataL2Loss::DataL2Loss(std::vector<Point> xs, MatrixXd ys) : xs_(std::move(xs)), ys_(std::move(ys)) {
  if (xs_.empty() || static_cast<Index>(xs_.size()) != ys_.rows()) throw ShapeMismatch("data_l2: points and targets");
  if (!ys_.allFinite()) throw BadTarget("data_l2: targets must be finite");
}

LossEvaluation DataL2Loss::evaluate(const ConstrainedField& field, std::mt19937_64&) const {
  if (ys_.cols() != field.channels()) throw ShapeMismatch("data_l2: target channels");
  LossEvaluation out;
  const double inv = 1.0 / static_cast<double>(xs_.size());
  for (std::size_t i = 0; i < xs_.size(); ++i) {
    const VectorXd r = field.eval(xs_[i]) - ys_.row(static_cast<Index>(i)).transpose();
    out.value += r.squaredNorm() * inv;
    FieldProbe p;
    p.x = xs_[i];
    p.order = 0;
    p.cot = 2.0 * inv * r;
    out.probes.push_back(std::move(p));
  }
  return out;
}

DataLogL1Loss::DataLogL1Loss(std::vector<Point> xs, MatrixXd ys) : xs_(std::move(xs)) {
  if (xs_.empty() || static_cast<Index>(xs_.size()) != ys.rows()) throw ShapeMismatch("data_log_l1: points and targets");
  if (!ys.allFinite() || (ys.array() <= -1.0).any()) throw BadTarget("data_log_l1: targets must be finite and > -1");
  log_ys_ = ys.array().log1p().matrix();
}

LossEvaluation DataLogL1Loss::evaluate(const ConstrainedField& field, std::mt19937_64&) const {
  if (log_ys_.cols() != field.channels()) throw ShapeMismatch("data_log_l1: target channels");
  LossEvaluation out;
  const double inv = 1.0 / (static_cast<double>(xs_.size()) * static_cast<double>(field.channels()));
  for (std::size_t i = 0; i < xs_.size(); ++i) {
    const VectorXd r = field.eval(xs_[i]) - log_ys_.row(static_cast<Index>(i)).transpose();
    out.value += r.cwiseAbs().sum() * inv;
    FieldProbe p;
    p.x = xs_[i];
    p.order = 0;
    p.cot = inv * r.unaryExpr([](double v) { return static_cast<double>((v > 0) - (v < 0)); });
    out.probes.push_back(std::move(p));
  }
  return out;
}

}  // namespace cnf
