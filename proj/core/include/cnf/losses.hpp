#pragma once

#include "cnf/collocation.hpp"

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace cnf {

/// Axis-aligned sampling box Ω.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  double volume() const;
  Point sample(std::mt19937_64& rng) const;
};

/// A loss on a solved field: its value plus the cotangents total_loss_grad
/// needs.
class FieldObjective {
 public:
  virtual ~FieldObjective() = default;
  virtual std::string name() const = 0;
  virtual LossEvaluation evaluate(const ConstrainedField& field, std::mt19937_64& rng) const = 0;
};

/// mean over fresh uniform samples of (‖∇Φ‖ − 1)², channel 0.
class EikonalLoss : public FieldObjective {
 public:
  EikonalLoss(Box domain, int samples = 1000);
  std::string name() const override { return "eikonal"; }
  LossEvaluation evaluate(const ConstrainedField& field, std::mt19937_64& rng) const override;

 private:
  Box domain_;
  int samples_;
};

/// vol(Ω) · mean ‖∇f‖₂, summed over channels.
class TotalVariationLoss : public FieldObjective {
 public:
  TotalVariationLoss(Box domain, int samples = 1000);
  std::string name() const override { return "total_variation"; }
  LossEvaluation evaluate(const ConstrainedField& field, std::mt19937_64& rng) const override;

 private:
  Box domain_;
  int samples_;
};

/// Σ over system matrices of log κ̃.
class CondLoss : public FieldObjective {
 public:
  std::string name() const override { return "cond"; }
  LossEvaluation evaluate(const ConstrainedField& field, std::mt19937_64& rng) const override;
};

/// mean over points of Σ_channels (f(x) − y)².
class DataL2Loss : public FieldObjective {
 public:
  DataL2Loss(std::vector<Point> xs, Eigen::MatrixXd ys);
  std::string name() const override { return "data_l2"; }
  LossEvaluation evaluate(const ConstrainedField& field, std::mt19937_64& rng) const override;

 private:
  std::vector<Point> xs_;
  Eigen::MatrixXd ys_;  // P × N
};

/// mean over points and channels of |f(x) − log(y + 1)|. Throws BadTarget if
/// any y ≤ −1.
class DataLogL1Loss : public FieldObjective {
 public:
  DataLogL1Loss(std::vector<Point> xs, Eigen::MatrixXd ys);
  std::string name() const override { return "data_log_l1"; }
  LossEvaluation evaluate(const ConstrainedField& field, std::mt19937_64& rng) const override;

 private:
  std::vector<Point> xs_;
  Eigen::MatrixXd log_ys_;
};

/// Floor on ‖∇f‖ in gradient-norm losses.
inline constexpr double kNormFloor = 1e-12;

}  // namespace cnf
