#pragma once

#include "cnf/basis.hpp"
#include "cnf/linalg.hpp"
#include "cnf/operators.hpp"

#include <memory>
#include <string>
#include <vector>

namespace cnf {

/// F[f](anchor) = target, one value per output channel.
struct Constraint {
  LinearOperator op;
  Point anchor;
  Eigen::VectorXd target;
};

/// Ordered constraints over N channels. Row r of every collocation matrix is
/// constraint r. Duplicate (operator, anchor) pairs are rejected.
class ConstraintSet {
 public:
  ConstraintSet() = default;
  ConstraintSet(std::vector<Constraint> constraints, int channels, CoefficientRegistry coeffs = {});

  int size() const { return static_cast<int>(constraints_.size()); }
  int channels() const { return channels_; }
  int dims() const { return dims_; }
  const Constraint& operator[](int r) const { return constraints_[static_cast<std::size_t>(r)]; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const CoefficientRegistry& coefficients() const { return coeffs_; }

  /// Operator r as slot weights at its own anchor.
  const SlotWeights& slots(int r) const { return slots_[static_cast<std::size_t>(r)]; }
  int order(int r) const { return operator_order(constraints_[static_cast<std::size_t>(r)].op); }
  int max_order() const;

  /// I × N target matrix G.
  Eigen::MatrixXd targets() const;
  void set_targets(const Eigen::MatrixXd& g);
  std::vector<Point> anchors() const;

  /// Row indices grouped by identical anchor, groups in first-appearance order.
  const std::vector<std::vector<int>>& anchor_groups() const { return groups_; }

 private:
  std::vector<Constraint> constraints_;
  int channels_ = 1;
  int dims_ = 0;
  CoefficientRegistry coeffs_;
  std::vector<SlotWeights> slots_;
  std::vector<std::vector<int>> groups_;
};

/// Fields whose κ̃ exceeds this are solved but flagged untrusted.
inline constexpr double kTrustedCond = 1e10;

/// Collocation matrices A (one shared by all channels for scalar bases, one per
/// channel for vector bases), right-hand sides and factorizations.
struct CollocationSystem {
  std::vector<linalg::DenseMatrix> matrices;
  std::vector<linalg::LUFactorization> factors;
  std::vector<linalg::DenseMatrix> inverses;
  std::vector<double> conds;
  Eigen::MatrixXd rhs;  ///< I × N
  double cond = 0.0;    ///< max over matrices

  bool shared() const { return matrices.size() == 1; }
  int size() const { return static_cast<int>(rhs.rows()); }
  int channels() const { return static_cast<int>(rhs.cols()); }
  int matrix_index(int channel) const { return shared() ? 0 : channel; }
  const linalg::DenseMatrix& matrix(int channel) const { return matrices[static_cast<std::size_t>(matrix_index(channel))]; }
  double channel_cond(int channel) const { return conds[static_cast<std::size_t>(matrix_index(channel))]; }
  bool trusted() const { return cond <= kTrustedCond; }
};

/// Fills only the matrices (no factorization); A_rc = op_r[Ψ_c](anchor_r).
std::vector<linalg::DenseMatrix> assemble_matrices(const BasisFamily& family, const ConstraintSet& constraints);

/// Assembles, factors and computes κ̃. Throws SingularMatrix.
CollocationSystem assemble(const BasisFamily& family, const ConstraintSet& constraints);

/// B (I × N) with A_n·B_n = G_n per channel.
Eigen::MatrixXd solve_weights(const CollocationSystem& system);

/// ‖A_n·B_n − G_n‖∞ per channel.
Eigen::VectorXd residual(const CollocationSystem& system, const Eigen::MatrixXd& weights);

/// 64·eps·κ̃·(‖G_n‖∞ + 1).
double residual_bound(const CollocationSystem& system, int channel);

/// Throws ResidualViolation when any channel exceeds its bound.
void check_residual(const CollocationSystem& system, const Eigen::MatrixXd& weights, const std::string& where);

/// Σ_n Σ_rc dA_n(r,c)·∂A_n(r,c)/∂θ, contracted row by row through the basis
/// parameter gradients. `dA` has one entry per system matrix.
ParamCotangent matrix_vjp(const BasisFamily& family, const ConstraintSet& constraints,
                          const std::vector<linalg::DenseMatrix>& dA);

/// Adjoint cotangent on the matrices: dL/dA_n = −λ_n·B_nᵀ with A_nᵀλ_n = dL/dB_n.
std::vector<linalg::DenseMatrix> adjoint_matrix_cotangent(const CollocationSystem& system,
                                                         const Eigen::MatrixXd& weights,
                                                         const Eigen::MatrixXd& dL_dB);

/// dL/dθ through B = A⁻¹G, for targets that do not depend on θ.
ParamCotangent vjp_through_solve(const CollocationSystem& system, const BasisFamily& family,
                                 const ConstraintSet& constraints, const Eigen::MatrixXd& weights,
                                 const Eigen::MatrixXd& dL_dB);

/// Cotangent on the field bundle at one point: row n holds channel n's slot
/// weights (length slot_count(M, order)).
struct FieldProbe {
  Point x;
  int order = 0;
  Eigen::MatrixXd cot;
};

/// A loss value plus everything needed for its gradient: cotangents on field
/// bundles at sample points and, optionally, direct cotangents on the
/// collocation matrices (one per system matrix, or empty).
struct LossEvaluation {
  double value = 0.0;
  std::vector<FieldProbe> probes;
  std::vector<linalg::DenseMatrix> matrix_cot;
};

/// Basis family + constraints + solved weights. Constraints hold at the solved
/// weights to the residual bound.
class ConstrainedField {
 public:
  ConstrainedField(std::unique_ptr<BasisFamily> family, ConstraintSet constraints);
  ConstrainedField(const ConstrainedField& other);
  ConstrainedField& operator=(const ConstrainedField& other);
  ConstrainedField(ConstrainedField&&) noexcept = default;
  ConstrainedField& operator=(ConstrainedField&&) noexcept = default;

  const BasisFamily& family() const { return *family_; }
  const ConstraintSet& constraints() const { return constraints_; }
  int channels() const { return constraints_.channels(); }
  int dims() const { return family_->input_dim(); }

  /// Assembles, factors and solves; checks the residual bound.
  /// Throws SingularMatrix, ResidualViolation.
  void solve();
  /// Replaces parameters; the field is stale until the next solve().
  void set_params(std::span<const double> p);
  /// Replaces targets and re-solves with the existing factorization.
  void resolve_targets(const Eigen::MatrixXd& g);

  bool stale() const { return stale_; }
  bool trusted() const { return !stale_ && system_.trusted(); }
  const CollocationSystem& system() const;
  const Eigen::MatrixXd& weights() const;
  /// max over channels of the constraint residual.
  double max_residual() const;

  /// Field bundle with one feature per channel. Where a compactly supported
  /// family has no support the value is the fallback and derivatives vanish.
  DerivativeBundle eval_bundle(const Point& x, int order) const;
  Eigen::VectorXd eval(const Point& x) const;
  Eigen::VectorXd eval(const Point& x, const LinearOperator& op) const;

  /// dL/dB from cotangents on field bundles.
  Eigen::MatrixXd weight_cotangent(const std::vector<FieldProbe>& probes) const;
  /// Direct path: dL/dθ holding B fixed.
  ParamCotangent direct_grad(const std::vector<FieldProbe>& probes) const;

 private:
  void require_fresh() const;
  bool outside_support(const Point& x) const;

  std::unique_ptr<BasisFamily> family_;
  ConstraintSet constraints_;
  CollocationSystem system_;
  Eigen::MatrixXd weights_;
  bool stale_ = true;
};

/// Full gradient of a loss: direct path at the probes, plus the adjoint path
/// through the solve, plus any direct matrix cotangent.
ParamCotangent total_loss_grad(const ConstrainedField& field, const LossEvaluation& loss);

}  // namespace cnf
