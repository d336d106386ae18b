#pragma once

#include "cnf/diff.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cnf {

/// A separable cotangent on the all-bases bundle at one point:
/// entry (feature f, slot s) carries feature_weights[f] · slots[s].
struct GradItem {
  Point x;
  int order = 0;
  Eigen::VectorXd feature_weights;  ///< length size()·width()
  SlotWeights slots;                ///< length slot_count(M, order)
};

/// A family of I basis functions Ψ_0..Ψ_{I-1} sharing one flat parameter
/// vector.
///
/// Scalar families (width 1) are broadcast over output channels. Vector
/// families (width N) give each basis one output per channel; the all-bases
/// bundle then stacks features as c·width + n.
class BasisFamily {
 public:
  virtual ~BasisFamily() = default;

  virtual std::string kind() const = 0;
  virtual int size() const = 0;
  virtual int input_dim() const = 0;
  virtual int width() const { return 1; }
  int features() const { return size() * width(); }

  virtual std::span<const double> params() const { return params_; }
  /// Replaces every parameter and refreshes cached derived state.
  virtual void set_params(std::span<const double> p);
  int param_count() const { return static_cast<int>(params().size()); }
  /// 1 for trainable slots, 0 for frozen ones; same length as params().
  virtual std::vector<char> trainable_mask() const;

  /// Every basis at x, value/jac/hess up to `order`.
  virtual DerivativeBundle eval_all(const Point& x, int order) const = 0;
  /// The bases listed in `idx`, in that order. Features j·width + n.
  virtual DerivativeBundle eval_subset(const Point& x, int order, std::span<const int> idx) const;
  /// Adds Σ_items Σ_{f,s} w_f·slot_s·∂bundle_{f,s}(x)/∂θ to grad.
  virtual void param_grad(std::span<const GradItem> items, std::span<double> grad) const = 0;

  /// Bundle of basis i alone (features = width()).
  DerivativeBundle eval(int i, const Point& x, int order) const;
  /// Gradient of Σ cotangent·bundle(i, x) over all family parameters.
  ParamCotangent param_grad(int i, const Point& x, int order, const DerivativeBundle& cotangent) const;

  virtual std::unique_ptr<BasisFamily> clone() const = 0;

  /// Anchor points when the family has them (kernel and RBF families).
  virtual std::vector<Point> anchors() const { return {}; }
  /// Distance from an anchor at and beyond which its basis is exactly zero.
  virtual std::optional<double> support_radius() const { return std::nullopt; }
  /// Field value where no basis has support.
  virtual std::optional<double> fallback_value() const { return std::nullopt; }

 protected:
  void check_query(const Point& x, int order) const;
  void check_index(int i) const;
  virtual void refresh() {}

  std::vector<double> params_;
};

/// A per-basis (non-separable) cotangent restricted to a subset of bases.
/// An empty `idx` means all bases in order.
struct KernelCotangent {
  Point x;
  int order = 0;
  std::vector<int> idx;
  DerivativeBundle cot;  ///< features = |idx| (or size())
};

/// Scalar kernel families whose bases are Ψ_c(x) = κ(anchor features, features of x).
class KernelBasis : public BasisFamily {
 public:
  std::vector<Point> anchors() const override { return anchors_; }

  void param_grad(std::span<const GradItem> items, std::span<double> grad) const override;
  /// Pulls per-basis cotangents back to the parameters.
  virtual void backprop(std::span<const KernelCotangent> items, std::span<double> grad) const = 0;

  DerivativeBundle eval_all(const Point& x, int order) const override;

  double kernel_scale() const;
  bool train_scale() const { return train_scale_; }
  void set_train_scale(bool on) { train_scale_ = on; }
  std::vector<char> trainable_mask() const override;

 protected:
  // Index of log s in the parameter vector, or -1 when the kernel has none.
  virtual int log_scale_index() const { return -1; }

  std::vector<Point> anchors_;
  bool train_scale_ = true;
};

/// Ψ_c(x) = exp(−‖φ(x_c) − φ(x)‖² / (2s²)) with one shared encoder φ.
/// Parameters: encoder weights, then log s.
class GaussianKernelBasis : public KernelBasis {
 public:
  GaussianKernelBasis(EncoderArch arch, std::vector<double> encoder_params, std::vector<Point> anchors,
                      double kernel_scale);

  std::string kind() const override { return "gaussian_kernel"; }
  int size() const override { return static_cast<int>(anchors_.size()); }
  int input_dim() const override { return arch_.input_dim; }
  const EncoderArch& arch() const { return arch_; }
  /// Cached φ(x_c), one row per anchor.
  const Eigen::MatrixXd& anchor_features() const { return anchor_features_; }

  DerivativeBundle eval_subset(const Point& x, int order, std::span<const int> idx) const override;
  void backprop(std::span<const KernelCotangent> items, std::span<double> grad) const override;
  std::unique_ptr<BasisFamily> clone() const override;

 protected:
  int log_scale_index() const override { return arch_.param_count(); }
  void refresh() override;

 private:
  EncoderArch arch_;
  Eigen::MatrixXd anchor_features_;
};

/// Ψ_c(x) = φ(x_c) · φ(x).
class DotProductKernelBasis : public KernelBasis {
 public:
  DotProductKernelBasis(EncoderArch arch, std::vector<double> encoder_params, std::vector<Point> anchors);

  std::string kind() const override { return "dot_kernel"; }
  int size() const override { return static_cast<int>(anchors_.size()); }
  int input_dim() const override { return arch_.input_dim; }
  const Eigen::MatrixXd& anchor_features() const { return anchor_features_; }

  DerivativeBundle eval_subset(const Point& x, int order, std::span<const int> idx) const override;
  void backprop(std::span<const KernelCotangent> items, std::span<double> grad) const override;
  std::unique_ptr<BasisFamily> clone() const override;

 protected:
  void refresh() override;

 private:
  EncoderArch arch_;
  Eigen::MatrixXd anchor_features_;
};

/// Generates encoder weights from a conditioning vector with a hypernetwork.
/// The hypernet output length must equal target.param_count().
EncoderParams hypernet_generate(const EncoderArch& hyper_arch, std::span<const double> hyper_params,
                                const Point& condition, const EncoderArch& target);
EncoderParams hypernet_generate(const EncoderParams& hyper, const Point& condition,
                                const EncoderArch& target);

/// Occurrence index of each anchor among earlier identical anchors.
std::vector<int> anchor_slots(const std::vector<Point>& anchors);

/// Ψ_c(x) = exp(−‖φ_c(x_c) − φ_c(x)‖² / (2s²)), where φ_c's weights come from a
/// hypernetwork fed [x_c, one-hot(slot_c)]. The slot separates bases that
/// share an anchor. Parameters: hypernet weights, then log s.
class HypernetKernelBasis : public KernelBasis {
 public:
  HypernetKernelBasis(EncoderArch target, EncoderArch hyper, std::vector<double> hyper_params,
                      std::vector<Point> anchors, int slot_count, double kernel_scale);

  std::string kind() const override { return "hypernet_kernel"; }
  int size() const override { return static_cast<int>(anchors_.size()); }
  int input_dim() const override { return target_.input_dim; }
  const EncoderArch& target_arch() const { return target_; }
  const EncoderArch& hyper_arch() const { return hyper_; }
  int slot_count() const { return slot_count_; }
  /// Conditioning vector of basis c.
  Point condition(int c) const;
  /// Encoder weights generated for basis c.
  std::span<const double> generated(int c) const;

  DerivativeBundle eval_subset(const Point& x, int order, std::span<const int> idx) const override;
  void backprop(std::span<const KernelCotangent> items, std::span<double> grad) const override;
  std::unique_ptr<BasisFamily> clone() const override;

 protected:
  int log_scale_index() const override { return hyper_.param_count(); }
  void refresh() override;

 private:
  EncoderArch target_;
  EncoderArch hyper_;
  std::vector<int> slots_;
  int slot_count_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> generated_;  // I × target params
  std::vector<Eigen::VectorXd> anchor_features_;
};

/// Inner kernel times a truncated Gaussian in the input domain:
/// κ_G(x_c, x) = exp(−‖x_c − x‖²/(2σ²)) for ‖x_c − x‖ < 3σ, else exactly 0.
/// The truncation leaves a jump of e^{−4.5} at the cutoff.
class HybridKernelBasis : public BasisFamily {
 public:
  HybridKernelBasis(std::unique_ptr<KernelBasis> inner, double sigma, double fallback_value = 1e5);
  HybridKernelBasis(const HybridKernelBasis& other);

  std::string kind() const override { return "hybrid_kernel"; }
  int size() const override { return inner_->size(); }
  int input_dim() const override { return inner_->input_dim(); }
  double sigma() const { return sigma_; }
  const KernelBasis& inner() const { return *inner_; }

  std::span<const double> params() const override { return inner_->params(); }
  void set_params(std::span<const double> p) override { inner_->set_params(p); }
  std::vector<char> trainable_mask() const override { return inner_->trainable_mask(); }

  DerivativeBundle eval_all(const Point& x, int order) const override;
  DerivativeBundle eval_subset(const Point& x, int order, std::span<const int> idx) const override;
  void param_grad(std::span<const GradItem> items, std::span<double> grad) const override;
  std::unique_ptr<BasisFamily> clone() const override;

  std::vector<Point> anchors() const override { return inner_->anchors(); }
  std::optional<double> support_radius() const override { return 3.0 * sigma_; }
  std::optional<double> fallback_value() const override { return fallback_; }

  /// Bases whose support contains x, in index order.
  std::vector<int> supported(const Point& x) const;

 private:
  std::unique_ptr<KernelBasis> inner_;
  double sigma_;
  double fallback_;
};

/// Ψ_c(x) = exp(−½ (x − x_c)ᵀ Σ_c⁻¹ (x − x_c)) with Σ_c diagonal.
///
/// Per-basis mode stores log Σ_c[k,k] for every basis and axis. Shared mode
/// stores one log σ² for all bases and axes (the plain RBF).
class SkewedRBFBasis : public BasisFamily {
 public:
  SkewedRBFBasis(std::vector<Point> anchors, double bandwidth, bool shared);
  SkewedRBFBasis(std::vector<Point> anchors, std::vector<double> log_variances, bool shared);

  std::string kind() const override { return shared_ ? "rbf" : "skewed_rbf"; }
  int size() const override { return static_cast<int>(anchors_.size()); }
  int input_dim() const override { return dims_; }
  bool shared() const { return shared_; }
  std::vector<Point> anchors() const override { return anchors_; }
  /// Σ_c[k,k].
  double variance(int c, int k) const;

  DerivativeBundle eval_all(const Point& x, int order) const override;
  DerivativeBundle eval_subset(const Point& x, int order, std::span<const int> idx) const override;
  void param_grad(std::span<const GradItem> items, std::span<double> grad) const override;
  std::unique_ptr<BasisFamily> clone() const override;

 private:
  std::vector<Point> anchors_;
  int dims_;
  bool shared_;
};

/// Vector-valued quadratic polynomials of one variable: basis c, channel n is
/// p0 + p1·x + p2·x². Parameters: for each (c, n), [p0, p1, p2].
class PolynomialBasis : public BasisFamily {
 public:
  PolynomialBasis(int count, int channels, std::vector<double> coefficients);

  std::string kind() const override { return "polynomial"; }
  int size() const override { return count_; }
  int input_dim() const override { return 1; }
  int width() const override { return channels_; }

  DerivativeBundle eval_all(const Point& x, int order) const override;
  void param_grad(std::span<const GradItem> items, std::span<double> grad) const override;
  std::unique_ptr<BasisFamily> clone() const override;

 private:
  int count_;
  int channels_;
};

/// One scalar encoder per basis; parameters are the encoders concatenated.
class IndependentBasis : public BasisFamily {
 public:
  IndependentBasis(EncoderArch arch, int count, std::vector<double> params);

  std::string kind() const override { return "independent"; }
  int size() const override { return count_; }
  int input_dim() const override { return arch_.input_dim; }

  DerivativeBundle eval_all(const Point& x, int order) const override;
  void param_grad(std::span<const GradItem> items, std::span<double> grad) const override;
  std::unique_ptr<BasisFamily> clone() const override;

 private:
  EncoderArch arch_;
  int count_;
};

/// A single encoder whose output features are the bases (a constraint layer).
class ConstraintLayerBasis : public BasisFamily {
 public:
  ConstraintLayerBasis(EncoderArch arch, std::vector<double> params);

  std::string kind() const override { return "constraint_layer"; }
  int size() const override { return arch_.output_dim(); }
  int input_dim() const override { return arch_.input_dim; }

  DerivativeBundle eval_all(const Point& x, int order) const override;
  void param_grad(std::span<const GradItem> items, std::span<double> grad) const override;
  std::unique_ptr<BasisFamily> clone() const override;

 private:
  EncoderArch arch_;
};

/// Scalar encoders whose weights a hypernetwork generates from the one-hot
/// code of the basis index.
class HypernetBasis : public BasisFamily {
 public:
  HypernetBasis(EncoderArch target, EncoderArch hyper, std::vector<double> hyper_params);

  std::string kind() const override { return "hypernet"; }
  int size() const override { return hyper_.input_dim; }
  int input_dim() const override { return target_.input_dim; }

  DerivativeBundle eval_all(const Point& x, int order) const override;
  void param_grad(std::span<const GradItem> items, std::span<double> grad) const override;
  std::unique_ptr<BasisFamily> clone() const override;

 protected:
  void refresh() override;

 private:
  EncoderArch target_;
  EncoderArch hyper_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> generated_;  // I × target params
};

/// Everything init_basis needs. Fields irrelevant to a kind are ignored.
struct BasisConfig {
  std::string kind = "gaussian_kernel";
  int input_dim = 2;
  std::vector<Point> anchors;
  int count = 0;     ///< bases for index-addressed families (independent, hypernet, constraint_layer)
  int channels = 1;  ///< polynomial width

  std::vector<int> hidden{64};
  int features = 32;
  Activation activation = Activation::kSoftplus;
  double activation_param = kDefaultSoftplusBeta;
  Activation output_activation = Activation::kLinear;

  double kernel_scale = 50.0;
  bool train_scale = true;

  std::vector<int> hyper_hidden{16};
  double hyper_gain = 1.0;
  int slot_count = 0;  ///< 0: max anchor multiplicity

  std::string inner = "gaussian_kernel";  ///< hybrid inner kernel
  double sigma = 0.1;
  double fallback_value = 1e5;

  double bandwidth = 0.1;  ///< RBF families: initial per-axis standard deviation
};

/// Builds a family deterministically from a config and seed. Throws BadConfig.
std::unique_ptr<BasisFamily> init_basis(const BasisConfig& config, std::uint64_t seed);

}  // namespace cnf
