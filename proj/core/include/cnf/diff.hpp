#pragma once

#include <Eigen/Dense>

#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cnf {

using Point = Eigen::VectorXd;

/// Flat gradient vector laid out like the owning parameter vector.
using ParamCotangent = std::vector<double>;

/// Value and input derivatives (up to second order) of F functions of a
/// point in R^M.
///
/// `jac` is F×M. `hess` is F×(M·M) with column k·M+l holding ∂²/∂x_k∂x_l;
/// it is empty unless order == 2.
struct DerivativeBundle {
  int order = 0;
  Eigen::VectorXd value;
  Eigen::MatrixXd jac;
  Eigen::MatrixXd hess;

  static DerivativeBundle zeros(Eigen::Index features, Eigen::Index dims, int order);

  Eigen::Index features() const { return value.size(); }
  Eigen::Index dims() const { return jac.cols(); }
  double hess_at(Eigen::Index f, Eigen::Index k, Eigen::Index l) const {
    return hess(f, k * dims() + l);
  }

  /// Throws NonFiniteValue on NaN/Inf and Error on an asymmetric Hessian.
  void validate(double symmetry_tol = 1e-10) const;
};

/// Number of slots (value, jac, hess) a bundle of the given order carries.
inline Eigen::Index slot_count(Eigen::Index dims, int order) {
  return 1 + (order >= 1 ? dims : 0) + (order >= 2 ? dims * dims : 0);
}

/// Slot-space weights for one scalar function: index 0 is the value, 1..M the
/// first partials, 1+M+k·M+l the second partials.
using SlotWeights = Eigen::VectorXd;

enum class Activation { kTanh, kSoftplus, kSine, kRelu, kLinear };

Activation parse_activation(const std::string& name);
std::string activation_name(Activation a);

/// Default shape parameters: softplus sharpness and sine frequency.
inline constexpr double kDefaultSoftplusBeta = 10.0;
inline constexpr double kDefaultSineOmega = 30.0;

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation act = Activation::kLinear;
  /// softplus β or sine ω₀; ignored for the other activations.
  double act_param = 0.0;
};

/// Layer shapes of a feed-forward encoder. Parameters are stored separately in
/// a flat vector: per layer, W (out×in, row-major) followed by b (out).
struct EncoderArch {
  int input_dim = 0;
  std::vector<LayerSpec> layers;

  int output_dim() const { return layers.empty() ? input_dim : layers.back().out; }
  int param_count() const;
  /// Throws ArchMismatch if consecutive layer sizes do not chain.
  void validate() const;

  /// Fully connected net: hidden layers use `hidden_act`, the last layer `out_act`.
  static EncoderArch mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                         Activation hidden_act, Activation out_act = Activation::kLinear,
                         double act_param = 0.0);
};

/// An architecture bundled with its own parameters.
struct EncoderParams {
  EncoderArch arch;
  std::vector<double> flat;
};

/// Glorot-uniform weights, zero biases.
std::vector<double> glorot_init(const EncoderArch& arch, std::mt19937_64& rng);

/// Forward pass through the encoder that records every layer's affine and
/// activation intermediates, so input-derivative bundles can be pulled back to
/// the parameters by a reverse sweep.
class EncoderTape {
 public:
  EncoderTape(const EncoderArch& arch, std::span<const double> params, const Point& x, int order);

  const DerivativeBundle& output() const { return output_; }

  /// Adds Σ cotangent·∂(output bundle)/∂θ into `grad` (length param_count).
  void backward(const DerivativeBundle& cotangent, std::span<double> grad) const;

 private:
  struct LayerRecord {
    Eigen::VectorXd a;   // layer input
    Eigen::MatrixXd ja;  // in×M
    Eigen::MatrixXd ha;  // in×M²
    Eigen::MatrixXd jz;  // out×M
    Eigen::MatrixXd hz;  // out×M²
    Eigen::VectorXd d1, d2, d3;
  };

  const EncoderArch* arch_;
  std::span<const double> params_;
  int order_;
  std::vector<LayerRecord> records_;
  DerivativeBundle output_;
};

/// φ(x) with exact layerwise Jacobian (order ≥ 1) and Hessian (order 2).
DerivativeBundle encoder_eval(const EncoderArch& arch, std::span<const double> params,
                              const Point& x, int order);
DerivativeBundle encoder_eval(const EncoderParams& enc, const Point& x, int order);

/// Σ over bundle entries of cotangent·∂entry/∂θ.
ParamCotangent encoder_param_grad(const EncoderArch& arch, std::span<const double> params,
                                  const Point& x, int order, const DerivativeBundle& cotangent);
ParamCotangent encoder_param_grad(const EncoderParams& enc, const Point& x, int order,
                                  const DerivativeBundle& cotangent);

using ScalarFunction = std::function<double(const std::vector<double>&)>;

/// Central-difference gradient with step 1e-5·(1+|v_i|).
std::vector<double> fd_gradient(const ScalarFunction& f, const std::vector<double>& at);

/// max_i |fd_i − analytic_i| / (|fd_i| + |analytic_i| + floor).
double fd_check(const ScalarFunction& f, const std::vector<double>& at,
                const std::vector<double>& analytic, double floor = 1e-12);

}  // namespace cnf
