#include "cnf/diff.hpp"

#include "cnf/errors.hpp"

#include <algorithm>
#include <cmath>

namespace cnf {

namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

struct ActivationDerivs {
  Eigen::VectorXd d0, d1, d2, d3;
};

// σ and its first three derivatives, elementwise in z.
void activate(const LayerSpec& layer, const Eigen::VectorXd& z, ActivationDerivs& out) {
  const Eigen::Index n = z.size();
  out.d0.resize(n);
  out.d1.resize(n);
  out.d2.resize(n);
  out.d3.resize(n);
  switch (layer.act) {
    case Activation::kLinear:
      out.d0 = z;
      out.d1.setOnes();
      out.d2.setZero();
      out.d3.setZero();
      break;
    case Activation::kRelu:
      for (Eigen::Index i = 0; i < n; ++i) {
        out.d0[i] = z[i] > 0.0 ? z[i] : 0.0;
        out.d1[i] = z[i] > 0.0 ? 1.0 : 0.0;
      }
      out.d2.setZero();
      out.d3.setZero();
      break;
    case Activation::kTanh:
      for (Eigen::Index i = 0; i < n; ++i) {
        const double t = std::tanh(z[i]);
        const double s = 1.0 - t * t;
        out.d0[i] = t;
        out.d1[i] = s;
        out.d2[i] = -2.0 * t * s;
        out.d3[i] = s * (6.0 * t * t - 2.0);
      }
      break;
    case Activation::kSoftplus: {
      const double beta = layer.act_param > 0.0 ? layer.act_param : kDefaultSoftplusBeta;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double bz = beta * z[i];
        const double p = bz >= 0.0 ? 1.0 / (1.0 + std::exp(-bz)) : std::exp(bz) / (1.0 + std::exp(bz));
        out.d0[i] = (std::max(bz, 0.0) + std::log1p(std::exp(-std::abs(bz)))) / beta;
        out.d1[i] = p;
        out.d2[i] = beta * p * (1.0 - p);
        out.d3[i] = beta * beta * p * (1.0 - p) * (1.0 - 2.0 * p);
      }
      break;
    }
    case Activation::kSine: {
      const double w = layer.act_param > 0.0 ? layer.act_param : kDefaultSineOmega;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double s = std::sin(w * z[i]);
        const double c = std::cos(w * z[i]);
        out.d0[i] = s;
        out.d1[i] = w * c;
        out.d2[i] = -w * w * s;
        out.d3[i] = -w * w * w * c;
      }
      break;
    }
  }
}

// Pads a cotangent bundle with zeros up to the given order.
DerivativeBundle widen(const DerivativeBundle& b, Eigen::Index dims, int order) {
  DerivativeBundle out = DerivativeBundle::zeros(b.features(), dims, order);
  out.value = b.value;
  if (b.order >= 1 && order >= 1) out.jac = b.jac;
  if (b.order >= 2 && order >= 2) out.hess = b.hess;
  return out;
}

}  // namespace

DerivativeBundle DerivativeBundle::zeros(Eigen::Index features, Eigen::Index dims, int order) {
  DerivativeBundle b;
  b.order = order;
  b.value = Eigen::VectorXd::Zero(features);
  b.jac = Eigen::MatrixXd::Zero(features, dims);
  if (order >= 2) b.hess = Eigen::MatrixXd::Zero(features, dims * dims);
  return b;
}

void DerivativeBundle::validate(double symmetry_tol) const {
  if (!value.allFinite() || (order >= 1 && !jac.allFinite()) || (order >= 2 && !hess.allFinite())) {
    throw NonFiniteValue("derivative bundle has non-finite entries");
  }
  if (order >= 2) {
    const Eigen::Index m = dims();
    if (hess.cols() != m * m) throw Error("derivative bundle: hessian has wrong shape");
    for (Eigen::Index k = 0; k < m; ++k) {
      for (Eigen::Index l = k + 1; l < m; ++l) {
        const double d = (hess.col(k * m + l) - hess.col(l * m + k)).cwiseAbs().maxCoeff();
        if (d > symmetry_tol) throw Error("derivative bundle: hessian is not symmetric");
      }
    }
  } else if (hess.size() != 0) {
    throw Error("derivative bundle: hessian present below order 2");
  }
}

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "softplus") return Activation::kSoftplus;
  if (name == "sine" || name == "sin") return Activation::kSine;
  if (name == "relu") return Activation::kRelu;
  if (name == "linear" || name == "none") return Activation::kLinear;
  throw BadConfig("unknown activation '" + name + "'");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kSoftplus: return "softplus";
    case Activation::kSine: return "sine";
    case Activation::kRelu: return "relu";
    case Activation::kLinear: return "linear";
  }
  return "linear";
}

int EncoderArch::param_count() const {
  int n = 0;
  for (const auto& l : layers) n += l.out * l.in + l.out;
  return n;
}

void EncoderArch::validate() const {
  if (input_dim <= 0) throw ArchMismatch("encoder: input dimension must be positive");
  int prev = input_dim;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].in != prev || layers[i].out <= 0) {
      throw ArchMismatch("encoder: layer " + std::to_string(i) + " expects " +
                         std::to_string(layers[i].in) + " inputs, previous layer gives " +
                         std::to_string(prev));
    }
    prev = layers[i].out;
  }
}

EncoderArch EncoderArch::mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                             Activation hidden_act, Activation out_act, double act_param) {
  EncoderArch arch;
  arch.input_dim = input_dim;
  int prev = input_dim;
  for (int h : hidden) {
    arch.layers.push_back({prev, h, hidden_act, act_param});
    prev = h;
  }
  arch.layers.push_back({prev, output_dim, out_act, act_param});
  return arch;
}

std::vector<double> glorot_init(const EncoderArch& arch, std::mt19937_64& rng) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(arch.param_count()));
  for (const auto& l : arch.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (int i = 0; i < l.out * l.in; ++i) flat.push_back(dist(rng));
    for (int i = 0; i < l.out; ++i) flat.push_back(0.0);
  }
  return flat;
}

EncoderTape::EncoderTape(const EncoderArch& arch, std::span<const double> params, const Point& x,
                         int order)
    : arch_(&arch), params_(params), order_(order) {
  if (order < 0 || order > 2) throw UnsupportedOrder("encoder: order must be 0, 1 or 2");
  if (x.size() != arch.input_dim) {
    throw DimensionMismatch("encoder: point has dimension " + std::to_string(x.size()) +
                            ", encoder expects " + std::to_string(arch.input_dim));
  }
  if (static_cast<int>(params.size()) != arch.param_count()) {
    throw ArchMismatch("encoder: parameter vector has " + std::to_string(params.size()) +
                       " entries, architecture needs " + std::to_string(arch.param_count()));
  }
  const Eigen::Index m = x.size();
  Eigen::VectorXd a = x;
  Eigen::MatrixXd ja, ha;
  if (order >= 1) ja = Eigen::MatrixXd::Identity(m, m);
  if (order >= 2) ha = Eigen::MatrixXd::Zero(m, m * m);

  records_.reserve(arch.layers.size());
  std::size_t offset = 0;
  ActivationDerivs act;
  for (const auto& layer : arch.layers) {
    RowMajorMap w(params.data() + offset, layer.out, layer.in);
    Eigen::Map<const Eigen::VectorXd> b(params.data() + offset + layer.out * layer.in, layer.out);
    offset += static_cast<std::size_t>(layer.out * layer.in + layer.out);

    LayerRecord rec;
    Eigen::VectorXd z = w * a + b;
    if (order >= 1) rec.jz.noalias() = w * ja;
    if (order >= 2) rec.hz.noalias() = w * ha;
    activate(layer, z, act);

    Eigen::VectorXd a_next = act.d0;
    Eigen::MatrixXd ja_next, ha_next;
    if (order >= 1) ja_next = act.d1.asDiagonal() * rec.jz;
    if (order >= 2) {
      ha_next.resize(layer.out, m * m);
      for (Eigen::Index k = 0; k < m; ++k) {
        for (Eigen::Index l = 0; l < m; ++l) {
          ha_next.col(k * m + l) = act.d2.cwiseProduct(rec.jz.col(k)).cwiseProduct(rec.jz.col(l)) +
                                   act.d1.cwiseProduct(rec.hz.col(k * m + l));
        }
      }
    }
    rec.a = std::move(a);
    rec.ja = std::move(ja);
    rec.ha = std::move(ha);
    rec.d1 = act.d1;
    rec.d2 = act.d2;
    rec.d3 = act.d3;
    records_.push_back(std::move(rec));
    a = std::move(a_next);
    ja = std::move(ja_next);
    ha = std::move(ha_next);
  }

  output_.order = order;
  output_.value = std::move(a);
  output_.jac = order >= 1 ? std::move(ja) : Eigen::MatrixXd::Zero(output_.value.size(), m);
  if (order >= 2) output_.hess = std::move(ha);
}

void EncoderTape::backward(const DerivativeBundle& cotangent, std::span<double> grad) const {
  const EncoderArch& arch = *arch_;
  if (static_cast<int>(grad.size()) != arch.param_count()) {
    throw DimensionMismatch("encoder backward: gradient buffer has wrong length");
  }
  if (cotangent.features() != output_.features()) {
    throw DimensionMismatch("encoder backward: cotangent has " +
                            std::to_string(cotangent.features()) + " features, output has " +
                            std::to_string(output_.features()));
  }
  if (cotangent.order > order_) {
    throw DimensionMismatch("encoder backward: cotangent order exceeds recorded order");
  }
  const Eigen::Index m = arch.input_dim;
  const int order = order_;
  DerivativeBundle cot = widen(cotangent, m, order);
  Eigen::VectorXd ca = std::move(cot.value);
  Eigen::MatrixXd cja = std::move(cot.jac);
  Eigen::MatrixXd cha = std::move(cot.hess);

  // Per-layer parameter offsets.
  std::vector<std::size_t> offsets(arch.layers.size());
  std::size_t offset = 0;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    offsets[i] = offset;
    offset += static_cast<std::size_t>(arch.layers[i].out * arch.layers[i].in + arch.layers[i].out);
  }

  for (std::size_t li = arch.layers.size(); li-- > 0;) {
    const LayerSpec& layer = arch.layers[li];
    const LayerRecord& rec = records_[li];
    RowMajorMap w(params_.data() + offsets[li], layer.out, layer.in);
    RowMajorMutMap gw(grad.data() + offsets[li], layer.out, layer.in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets[li] + layer.out * layer.in, layer.out);

    Eigen::VectorXd zbar = ca.cwiseProduct(rec.d1);
    Eigen::MatrixXd jzbar, hzbar;
    if (order >= 1) {
      jzbar = rec.d1.asDiagonal() * cja;
      for (Eigen::Index k = 0; k < m; ++k) zbar += cja.col(k).cwiseProduct(rec.d2).cwiseProduct(rec.jz.col(k));
    }
    if (order >= 2) {
      hzbar = rec.d1.asDiagonal() * cha;
      for (Eigen::Index k = 0; k < m; ++k) {
        for (Eigen::Index l = 0; l < m; ++l) {
          const auto hbar = cha.col(k * m + l);
          zbar += hbar.cwiseProduct(rec.d3.cwiseProduct(rec.jz.col(k)).cwiseProduct(rec.jz.col(l)) +
                                    rec.d2.cwiseProduct(rec.hz.col(k * m + l)));
          jzbar.col(k) += (hbar + cha.col(l * m + k)).cwiseProduct(rec.d2).cwiseProduct(rec.jz.col(l));
        }
      }
    }

    gw.noalias() += zbar * rec.a.transpose();
    if (order >= 1) gw.noalias() += jzbar * rec.ja.transpose();
    if (order >= 2) gw.noalias() += hzbar * rec.ha.transpose();
    gb += zbar;

    if (li == 0) break;
    ca.noalias() = w.transpose() * zbar;
    if (order >= 1) cja.noalias() = w.transpose() * jzbar;
    if (order >= 2) cha.noalias() = w.transpose() * hzbar;
  }
}

DerivativeBundle encoder_eval(const EncoderArch& arch, std::span<const double> params,
                              const Point& x, int order) {
  EncoderTape tape(arch, params, x, order);
  return tape.output();
}

DerivativeBundle encoder_eval(const EncoderParams& enc, const Point& x, int order) {
  return encoder_eval(enc.arch, enc.flat, x, order);
}

ParamCotangent encoder_param_grad(const EncoderArch& arch, std::span<const double> params,
                                  const Point& x, int order, const DerivativeBundle& cotangent) {
  EncoderTape tape(arch, params, x, order);
  ParamCotangent grad(static_cast<std::size_t>(arch.param_count()), 0.0);
  tape.backward(cotangent, grad);
  return grad;
}

ParamCotangent encoder_param_grad(const EncoderParams& enc, const Point& x, int order,
                                  const DerivativeBundle& cotangent) {
  return encoder_param_grad(enc.arch, enc.flat, x, order, cotangent);
}

std::vector<double> fd_gradient(const ScalarFunction& f, const std::vector<double>& at) {
  std::vector<double> g(at.size());
  std::vector<double> probe = at;
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::abs(at[i]));
    probe[i] = at[i] + h;
    const double fp = f(probe);
    probe[i] = at[i] - h;
    const double fm = f(probe);
    probe[i] = at[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double fd_check(const ScalarFunction& f, const std::vector<double>& at,
                const std::vector<double>& analytic, double floor) {
  if (analytic.size() != at.size()) throw DimensionMismatch("fd_check: gradient length mismatch");
  const std::vector<double> fd = fd_gradient(f, at);
  double worst = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double err = std::abs(fd[i] - analytic[i]) / (std::abs(fd[i]) + std::abs(analytic[i]) + floor);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace cnf
