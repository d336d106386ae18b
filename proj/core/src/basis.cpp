#include "cnf/basis.hpp"

#include "basis_internal.hpp"
#include "cnf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace cnf {

namespace detail {

DerivativeBundle expand_item(const GradItem& item, Eigen::Index dims, std::span<const int> idx) {
  const Eigen::Index k = idx.empty() ? item.feature_weights.size() : static_cast<Eigen::Index>(idx.size());
  Eigen::VectorXd w(k);
  if (idx.empty()) {
    w = item.feature_weights;
  } else {
    for (Eigen::Index j = 0; j < k; ++j) w[j] = item.feature_weights[idx[static_cast<std::size_t>(j)]];
  }
  DerivativeBundle out = DerivativeBundle::zeros(k, dims, item.order);
  out.value = w * item.slots[0];
  if (item.order >= 1) out.jac = w * item.slots.segment(1, dims).transpose();
  if (item.order >= 2) out.hess = w * item.slots.segment(1 + dims, dims * dims).transpose();
  return out;
}

SlotWeights bundle_slots(const DerivativeBundle& b, Eigen::Index f) {
  const Eigen::Index m = b.dims();
  SlotWeights s(slot_count(m, b.order));
  s[0] = b.value[f];
  if (b.order >= 1) s.segment(1, m) = b.jac.row(f).transpose();
  if (b.order >= 2) s.segment(1 + m, m * m) = b.hess.row(f).transpose();
  return s;
}

DerivativeBundle select_features(const DerivativeBundle& b, std::span<const int> idx, int width) {
  const Eigen::Index k = static_cast<Eigen::Index>(idx.size()) * width;
  DerivativeBundle out = DerivativeBundle::zeros(k, b.dims(), b.order);
  for (std::size_t j = 0; j < idx.size(); ++j) {
    for (int n = 0; n < width; ++n) {
      const Eigen::Index src = static_cast<Eigen::Index>(idx[j]) * width + n;
      const Eigen::Index dst = static_cast<Eigen::Index>(j) * width + n;
      out.value[dst] = b.value[src];
      if (b.order >= 1) out.jac.row(dst) = b.jac.row(src);
      if (b.order >= 2) out.hess.row(dst) = b.hess.row(src);
    }
  }
  return out;
}

void gauss_forward(double w, const GaussTerms& t, int order, Eigen::Index m, DerivativeBundle& out,
                   Eigen::Index f) {
  out.value[f] = t.psi;
  if (order >= 1) {
    for (Eigen::Index k = 0; k < m; ++k) out.jac(f, k) = -w * t.psi * t.q1[k];
  }
  if (order >= 2) {
    for (Eigen::Index k = 0; k < m; ++k) {
      for (Eigen::Index l = 0; l < m; ++l) {
        out.hess(f, k * m + l) = t.psi * (w * w * t.q1[k] * t.q1[l] - w * t.q2[k * m + l]);
      }
    }
  }
}

GaussReverse gauss_reverse(double w, const GaussTerms& t, int order, Eigen::Index m,
                           const DerivativeBundle& cot, Eigen::Index f) {
  GaussReverse r;
  const double psi = t.psi;
  double psibar = cot.value[f];
  r.q1bar = Eigen::VectorXd::Zero(m);
  r.q2bar = Eigen::VectorXd::Zero(m * m);
  if (order >= 1 && cot.order >= 1) {
    for (Eigen::Index k = 0; k < m; ++k) {
      const double jb = cot.jac(f, k);
      psibar += jb * (-w * t.q1[k]);
      r.q1bar[k] += -w * psi * jb;
      r.wbar += -jb * psi * t.q1[k];
    }
  }
  if (order >= 2 && cot.order >= 2) {
    for (Eigen::Index k = 0; k < m; ++k) {
      for (Eigen::Index l = 0; l < m; ++l) {
        const double hb = cot.hess(f, k * m + l);
        const double qkl = t.q2[k * m + l];
        psibar += hb * (w * w * t.q1[k] * t.q1[l] - w * qkl);
        r.q1bar[k] += hb * psi * w * w * t.q1[l];
        r.q1bar[l] += hb * psi * w * w * t.q1[k];
        r.q2bar[k * m + l] = -w * psi * hb;
        r.wbar += hb * psi * (2.0 * w * t.q1[k] * t.q1[l] - qkl);
      }
    }
  }
  r.qbar = -w * psi * psibar;
  r.wbar += -t.q * psi * psibar;
  return r;
}

}  // namespace detail

void BasisFamily::set_params(std::span<const double> p) {
  if (p.size() != params_.size()) {
    throw DimensionMismatch(kind() + ": expected " + std::to_string(params_.size()) +
                            " parameters, got " + std::to_string(p.size()));
  }
  std::copy(p.begin(), p.end(), params_.begin());
  refresh();
}

std::vector<char> BasisFamily::trainable_mask() const {
  return std::vector<char>(params().size(), 1);
}

void BasisFamily::check_query(const Point& x, int order) const {
  if (order < 0 || order > 2) throw UnsupportedOrder(kind() + ": order must be 0, 1 or 2");
  if (x.size() != input_dim()) {
    throw DimensionMismatch(kind() + ": point has dimension " + std::to_string(x.size()) +
                            ", family expects " + std::to_string(input_dim()));
  }
}

void BasisFamily::check_index(int i) const {
  if (i < 0 || i >= size()) {
    throw IndexOutOfRange(kind() + ": basis index " + std::to_string(i) + " outside [0, " +
                          std::to_string(size()) + ")");
  }
}

DerivativeBundle BasisFamily::eval_subset(const Point& x, int order, std::span<const int> idx) const {
  for (int i : idx) check_index(i);
  return detail::select_features(eval_all(x, order), idx, width());
}

DerivativeBundle BasisFamily::eval(int i, const Point& x, int order) const {
  check_index(i);
  check_query(x, order);
  const int idx[1] = {i};
  return eval_subset(x, order, idx);
}

ParamCotangent BasisFamily::param_grad(int i, const Point& x, int order,
                                       const DerivativeBundle& cotangent) const {
  check_index(i);
  check_query(x, order);
  if (cotangent.features() != width() || cotangent.order > order ||
      cotangent.dims() != input_dim()) {
    throw DimensionMismatch(kind() + ": cotangent shape does not match the basis bundle");
  }
  std::vector<GradItem> items;
  for (int n = 0; n < width(); ++n) {
    GradItem item;
    item.x = x;
    item.order = cotangent.order;
    item.feature_weights = Eigen::VectorXd::Zero(features());
    item.feature_weights[static_cast<Eigen::Index>(i) * width() + n] = 1.0;
    item.slots = detail::bundle_slots(cotangent, n);
    items.push_back(std::move(item));
  }
  ParamCotangent grad(params().size(), 0.0);
  param_grad(items, grad);
  return grad;
}

std::vector<int> anchor_slots(const std::vector<Point>& anchors) {
  std::vector<int> slots(anchors.size(), 0);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (anchors[j].size() == anchors[i].size() && anchors[j] == anchors[i]) ++slots[i];
    }
  }
  return slots;
}

namespace {

EncoderArch kernel_encoder(const BasisConfig& c) {
  return EncoderArch::mlp(c.input_dim, c.hidden, c.features, c.activation, c.output_activation,
                          c.activation_param);
}

EncoderArch scalar_encoder(const BasisConfig& c) {
  return EncoderArch::mlp(c.input_dim, c.hidden, 1, c.activation, Activation::kLinear,
                          c.activation_param);
}

// Hypernet whose output bias is a freshly initialized target encoder, so every
// generated encoder starts near a sensible network and differs by the
// conditioning-dependent term scaled by `gain`.
std::vector<double> init_hypernet(const EncoderArch& hyper, const EncoderArch& target, double gain,
                                  std::mt19937_64& rng) {
  std::vector<double> p = glorot_init(hyper, rng);
  const std::vector<double> base = glorot_init(target, rng);
  const LayerSpec& last = hyper.layers.back();
  const std::size_t w_begin = p.size() - static_cast<std::size_t>(last.out * last.in + last.out);
  const std::size_t b_begin = p.size() - static_cast<std::size_t>(last.out);
  for (std::size_t i = w_begin; i < b_begin; ++i) p[i] *= gain;
  std::copy(base.begin(), base.end(), p.begin() + static_cast<std::ptrdiff_t>(b_begin));
  return p;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw BadConfig(msg);
}

}  // namespace

std::unique_ptr<BasisFamily> init_basis(const BasisConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  require(c.input_dim > 0, "basis: input_dim must be positive");
  for (const auto& a : c.anchors) {
    require(a.size() == c.input_dim, "basis: anchor dimension does not match input_dim");
  }
  const std::string& k = c.kind;
  const bool needs_anchors = k == "gaussian_kernel" || k == "dot_kernel" || k == "hypernet_kernel" ||
                             k == "hybrid_kernel" || k == "skewed_rbf" || k == "rbf";
  if (needs_anchors) require(!c.anchors.empty(), "basis: '" + k + "' needs anchors");

  if (k == "gaussian_kernel" || k == "dot_kernel" || k == "hypernet_kernel" || k == "hybrid_kernel") {
    require(c.features > 0, "basis: features must be positive");
    require(c.kernel_scale > 0.0, "basis: kernel_scale must be positive");
  }

  if (k == "gaussian_kernel") {
    EncoderArch arch = kernel_encoder(c);
    auto p = glorot_init(arch, rng);
    auto b = std::make_unique<GaussianKernelBasis>(arch, std::move(p), c.anchors, c.kernel_scale);
    b->set_train_scale(c.train_scale);
    return b;
  }
  if (k == "dot_kernel") {
    EncoderArch arch = kernel_encoder(c);
    auto p = glorot_init(arch, rng);
    return std::make_unique<DotProductKernelBasis>(arch, std::move(p), c.anchors);
  }
  if (k == "hypernet_kernel") {
    EncoderArch target = kernel_encoder(c);
    const auto slots = anchor_slots(c.anchors);
    const int slot_count =
        c.slot_count > 0 ? c.slot_count : 1 + *std::max_element(slots.begin(), slots.end());
    require(slot_count > *std::max_element(slots.begin(), slots.end()),
            "basis: slot_count is smaller than the anchor multiplicity");
    EncoderArch hyper = EncoderArch::mlp(c.input_dim + slot_count, c.hyper_hidden, target.param_count(),
                                         Activation::kTanh, Activation::kLinear);
    auto p = init_hypernet(hyper, target, c.hyper_gain, rng);
    auto b = std::make_unique<HypernetKernelBasis>(target, hyper, std::move(p), c.anchors, slot_count,
                                                   c.kernel_scale);
    b->set_train_scale(c.train_scale);
    return b;
  }
  if (k == "hybrid_kernel") {
    require(c.sigma > 0.0, "basis: sigma must be positive");
    BasisConfig inner = c;
    inner.kind = c.inner;
    require(inner.kind == "gaussian_kernel" || inner.kind == "hypernet_kernel",
            "basis: hybrid inner kernel must be gaussian_kernel or hypernet_kernel");
    auto fam = init_basis(inner, seed);
    std::unique_ptr<KernelBasis> kernel(static_cast<KernelBasis*>(fam.release()));
    return std::make_unique<HybridKernelBasis>(std::move(kernel), c.sigma, c.fallback_value);
  }
  if (k == "skewed_rbf" || k == "rbf") {
    require(c.bandwidth > 0.0, "basis: bandwidth must be positive");
    return std::make_unique<SkewedRBFBasis>(c.anchors, c.bandwidth, k == "rbf");
  }
  if (k == "polynomial") {
    require(c.count > 0 && c.channels > 0, "basis: polynomial needs count and channels");
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> coeffs(static_cast<std::size_t>(c.count * c.channels * 3));
    for (auto& v : coeffs) v = dist(rng);
    return std::make_unique<PolynomialBasis>(c.count, c.channels, std::move(coeffs));
  }
  if (k == "independent") {
    require(c.count > 0, "basis: independent needs count");
    EncoderArch arch = scalar_encoder(c);
    std::vector<double> p;
    for (int i = 0; i < c.count; ++i) {
      auto one = glorot_init(arch, rng);
      p.insert(p.end(), one.begin(), one.end());
    }
    return std::make_unique<IndependentBasis>(arch, c.count, std::move(p));
  }
  if (k == "constraint_layer") {
    require(c.count > 0, "basis: constraint_layer needs count");
    EncoderArch arch = EncoderArch::mlp(c.input_dim, c.hidden, c.count, c.activation,
                                        c.output_activation, c.activation_param);
    auto p = glorot_init(arch, rng);
    return std::make_unique<ConstraintLayerBasis>(arch, std::move(p));
  }
  if (k == "hypernet") {
    require(c.count > 0, "basis: hypernet needs count");
    EncoderArch target = scalar_encoder(c);
    EncoderArch hyper = EncoderArch::mlp(c.count, c.hyper_hidden, target.param_count(),
                                         Activation::kTanh, Activation::kLinear);
    auto p = init_hypernet(hyper, target, c.hyper_gain, rng);
    return std::make_unique<HypernetBasis>(target, hyper, std::move(p));
  }
  throw BadConfig("basis: unknown kind '" + k + "'");
}

}  // namespace cnf
