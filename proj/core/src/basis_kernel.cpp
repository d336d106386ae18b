#include "basis_internal.hpp"
#include "cnf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cnf {

using detail::GaussTerms;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<int> all_indices(int n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

void check_anchors(const std::vector<Point>& anchors, int dims, const std::string& who) {
  for (const auto& a : anchors) {
    if (a.size() != dims) throw DimensionMismatch(who + ": anchor dimension does not match the encoder input");
    if (!a.allFinite()) throw NonFiniteValue(who + ": anchor is not finite");
  }
}

// Gaussian terms for feature difference δ = a − φ(x) with feature bundle phi.
GaussTerms gauss_terms(const VectorXd& delta, const DerivativeBundle& phi, int order, double w) {
  const Index m = phi.dims();
  GaussTerms t;
  t.q = delta.squaredNorm();
  t.psi = detail::gauss_exp(w * t.q);
  if (order >= 1) t.q1 = -2.0 * (phi.jac.transpose() * delta);
  if (order >= 2) {
    t.q2 = -2.0 * (phi.hess.transpose() * delta);
    const MatrixXd g = phi.jac.transpose() * phi.jac;
    for (Index k = 0; k < m; ++k) {
      for (Index l = 0; l < m; ++l) t.q2[k * m + l] += 2.0 * g(k, l);
    }
  }
  return t;
}

double gauss_w(double s) { return 1.0 / (2.0 * s * s); }

// Rows a_idx[j] − φ of the anchor feature matrix.
MatrixXd gather_delta(const MatrixXd& anchor_features, std::span<const int> idx, const VectorXd& phi) {
  const Index k = static_cast<Index>(idx.size());
  bool all = k == anchor_features.rows();
  for (Index j = 0; all && j < k; ++j) all = idx[static_cast<std::size_t>(j)] == j;
  if (all) return anchor_features.rowwise() - phi.transpose();
  MatrixXd delta(k, anchor_features.cols());
  for (Index j = 0; j < k; ++j) delta.row(j) = anchor_features.row(idx[static_cast<std::size_t>(j)]) - phi.transpose();
  return delta;
}

}  // namespace

// ---------------------------------------------------------------- KernelBasis

DerivativeBundle KernelBasis::eval_all(const Point& x, int order) const {
  const auto idx = all_indices(size());
  return eval_subset(x, order, idx);
}

void KernelBasis::param_grad(std::span<const GradItem> items, std::span<double> grad) const {
  if (grad.size() != params().size()) throw DimensionMismatch(kind() + ": gradient buffer has wrong length");
  std::vector<KernelCotangent> cots;
  cots.reserve(items.size());
  for (const auto& item : items) {
    check_query(item.x, item.order);
    if (item.feature_weights.size() != size()) throw DimensionMismatch(kind() + ": feature weights length");
    KernelCotangent kc;
    kc.x = item.x;
    kc.order = item.order;
    kc.cot = detail::expand_item(item, input_dim(), {});
    cots.push_back(std::move(kc));
  }
  backprop(cots, grad);
}

double KernelBasis::kernel_scale() const {
  const int i = log_scale_index();
  return i < 0 ? 1.0 : std::exp(params()[static_cast<std::size_t>(i)]);
}

std::vector<char> KernelBasis::trainable_mask() const {
  std::vector<char> mask(params().size(), 1);
  const int i = log_scale_index();
  if (i >= 0 && !train_scale_) mask[static_cast<std::size_t>(i)] = 0;
  return mask;
}

// -------------------------------------------------------- GaussianKernelBasis

GaussianKernelBasis::GaussianKernelBasis(EncoderArch arch, std::vector<double> encoder_params,
                                         std::vector<Point> anchors, double kernel_scale)
    : arch_(std::move(arch)) {
  arch_.validate();
  if (static_cast<int>(encoder_params.size()) != arch_.param_count()) {
    throw ArchMismatch("gaussian_kernel: encoder parameter count does not match architecture");
  }
  if (!(kernel_scale > 0.0)) throw BadConfig("gaussian_kernel: kernel scale must be positive");
  check_anchors(anchors, arch_.input_dim, "gaussian_kernel");
  anchors_ = std::move(anchors);
  params_ = std::move(encoder_params);
  params_.push_back(std::log(kernel_scale));
  refresh();
}

void GaussianKernelBasis::refresh() {
  const std::span<const double> enc(params_.data(), static_cast<std::size_t>(arch_.param_count()));
  anchor_features_.resize(static_cast<Index>(anchors_.size()), arch_.output_dim());
  for (std::size_t c = 0; c < anchors_.size(); ++c) {
    anchor_features_.row(static_cast<Index>(c)) = encoder_eval(arch_, enc, anchors_[c], 0).value.transpose();
  }
}

DerivativeBundle GaussianKernelBasis::eval_subset(const Point& x, int order, std::span<const int> idx) const {
  check_query(x, order);
  for (int i : idx) check_index(i);
  const std::span<const double> enc(params_.data(), static_cast<std::size_t>(arch_.param_count()));
  const DerivativeBundle phi = encoder_eval(arch_, enc, x, order);
  const double w = gauss_w(kernel_scale());
  const Index k = static_cast<Index>(idx.size());
  const Index m = input_dim();

  const MatrixXd delta = gather_delta(anchor_features_, idx, phi.value);

  DerivativeBundle out = DerivativeBundle::zeros(k, m, order);
  const VectorXd q = delta.rowwise().squaredNorm();
  const VectorXd psi = q.unaryExpr([w](double v) { return detail::gauss_exp(w * v); });
  out.value = psi;
  if (order == 0) return out;

  const MatrixXd q1 = -2.0 * delta * phi.jac;  // k×M
  for (Index c = 0; c < m; ++c) out.jac.col(c) = -w * psi.cwiseProduct(q1.col(c));
  if (order == 1) return out;

  MatrixXd q2 = -2.0 * delta * phi.hess;  // k×M²
  const MatrixXd g = phi.jac.transpose() * phi.jac;
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < m; ++b) {
      q2.col(a * m + b).array() += 2.0 * g(a, b);
      out.hess.col(a * m + b) =
          psi.cwiseProduct((w * w * q1.col(a).cwiseProduct(q1.col(b)) - w * q2.col(a * m + b)));
    }
  }
  return out;
}

void GaussianKernelBasis::backprop(std::span<const KernelCotangent> items, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw DimensionMismatch("gaussian_kernel: gradient buffer has wrong length");
  const std::size_t np = static_cast<std::size_t>(arch_.param_count());
  const std::span<const double> enc(params_.data(), np);
  const std::span<double> enc_grad = grad.first(np);
  const double w = gauss_w(kernel_scale());
  const Index m = input_dim();
  const Index nf = arch_.output_dim();
  MatrixXd anchor_bar = MatrixXd::Zero(size(), nf);
  std::vector<char> touched(static_cast<std::size_t>(size()), 0);
  double wbar = 0.0;

  for (const auto& item : items) {
    check_query(item.x, item.order);
    const std::vector<int> idx = item.idx.empty() ? all_indices(size()) : item.idx;
    const Index k = static_cast<Index>(idx.size());
    if (item.cot.features() != k) throw DimensionMismatch("gaussian_kernel: cotangent feature count");
    const int order = std::min(item.order, item.cot.order);
    EncoderTape tape(arch_, enc, item.x, order);
    const DerivativeBundle& phi = tape.output();

    const MatrixXd delta = gather_delta(anchor_features_, idx, phi.value);
    MatrixXd q1 = order >= 1 ? MatrixXd(-2.0 * delta * phi.jac) : MatrixXd();
    MatrixXd q2;
    if (order >= 2) {
      q2 = -2.0 * delta * phi.hess;
      const MatrixXd g = phi.jac.transpose() * phi.jac;
      for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < m; ++b) q2.col(a * m + b).array() += 2.0 * g(a, b);
    }

    VectorXd qbar(k);
    MatrixXd q1bar = MatrixXd::Zero(k, m);
    MatrixXd q2bar = MatrixXd::Zero(k, m * m);
    if (order == 0) {
      // Value-only rows: ψ̄ is the cotangent itself, so the loop reduces to vector ops.
      const VectorXd q = delta.rowwise().squaredNorm();
      const VectorXd psi = q.unaryExpr([w](double v) { return detail::gauss_exp(w * v); });
      const VectorXd pb = psi.cwiseProduct(item.cot.value.head(k));
      qbar = -w * pb;
      wbar -= q.dot(pb);
    }
    for (Index j = 0; j < k && order > 0; ++j) {
      GaussTerms t;
      t.q = delta.row(j).squaredNorm();
      t.psi = detail::gauss_exp(w * t.q);
      if (order >= 1) t.q1 = q1.row(j).transpose();
      if (order >= 2) t.q2 = q2.row(j).transpose();
      const auto r = detail::gauss_reverse(w, t, order, m, item.cot, j);
      qbar[j] = r.qbar;
      if (order >= 1) q1bar.row(j) = r.q1bar.transpose();
      if (order >= 2) q2bar.row(j) = r.q2bar.transpose();
      wbar += r.wbar;
    }

    // δ̄ = 2 q̄ δ − 2 Q̄1 Jᵀ − 2 Q̄2 Hᵀ
    MatrixXd dbar = 2.0 * qbar.asDiagonal() * delta;
    DerivativeBundle phibar = DerivativeBundle::zeros(nf, m, order);
    if (order >= 1) {
      dbar.noalias() -= 2.0 * q1bar * phi.jac.transpose();
      phibar.jac.noalias() = -2.0 * delta.transpose() * q1bar;
    }
    if (order >= 2) {
      dbar.noalias() -= 2.0 * q2bar * phi.hess.transpose();
      phibar.hess.noalias() = -2.0 * delta.transpose() * q2bar;
      const VectorXd colsum = q2bar.colwise().sum().transpose();
      MatrixXd t(m, m);
      for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < m; ++b) t(a, b) = colsum[a * m + b] + colsum[b * m + a];
      phibar.jac.noalias() += 2.0 * phi.jac * t;
    }
    phibar.value = -dbar.colwise().sum().transpose();
    tape.backward(phibar, enc_grad);

    if (item.idx.empty()) {
      anchor_bar += dbar;
      std::fill(touched.begin(), touched.end(), 1);
      continue;
    }
    for (Index j = 0; j < k; ++j) {
      const int c = idx[static_cast<std::size_t>(j)];
      anchor_bar.row(c) += dbar.row(j);
      touched[static_cast<std::size_t>(c)] = 1;
    }
  }

  for (int c = 0; c < size(); ++c) {
    if (!touched[static_cast<std::size_t>(c)]) continue;
    EncoderTape tape(arch_, enc, anchors_[static_cast<std::size_t>(c)], 0);
    DerivativeBundle cot = DerivativeBundle::zeros(nf, m, 0);
    cot.value = anchor_bar.row(c).transpose();
    tape.backward(cot, enc_grad);
  }
  grad[np] += wbar * (-2.0 * w);
}

std::unique_ptr<BasisFamily> GaussianKernelBasis::clone() const {
  return std::make_unique<GaussianKernelBasis>(*this);
}

// ------------------------------------------------------ DotProductKernelBasis

DotProductKernelBasis::DotProductKernelBasis(EncoderArch arch, std::vector<double> encoder_params,
                                             std::vector<Point> anchors)
    : arch_(std::move(arch)) {
  arch_.validate();
  if (static_cast<int>(encoder_params.size()) != arch_.param_count()) {
    throw ArchMismatch("dot_kernel: encoder parameter count does not match architecture");
  }
  check_anchors(anchors, arch_.input_dim, "dot_kernel");
  anchors_ = std::move(anchors);
  params_ = std::move(encoder_params);
  refresh();
}

void DotProductKernelBasis::refresh() {
  anchor_features_.resize(static_cast<Index>(anchors_.size()), arch_.output_dim());
  for (std::size_t c = 0; c < anchors_.size(); ++c) {
    anchor_features_.row(static_cast<Index>(c)) = encoder_eval(arch_, params_, anchors_[c], 0).value.transpose();
  }
}

DerivativeBundle DotProductKernelBasis::eval_subset(const Point& x, int order, std::span<const int> idx) const {
  check_query(x, order);
  for (int i : idx) check_index(i);
  const DerivativeBundle phi = encoder_eval(arch_, params_, x, order);
  const Index k = static_cast<Index>(idx.size());
  MatrixXd a(k, phi.features());
  for (Index j = 0; j < k; ++j) a.row(j) = anchor_features_.row(idx[static_cast<std::size_t>(j)]);
  DerivativeBundle out = DerivativeBundle::zeros(k, input_dim(), order);
  out.value = a * phi.value;
  if (order >= 1) out.jac = a * phi.jac;
  if (order >= 2) out.hess = a * phi.hess;
  return out;
}

void DotProductKernelBasis::backprop(std::span<const KernelCotangent> items, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw DimensionMismatch("dot_kernel: gradient buffer has wrong length");
  const Index m = input_dim();
  const Index nf = arch_.output_dim();
  MatrixXd anchor_bar = MatrixXd::Zero(size(), nf);
  std::vector<char> touched(static_cast<std::size_t>(size()), 0);
  for (const auto& item : items) {
    check_query(item.x, item.order);
    const std::vector<int> idx = item.idx.empty() ? all_indices(size()) : item.idx;
    const Index k = static_cast<Index>(idx.size());
    if (item.cot.features() != k) throw DimensionMismatch("dot_kernel: cotangent feature count");
    const int order = std::min(item.order, item.cot.order);
    EncoderTape tape(arch_, params_, item.x, order);
    const DerivativeBundle& phi = tape.output();
    MatrixXd a(k, nf);
    for (Index j = 0; j < k; ++j) a.row(j) = anchor_features_.row(idx[static_cast<std::size_t>(j)]);
    DerivativeBundle phibar = DerivativeBundle::zeros(nf, m, order);
    phibar.value = a.transpose() * item.cot.value;
    MatrixXd abar = item.cot.value * phi.value.transpose();
    if (order >= 1) {
      phibar.jac = a.transpose() * item.cot.jac;
      abar.noalias() += item.cot.jac * phi.jac.transpose();
    }
    if (order >= 2) {
      phibar.hess = a.transpose() * item.cot.hess;
      abar.noalias() += item.cot.hess * phi.hess.transpose();
    }
    tape.backward(phibar, grad);
    for (Index j = 0; j < k; ++j) {
      const int c = idx[static_cast<std::size_t>(j)];
      anchor_bar.row(c) += abar.row(j);
      touched[static_cast<std::size_t>(c)] = 1;
    }
  }
  for (int c = 0; c < size(); ++c) {
    if (!touched[static_cast<std::size_t>(c)]) continue;
    EncoderTape tape(arch_, params_, anchors_[static_cast<std::size_t>(c)], 0);
    DerivativeBundle cot = DerivativeBundle::zeros(nf, m, 0);
    cot.value = anchor_bar.row(c).transpose();
    tape.backward(cot, grad);
  }
}

std::unique_ptr<BasisFamily> DotProductKernelBasis::clone() const {
  return std::make_unique<DotProductKernelBasis>(*this);
}

// ---------------------------------------------------------- hypernet helpers

EncoderParams hypernet_generate(const EncoderArch& hyper_arch, std::span<const double> hyper_params,
                                const Point& condition, const EncoderArch& target) {
  if (hyper_arch.output_dim() != target.param_count()) {
    throw ArchMismatch("hypernet: output length " + std::to_string(hyper_arch.output_dim()) +
                       " does not match target parameter count " + std::to_string(target.param_count()));
  }
  if (static_cast<int>(hyper_params.size()) != hyper_arch.param_count()) {
    throw ArchMismatch("hypernet: parameter count does not match architecture");
  }
  const VectorXd flat = encoder_eval(hyper_arch, hyper_params, condition, 0).value;
  return EncoderParams{target, std::vector<double>(flat.data(), flat.data() + flat.size())};
}

EncoderParams hypernet_generate(const EncoderParams& hyper, const Point& condition, const EncoderArch& target) {
  return hypernet_generate(hyper.arch, hyper.flat, condition, target);
}

// -------------------------------------------------------- HypernetKernelBasis

HypernetKernelBasis::HypernetKernelBasis(EncoderArch target, EncoderArch hyper, std::vector<double> hyper_params,
                                         std::vector<Point> anchors, int slot_count, double kernel_scale)
    : target_(std::move(target)), hyper_(std::move(hyper)), slot_count_(slot_count) {
  target_.validate();
  hyper_.validate();
  if (hyper_.output_dim() != target_.param_count()) {
    throw ArchMismatch("hypernet_kernel: hypernet output does not match target parameter count");
  }
  if (hyper_.input_dim != target_.input_dim + slot_count_) {
    throw ArchMismatch("hypernet_kernel: hypernet input must be anchor dimension plus slot count");
  }
  if (static_cast<int>(hyper_params.size()) != hyper_.param_count()) {
    throw ArchMismatch("hypernet_kernel: hypernet parameter count does not match architecture");
  }
  if (!(kernel_scale > 0.0)) throw BadConfig("hypernet_kernel: kernel scale must be positive");
  check_anchors(anchors, target_.input_dim, "hypernet_kernel");
  anchors_ = std::move(anchors);
  slots_ = anchor_slots(anchors_);
  for (int s : slots_) {
    if (s >= slot_count_) throw BadConfig("hypernet_kernel: anchor repeated more often than slot_count");
  }
  params_ = std::move(hyper_params);
  params_.push_back(std::log(kernel_scale));
  refresh();
}

Point HypernetKernelBasis::condition(int c) const {
  check_index(c);
  Point v = Point::Zero(target_.input_dim + slot_count_);
  v.head(target_.input_dim) = anchors_[static_cast<std::size_t>(c)];
  v[target_.input_dim + slots_[static_cast<std::size_t>(c)]] = 1.0;
  return v;
}

std::span<const double> HypernetKernelBasis::generated(int c) const {
  check_index(c);
  return {generated_.data() + static_cast<std::ptrdiff_t>(c) * generated_.cols(),
          static_cast<std::size_t>(generated_.cols())};
}

void HypernetKernelBasis::refresh() {
  const std::span<const double> hp(params_.data(), static_cast<std::size_t>(hyper_.param_count()));
  const Index n = static_cast<Index>(anchors_.size());
  generated_.resize(n, target_.param_count());
  anchor_features_.assign(anchors_.size(), VectorXd());
  for (Index c = 0; c < n; ++c) {
    generated_.row(c) = encoder_eval(hyper_, hp, condition(static_cast<int>(c)), 0).value.transpose();
  }
  for (Index c = 0; c < n; ++c) {
    anchor_features_[static_cast<std::size_t>(c)] =
        encoder_eval(target_, generated(static_cast<int>(c)), anchors_[static_cast<std::size_t>(c)], 0).value;
  }
}

DerivativeBundle HypernetKernelBasis::eval_subset(const Point& x, int order, std::span<const int> idx) const {
  check_query(x, order);
  for (int i : idx) check_index(i);
  const double w = gauss_w(kernel_scale());
  const Index m = input_dim();
  const Index k = static_cast<Index>(idx.size());
  DerivativeBundle out = DerivativeBundle::zeros(k, m, order);
  for (Index j = 0; j < k; ++j) {
    const int c = idx[static_cast<std::size_t>(j)];
    const DerivativeBundle phi = encoder_eval(target_, generated(c), x, order);
    const VectorXd delta = anchor_features_[static_cast<std::size_t>(c)] - phi.value;
    detail::gauss_forward(w, gauss_terms(delta, phi, order, w), order, m, out, j);
  }
  return out;
}

void HypernetKernelBasis::backprop(std::span<const KernelCotangent> items, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw DimensionMismatch("hypernet_kernel: gradient buffer has wrong length");
  const std::size_t nh = static_cast<std::size_t>(hyper_.param_count());
  const Index np = target_.param_count();
  const Index m = input_dim();
  const Index nf = target_.output_dim();
  const double w = gauss_w(kernel_scale());
  MatrixXd gen_bar = MatrixXd::Zero(np, size());  // column c: cotangent on generated(c)
  MatrixXd anchor_bar = MatrixXd::Zero(nf, size());
  std::vector<char> touched(static_cast<std::size_t>(size()), 0);
  double wbar = 0.0;

  for (const auto& item : items) {
    check_query(item.x, item.order);
    const std::vector<int> idx = item.idx.empty() ? all_indices(size()) : item.idx;
    if (item.cot.features() != static_cast<Index>(idx.size())) {
      throw DimensionMismatch("hypernet_kernel: cotangent feature count");
    }
    const int order = std::min(item.order, item.cot.order);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const int c = idx[j];
      EncoderTape tape(target_, generated(c), item.x, order);
      const DerivativeBundle& phi = tape.output();
      const VectorXd delta = anchor_features_[static_cast<std::size_t>(c)] - phi.value;
      const GaussTerms t = gauss_terms(delta, phi, order, w);
      const auto r = detail::gauss_reverse(w, t, order, m, item.cot, static_cast<Index>(j));
      wbar += r.wbar;

      VectorXd dbar = 2.0 * r.qbar * delta;
      DerivativeBundle phibar = DerivativeBundle::zeros(nf, m, order);
      if (order >= 1) {
        dbar.noalias() -= 2.0 * phi.jac * r.q1bar;
        phibar.jac.noalias() = -2.0 * delta * r.q1bar.transpose();
      }
      if (order >= 2) {
        dbar.noalias() -= 2.0 * phi.hess * r.q2bar;
        phibar.hess.noalias() = -2.0 * delta * r.q2bar.transpose();
        MatrixXd tt(m, m);
        for (Index a = 0; a < m; ++a)
          for (Index b = 0; b < m; ++b) tt(a, b) = r.q2bar[a * m + b] + r.q2bar[b * m + a];
        phibar.jac.noalias() += 2.0 * phi.jac * tt;
      }
      phibar.value = -dbar;
      tape.backward(phibar, std::span<double>(gen_bar.col(c).data(), static_cast<std::size_t>(np)));
      anchor_bar.col(c) += dbar;
      touched[static_cast<std::size_t>(c)] = 1;
    }
  }

  const std::span<const double> hp(params_.data(), nh);
  for (int c = 0; c < size(); ++c) {
    if (!touched[static_cast<std::size_t>(c)]) continue;
    EncoderTape anchor_tape(target_, generated(c), anchors_[static_cast<std::size_t>(c)], 0);
    DerivativeBundle cot = DerivativeBundle::zeros(nf, m, 0);
    cot.value = anchor_bar.col(c);
    anchor_tape.backward(cot, std::span<double>(gen_bar.col(c).data(), static_cast<std::size_t>(np)));

    EncoderTape hyper_tape(hyper_, hp, condition(c), 0);
    DerivativeBundle hcot = DerivativeBundle::zeros(np, hyper_.input_dim, 0);
    hcot.value = gen_bar.col(c);
    hyper_tape.backward(hcot, grad.first(nh));
  }
  grad[nh] += wbar * (-2.0 * w);
}

std::unique_ptr<BasisFamily> HypernetKernelBasis::clone() const {
  return std::make_unique<HypernetKernelBasis>(*this);
}

// ---------------------------------------------------------- HybridKernelBasis

HybridKernelBasis::HybridKernelBasis(std::unique_ptr<KernelBasis> inner, double sigma, double fallback_value)
    : inner_(std::move(inner)), sigma_(sigma), fallback_(fallback_value) {
  if (!inner_) throw BadConfig("hybrid_kernel: missing inner kernel");
  if (!(sigma_ > 0.0)) throw BadConfig("hybrid_kernel: sigma must be positive");
}

HybridKernelBasis::HybridKernelBasis(const HybridKernelBasis& other)
    : BasisFamily(other),
      inner_(static_cast<KernelBasis*>(other.inner_->clone().release())),
      sigma_(other.sigma_),
      fallback_(other.fallback_) {}

std::vector<int> HybridKernelBasis::supported(const Point& x) const {
  const double r2 = 9.0 * sigma_ * sigma_;
  std::vector<int> out;
  const auto& an = inner_->anchors();
  for (std::size_t c = 0; c < an.size(); ++c) {
    if ((an[c] - x).squaredNorm() < r2) out.push_back(static_cast<int>(c));
  }
  return out;
}

namespace {

// Truncated Gaussian exp(−‖d‖²/(2σ²)) and its derivatives, d = x − x_c.
struct TruncTerms {
  double g = 0.0;
  VectorXd gk;
  VectorXd gkl;
};

TruncTerms trunc_terms(const VectorXd& d, double sigma, int order) {
  const Index m = d.size();
  const double s2 = sigma * sigma;
  TruncTerms t;
  t.g = std::exp(-d.squaredNorm() / (2.0 * s2));
  if (order >= 1) t.gk = -t.g * d / s2;
  if (order >= 2) {
    t.gkl.resize(m * m);
    for (Index k = 0; k < m; ++k)
      for (Index l = 0; l < m; ++l) t.gkl[k * m + l] = t.g * (d[k] * d[l] / (s2 * s2) - (k == l ? 1.0 / s2 : 0.0));
  }
  return t;
}

}  // namespace

DerivativeBundle HybridKernelBasis::eval_subset(const Point& x, int order, std::span<const int> idx) const {
  check_query(x, order);
  for (int i : idx) check_index(i);
  const Index m = input_dim();
  const Index k = static_cast<Index>(idx.size());
  const double r2 = 9.0 * sigma_ * sigma_;
  const auto& an = inner_->anchors();
  std::vector<int> inside;
  std::vector<Index> pos;
  for (Index j = 0; j < k; ++j) {
    const int c = idx[static_cast<std::size_t>(j)];
    if ((an[static_cast<std::size_t>(c)] - x).squaredNorm() < r2) {
      inside.push_back(c);
      pos.push_back(j);
    }
  }
  DerivativeBundle out = DerivativeBundle::zeros(k, m, order);
  if (inside.empty()) return out;
  const DerivativeBundle kb = inner_->eval_subset(x, order, inside);
  for (std::size_t s = 0; s < inside.size(); ++s) {
    const Index j = pos[s];
    const Index r = static_cast<Index>(s);
    const TruncTerms t = trunc_terms(x - an[static_cast<std::size_t>(inside[s])], sigma_, order);
    out.value[j] = kb.value[r] * t.g;
    if (order >= 1) {
      for (Index a = 0; a < m; ++a) out.jac(j, a) = kb.jac(r, a) * t.g + kb.value[r] * t.gk[a];
    }
    if (order >= 2) {
      for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < m; ++b)
          out.hess(j, a * m + b) = kb.hess(r, a * m + b) * t.g + kb.jac(r, a) * t.gk[b] + kb.jac(r, b) * t.gk[a] +
                                   kb.value[r] * t.gkl[a * m + b];
    }
  }
  return out;
}

DerivativeBundle HybridKernelBasis::eval_all(const Point& x, int order) const {
  const auto idx = all_indices(size());
  return eval_subset(x, order, idx);
}

void HybridKernelBasis::param_grad(std::span<const GradItem> items, std::span<double> grad) const {
  if (grad.size() != params().size()) throw DimensionMismatch("hybrid_kernel: gradient buffer has wrong length");
  const Index m = input_dim();
  const auto& an = inner_->anchors();
  std::vector<KernelCotangent> cots;
  for (const auto& item : items) {
    check_query(item.x, item.order);
    if (item.feature_weights.size() != size()) throw DimensionMismatch("hybrid_kernel: feature weights length");
    KernelCotangent kc;
    kc.x = item.x;
    kc.order = item.order;
    for (int c : supported(item.x)) {
      if (item.feature_weights[c] != 0.0) kc.idx.push_back(c);
    }
    if (kc.idx.empty()) continue;
    const DerivativeBundle cot = detail::expand_item(item, m, kc.idx);
    const int order = item.order;
    kc.cot = DerivativeBundle::zeros(cot.features(), m, order);
    for (std::size_t s = 0; s < kc.idx.size(); ++s) {
      const Index r = static_cast<Index>(s);
      const TruncTerms t = trunc_terms(item.x - an[static_cast<std::size_t>(kc.idx[s])], sigma_, order);
      double vbar = cot.value[r] * t.g;
      if (order >= 1) {
        for (Index a = 0; a < m; ++a) {
          vbar += cot.jac(r, a) * t.gk[a];
          kc.cot.jac(r, a) = cot.jac(r, a) * t.g;
        }
      }
      if (order >= 2) {
        for (Index a = 0; a < m; ++a) {
          for (Index b = 0; b < m; ++b) {
            const double hb = cot.hess(r, a * m + b);
            vbar += hb * t.gkl[a * m + b];
            kc.cot.jac(r, a) += hb * t.gk[b];
            kc.cot.jac(r, b) += hb * t.gk[a];
            kc.cot.hess(r, a * m + b) = hb * t.g;
          }
        }
      }
      kc.cot.value[r] = vbar;
    }
    cots.push_back(std::move(kc));
  }
  if (!cots.empty()) inner_->backprop(cots, grad);
}

std::unique_ptr<BasisFamily> HybridKernelBasis::clone() const {
  return std::make_unique<HybridKernelBasis>(*this);
}

}  // namespace cnf
