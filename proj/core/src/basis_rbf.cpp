#include "basis_internal.hpp"
#include "cnf/errors.hpp"

#include <cmath>
#include <numeric>

namespace cnf {

using Eigen::Index;
using Eigen::VectorXd;

// ------------------------------------------------------------- SkewedRBFBasis

namespace {

int rbf_dims(const std::vector<Point>& anchors) {
  if (anchors.empty()) throw BadConfig("rbf: needs at least one anchor");
  const auto m = anchors.front().size();
  for (const auto& a : anchors) {
    if (a.size() != m) throw DimensionMismatch("rbf: anchors have mixed dimensions");
    if (!a.allFinite()) throw NonFiniteValue("rbf: anchor is not finite");
  }
  return static_cast<int>(m);
}

}  // namespace

SkewedRBFBasis::SkewedRBFBasis(std::vector<Point> anchors, double bandwidth, bool shared)
    : anchors_(std::move(anchors)), dims_(rbf_dims(anchors_)), shared_(shared) {
  if (!(bandwidth > 0.0)) throw BadConfig("rbf: bandwidth must be positive");
  const std::size_t n = shared_ ? 1 : anchors_.size() * static_cast<std::size_t>(dims_);
  params_.assign(n, std::log(bandwidth * bandwidth));
}

SkewedRBFBasis::SkewedRBFBasis(std::vector<Point> anchors, std::vector<double> log_variances, bool shared)
    : anchors_(std::move(anchors)), dims_(rbf_dims(anchors_)), shared_(shared) {
  const std::size_t n = shared_ ? 1 : anchors_.size() * static_cast<std::size_t>(dims_);
  if (log_variances.size() != n) throw DimensionMismatch("rbf: expected " + std::to_string(n) + " log-variances");
  params_ = std::move(log_variances);
}

double SkewedRBFBasis::variance(int c, int k) const {
  check_index(c);
  if (k < 0 || k >= dims_) throw IndexOutOfRange("rbf: axis out of range");
  return std::exp(shared_ ? params_[0] : params_[static_cast<std::size_t>(c * dims_ + k)]);
}

DerivativeBundle SkewedRBFBasis::eval_subset(const Point& x, int order, std::span<const int> idx) const {
  check_query(x, order);
  const Index m = dims_;
  DerivativeBundle out = DerivativeBundle::zeros(static_cast<Index>(idx.size()), m, order);
  VectorXd v(m), u(m);
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const int c = idx[j];
    check_index(c);
    const VectorXd d = x - anchors_[static_cast<std::size_t>(c)];
    for (Index k = 0; k < m; ++k) v[k] = variance(c, static_cast<int>(k));
    u = d.cwiseQuotient(v);
    const double psi = detail::gauss_exp(0.5 * d.dot(u));
    const Index f = static_cast<Index>(j);
    out.value[f] = psi;
    if (order >= 1) out.jac.row(f) = -psi * u.transpose();
    if (order >= 2) {
      for (Index k = 0; k < m; ++k)
        for (Index l = 0; l < m; ++l) out.hess(f, k * m + l) = psi * (u[k] * u[l] - (k == l ? 1.0 / v[k] : 0.0));
    }
  }
  return out;
}

DerivativeBundle SkewedRBFBasis::eval_all(const Point& x, int order) const {
  std::vector<int> idx(anchors_.size());
  std::iota(idx.begin(), idx.end(), 0);
  return eval_subset(x, order, idx);
}

void SkewedRBFBasis::param_grad(std::span<const GradItem> items, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw DimensionMismatch("rbf: gradient buffer has wrong length");
  const Index m = dims_;
  VectorXd v(m), u(m), g(m);
  for (const auto& item : items) {
    check_query(item.x, item.order);
    if (item.feature_weights.size() != size()) throw DimensionMismatch("rbf: feature weights length");
    const auto& s = item.slots;
    for (int c = 0; c < size(); ++c) {
      const double w = item.feature_weights[c];
      if (w == 0.0) continue;
      const VectorXd d = item.x - anchors_[static_cast<std::size_t>(c)];
      for (Index k = 0; k < m; ++k) v[k] = variance(c, static_cast<int>(k));
      u = d.cwiseQuotient(v);
      const double psi = detail::gauss_exp(0.5 * d.dot(u));
      if (psi == 0.0) continue;
      // g[mm] = Σ_slots s·∂entry/∂ log v_mm
      for (Index mm = 0; mm < m; ++mm) {
        const double dpsi = 0.5 * psi * d[mm] * u[mm];
        double acc = s[0] * dpsi;
        if (item.order >= 1) {
          for (Index k = 0; k < m; ++k) acc += s[1 + k] * (-dpsi * u[k] + (k == mm ? psi * u[k] : 0.0));
        }
        if (item.order >= 2) {
          for (Index k = 0; k < m; ++k) {
            for (Index l = 0; l < m; ++l) {
              const double base = u[k] * u[l] - (k == l ? 1.0 / v[k] : 0.0);
              double dterm = 0.0;
              if (k == mm) dterm -= u[k] * u[l];
              if (l == mm) dterm -= u[k] * u[l];
              if (k == l && k == mm) dterm += 1.0 / v[k];
              acc += s[1 + m + k * m + l] * (dpsi * base + psi * dterm);
            }
          }
        }
        g[mm] = w * acc;
      }
      if (shared_) {
        grad[0] += g.sum();
      } else {
        for (Index mm = 0; mm < m; ++mm) grad[static_cast<std::size_t>(c * m + mm)] += g[mm];
      }
    }
  }
}

std::unique_ptr<BasisFamily> SkewedRBFBasis::clone() const { return std::make_unique<SkewedRBFBasis>(*this); }

// ------------------------------------------------------------ PolynomialBasis

PolynomialBasis::PolynomialBasis(int count, int channels, std::vector<double> coefficients)
    : count_(count), channels_(channels) {
  if (count_ <= 0 || channels_ <= 0) throw BadConfig("polynomial: count and channels must be positive");
  if (coefficients.size() != static_cast<std::size_t>(count_ * channels_ * 3)) {
    throw DimensionMismatch("polynomial: expected 3 coefficients per basis and channel");
  }
  params_ = std::move(coefficients);
}

DerivativeBundle PolynomialBasis::eval_all(const Point& x, int order) const {
  check_query(x, order);
  const double t = x[0];
  DerivativeBundle out = DerivativeBundle::zeros(features(), 1, order);
  for (Index f = 0; f < features(); ++f) {
    const double* p = params_.data() + f * 3;
    out.value[f] = p[0] + p[1] * t + p[2] * t * t;
    if (order >= 1) out.jac(f, 0) = p[1] + 2.0 * p[2] * t;
    if (order >= 2) out.hess(f, 0) = 2.0 * p[2];
  }
  return out;
}

void PolynomialBasis::param_grad(std::span<const GradItem> items, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw DimensionMismatch("polynomial: gradient buffer has wrong length");
  for (const auto& item : items) {
    check_query(item.x, item.order);
    if (item.feature_weights.size() != features()) throw DimensionMismatch("polynomial: feature weights length");
    const double t = item.x[0];
    const double sv = item.slots[0];
    const double sj = item.order >= 1 ? item.slots[1] : 0.0;
    const double sh = item.order >= 2 ? item.slots[2] : 0.0;
    for (Index f = 0; f < features(); ++f) {
      const double w = item.feature_weights[f];
      if (w == 0.0) continue;
      double* g = grad.data() + f * 3;
      g[0] += w * sv;
      g[1] += w * (sv * t + sj);
      g[2] += w * (sv * t * t + 2.0 * sj * t + 2.0 * sh);
    }
  }
}

std::unique_ptr<BasisFamily> PolynomialBasis::clone() const { return std::make_unique<PolynomialBasis>(*this); }

}  // namespace cnf
