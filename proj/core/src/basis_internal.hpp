#pragma once

#include "cnf/basis.hpp"

#include <cmath>

namespace cnf::detail {

/// Expands a separable cotangent into a per-feature bundle for `features`
/// features selected by `idx` (empty = all).
DerivativeBundle expand_item(const GradItem& item, Eigen::Index dims, std::span<const int> idx);

/// Slot vector of feature f of a bundle.
SlotWeights bundle_slots(const DerivativeBundle& b, Eigen::Index f);

/// Rows `idx` of an all-features bundle (feature blocks of `width`).
DerivativeBundle select_features(const DerivativeBundle& b, std::span<const int> idx, int width);

/// exp(−a) for a ≥ 0, flushed to exactly 0 below e^−600 (≈ 1e-261). Far-apart
/// kernel pairs would otherwise drift into subnormal arithmetic, which is
/// orders of magnitude slower and far below round-off of any assembled entry.
inline constexpr double kGaussExpCutoff = 600.0;
inline double gauss_exp(double a) { return a > kGaussExpCutoff ? 0.0 : std::exp(-a); }

/// Per-basis scalars of the feature-space Gaussian exp(−w·q) where
/// q = ‖δ‖², q1_k = ∂q/∂x_k, q2_kl = ∂²q/∂x_k∂x_l.
struct GaussTerms {
  double q = 0.0;
  double psi = 0.0;
  Eigen::VectorXd q1;
  Eigen::VectorXd q2;
};

/// Cotangents on (q, q1, q2) and on w for one basis, given cotangents on the
/// basis value, gradient and Hessian.
struct GaussReverse {
  double qbar = 0.0;
  Eigen::VectorXd q1bar;
  Eigen::VectorXd q2bar;
  double wbar = 0.0;
};

/// Fills value/jac/hess entries of feature f from Gaussian terms.
void gauss_forward(double w, const GaussTerms& t, int order, Eigen::Index dims, DerivativeBundle& out,
                   Eigen::Index f);

GaussReverse gauss_reverse(double w, const GaussTerms& t, int order, Eigen::Index dims,
                           const DerivativeBundle& cot, Eigen::Index f);

}  // namespace cnf::detail
