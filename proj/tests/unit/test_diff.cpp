#include "doctest.h"

#include "cnf/diff.hpp"
#include "cnf/errors.hpp"

#include <cmath>

using namespace cnf;

namespace {

// Relative mismatch of analytic input derivatives against central differences.
double input_fd_error(const EncoderArch& arch, const std::vector<double>& p, const Point& x) {
  const DerivativeBundle b = encoder_eval(arch, p, x, 2);
  double worst = 0.0;
  const double h = 1e-5;
  for (int k = 0; k < x.size(); ++k) {
    Point xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    const DerivativeBundle bp = encoder_eval(arch, p, xp, 1);
    const DerivativeBundle bm = encoder_eval(arch, p, xm, 1);
    const Eigen::VectorXd dv = (bp.value - bm.value) / (2 * h);
    const Eigen::MatrixXd dj = (bp.jac - bm.jac) / (2 * h);
    for (int f = 0; f < b.features(); ++f) {
      worst = std::max(worst, std::abs(dv[f] - b.jac(f, k)) / (std::abs(dv[f]) + std::abs(b.jac(f, k)) + 1e-6));
      for (int l = 0; l < x.size(); ++l) {
        const double an = b.hess_at(f, l, k);
        worst = std::max(worst, std::abs(dj(f, l) - an) / (std::abs(dj(f, l)) + std::abs(an) + 1e-6));
      }
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("activations round-trip by name") {
  for (auto a : {Activation::kTanh, Activation::kSoftplus, Activation::kSine, Activation::kRelu, Activation::kLinear}) {
    CHECK(parse_activation(activation_name(a)) == a);
  }
  CHECK_THROWS_AS(parse_activation("swish"), BadConfig);
}

TEST_CASE("mlp architecture and parameter count") {
  const EncoderArch arch = EncoderArch::mlp(2, {5, 4}, 3, Activation::kTanh);
  CHECK(arch.param_count() == (2 * 5 + 5) + (5 * 4 + 4) + (4 * 3 + 3));
  CHECK(arch.output_dim() == 3);
  EncoderArch bad = arch;
  bad.layers[1].in = 7;
  CHECK_THROWS_AS(bad.validate(), ArchMismatch);
}

TEST_CASE("glorot init is deterministic, bounded, with zero biases") {
  const EncoderArch arch = EncoderArch::mlp(2, {8}, 3, Activation::kTanh);
  std::mt19937_64 r1(9), r2(9);
  const auto p = glorot_init(arch, r1);
  CHECK(p == glorot_init(arch, r2));
  const double lim0 = std::sqrt(6.0 / (2 + 8));
  for (int i = 0; i < 16; ++i) CHECK(std::abs(p[static_cast<std::size_t>(i)]) <= lim0);
  for (int i = 16; i < 24; ++i) CHECK(p[static_cast<std::size_t>(i)] == 0.0);
}

TEST_CASE("single linear layer is an affine map") {
  EncoderArch arch;
  arch.input_dim = 2;
  arch.layers.push_back({2, 1, Activation::kLinear, 0.0});
  const std::vector<double> p{2.0, -3.0, 0.5};
  const DerivativeBundle b = encoder_eval(arch, p, Eigen::Vector2d(1.0, 2.0), 2);
  CHECK(b.value[0] == doctest::Approx(2.0 - 6.0 + 0.5));
  CHECK(b.jac(0, 0) == 2.0);
  CHECK(b.jac(0, 1) == -3.0);
  CHECK(b.hess.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encoder input derivatives match finite differences for every activation") {
  std::mt19937_64 rng(10);
  for (auto act : {Activation::kTanh, Activation::kSoftplus, Activation::kSine, Activation::kLinear}) {
    const double param = act == Activation::kSine ? 3.0 : 10.0;
    const EncoderArch arch = EncoderArch::mlp(2, {7, 5}, 3, act, Activation::kLinear, param);
    const auto p = glorot_init(arch, rng);
    CAPTURE(activation_name(act));
    CHECK(input_fd_error(arch, p, Eigen::Vector2d(0.31, -0.47)) < 1e-5);
  }
  // relu away from kinks
  const EncoderArch arch = EncoderArch::mlp(3, {6}, 2, Activation::kRelu);
  const auto p = glorot_init(arch, rng);
  CHECK(input_fd_error(arch, p, Eigen::Vector3d(0.2, 0.1, -0.3)) < 1e-5);
}

TEST_CASE("hessian is symmetric") {
  std::mt19937_64 rng(11);
  const EncoderArch arch = EncoderArch::mlp(3, {6}, 4, Activation::kSoftplus, Activation::kTanh, 10.0);
  const auto p = glorot_init(arch, rng);
  const DerivativeBundle b = encoder_eval(arch, p, Eigen::Vector3d(0.1, 0.5, -0.2), 2);
  CHECK_NOTHROW(b.validate());
  for (int f = 0; f < 4; ++f)
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 3; ++l) CHECK(b.hess_at(f, k, l) == doctest::Approx(b.hess_at(f, l, k)));
}

TEST_CASE("encoder parameter gradients match finite differences at every order") {
  std::mt19937_64 rng(12);
  const EncoderArch arch = EncoderArch::mlp(2, {5}, 2, Activation::kTanh, Activation::kSoftplus, 10.0);
  const auto p = glorot_init(arch, rng);
  const Point x = Eigen::Vector2d(0.4, -0.1);
  for (int order = 0; order <= 2; ++order) {
    DerivativeBundle cot = DerivativeBundle::zeros(2, 2, order);
    cot.value << 0.3, -1.2;
    if (order >= 1) cot.jac << 0.5, 0.2, -0.7, 1.1;
    if (order >= 2) cot.hess.setConstant(0.25);
    const ParamCotangent g = encoder_param_grad(arch, p, x, order, cot);
    auto f = [&](const std::vector<double>& v) {
      const DerivativeBundle b = encoder_eval(arch, v, x, order);
      double s = cot.value.dot(b.value);
      if (order >= 1) s += (cot.jac.array() * b.jac.array()).sum();
      if (order >= 2) s += (cot.hess.array() * b.hess.array()).sum();
      return s;
    };
    CAPTURE(order);
    CHECK(fd_check(f, p, g, 1e-8) < 1e-5);
  }
}

TEST_CASE("query and bundle validation") {
  const EncoderArch arch = EncoderArch::mlp(2, {3}, 1, Activation::kTanh);
  std::mt19937_64 rng(13);
  const auto p = glorot_init(arch, rng);
  CHECK_THROWS_AS(encoder_eval(arch, p, Eigen::Vector3d(0, 0, 0), 0), DimensionMismatch);
  CHECK_THROWS_AS(encoder_eval(arch, p, Eigen::Vector2d(0, 0), 3), UnsupportedOrder);
  DerivativeBundle b = DerivativeBundle::zeros(1, 2, 2);
  b.hess(0, 1) = 1.0;
  CHECK_THROWS(b.validate());
  b.hess(0, 2) = 1.0;
  CHECK_NOTHROW(b.validate());
  b.value[0] = std::nan("");
  CHECK_THROWS_AS(b.validate(), NonFiniteValue);
}

TEST_CASE("finite-difference helpers") {
  auto f = [](const std::vector<double>& v) { return v[0] * v[0] + 3.0 * v[0] * v[1]; };
  const auto g = fd_gradient(f, {1.0, 2.0});
  CHECK(g[0] == doctest::Approx(2.0 + 6.0));
  CHECK(g[1] == doctest::Approx(3.0));
  CHECK(fd_check(f, {1.0, 2.0}, {8.0, 3.0}) < 1e-8);
  CHECK(fd_check(f, {1.0, 2.0}, {8.0, 4.0}) > 0.1);
}
