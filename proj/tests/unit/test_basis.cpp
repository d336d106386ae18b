#include "doctest.h"
#include "toys.hpp"

#include "cnf/basis.hpp"
#include "cnf/errors.hpp"

#include <cmath>

using namespace cnf;

namespace {

std::vector<Point> anchors2d(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point> out;
  for (int i = 0; i < n; ++i) out.push_back(Eigen::Vector2d(u(rng), u(rng)));
  return out;
}

BasisConfig small_config(const std::string& kind) {
  BasisConfig c;
  c.kind = kind;
  c.input_dim = 2;
  c.hidden = {6};
  c.features = 4;
  c.activation = Activation::kSoftplus;
  c.kernel_scale = 1.0;
  c.hyper_hidden = {5};
  c.count = 5;
  c.channels = 2;
  c.sigma = 2.0;
  c.bandwidth = 0.6;
  if (kind != "polynomial" && kind != "independent" && kind != "constraint_layer" && kind != "hypernet") {
    c.anchors = anchors2d(5, 77);
  }
  if (kind == "polynomial") c.input_dim = 1;
  return c;
}

const std::vector<std::string> kKinds{"gaussian_kernel", "dot_kernel", "hypernet_kernel", "hybrid_kernel",
                                      "skewed_rbf", "rbf", "polynomial", "independent", "constraint_layer",
                                      "hypernet"};

Point query(int dims) {
  return dims == 1 ? Point(Eigen::VectorXd::Constant(1, 0.3)) : Point(Eigen::Vector2d(0.25, -0.35));
}

double input_fd_error(const BasisFamily& fam, const Point& x) {
  const DerivativeBundle b = fam.eval_all(x, 2);
  double worst = 0.0;
  const double h = 1e-5;
  for (int k = 0; k < x.size(); ++k) {
    Point xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    const DerivativeBundle bp = fam.eval_all(xp, 1);
    const DerivativeBundle bm = fam.eval_all(xm, 1);
    for (int f = 0; f < b.features(); ++f) {
      const double dv = (bp.value[f] - bm.value[f]) / (2 * h);
      worst = std::max(worst, std::abs(dv - b.jac(f, k)) / (std::abs(dv) + std::abs(b.jac(f, k)) + 1e-6));
      for (int l = 0; l < x.size(); ++l) {
        const double dj = (bp.jac(f, l) - bm.jac(f, l)) / (2 * h);
        const double an = b.hess_at(f, l, k);
        worst = std::max(worst, std::abs(dj - an) / (std::abs(dj) + std::abs(an) + 1e-6));
      }
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("every family: subset evaluation agrees with full evaluation") {
  for (const auto& kind : kKinds) {
    CAPTURE(kind);
    const auto fam = init_basis(small_config(kind), 3);
    const Point x = query(fam->input_dim());
    const DerivativeBundle all = fam->eval_all(x, 2);
    CHECK(all.features() == fam->features());
    const std::vector<int> idx{3, 0};
    const DerivativeBundle sub = fam->eval_subset(x, 2, idx);
    const int w = fam->width();
    for (std::size_t j = 0; j < idx.size(); ++j) {
      for (int n = 0; n < w; ++n) {
        const int fs = static_cast<int>(j) * w + n, fa = idx[j] * w + n;
        CHECK(sub.value[fs] == doctest::Approx(all.value[fa]).epsilon(1e-12));
        CHECK((sub.jac.row(fs) - all.jac.row(fa)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((sub.hess.row(fs) - all.hess.row(fa)).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("every family: input derivatives match finite differences") {
  for (const auto& kind : kKinds) {
    CAPTURE(kind);
    const auto fam = init_basis(small_config(kind), 4);
    CHECK(input_fd_error(*fam, query(fam->input_dim())) < 1e-5);
  }
}

TEST_CASE("every family: parameter gradients match finite differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& kind : kKinds) {
    CAPTURE(kind);
    const auto fam = init_basis(small_config(kind), 6);
    const int m = fam->input_dim();
    for (int order = 0; order <= 2; ++order) {
      CAPTURE(order);
      std::vector<GradItem> items;
      for (int q = 0; q < 2; ++q) {
        GradItem it;
        it.x = q == 0 ? query(m) : Point(-0.5 * query(m));
        it.order = order;
        it.feature_weights = Eigen::VectorXd::NullaryExpr(fam->features(), [&] { return u(rng); });
        it.slots = Eigen::VectorXd::NullaryExpr(slot_count(m, order), [&] { return u(rng); });
        items.push_back(it);
      }
      std::vector<double> g(fam->params().size(), 0.0);
      fam->param_grad(items, g);
      auto f = [&](const std::vector<double>& v) {
        auto c = fam->clone();
        c->set_params(v);
        double s = 0.0;
        for (const auto& it : items) {
          const DerivativeBundle b = c->eval_all(it.x, it.order);
          for (int k = 0; k < b.features(); ++k) {
            double e = it.slots[0] * b.value[k];
            for (int d = 0; d < m && order >= 1; ++d) e += it.slots[1 + d] * b.jac(k, d);
            for (int d = 0; d < m * m && order >= 2; ++d) e += it.slots[1 + m + d] * b.hess(k, d);
            s += it.feature_weights[k] * e;
          }
        }
        return s;
      };
      const std::vector<double> at(fam->params().begin(), fam->params().end());
      CHECK(toy::grad_error(f, at, g) < 1e-4);
    }
  }
}

TEST_CASE("init_basis is deterministic in the seed") {
  for (const auto& kind : kKinds) {
    CAPTURE(kind);
    const auto a = init_basis(small_config(kind), 11);
    const auto b = init_basis(small_config(kind), 11);
    CHECK(std::vector<double>(a->params().begin(), a->params().end()) ==
          std::vector<double>(b->params().begin(), b->params().end()));
  }
  CHECK_THROWS_AS(init_basis(small_config("nope"), 0), BadConfig);
  BasisConfig c = small_config("gaussian_kernel");
  c.anchors.clear();
  CHECK_THROWS_AS(init_basis(c, 0), BadConfig);
}

TEST_CASE("gaussian kernel is one at its own anchor") {
  const auto fam = init_basis(small_config("gaussian_kernel"), 1);
  const auto anchors = fam->anchors();
  for (int i = 0; i < fam->size(); ++i) {
    CHECK(fam->eval(i, anchors[static_cast<std::size_t>(i)], 0).value[0] == 1.0);
    CHECK(fam->eval(i, anchors[static_cast<std::size_t>(i)], 1).jac.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("dot kernel is symmetric in its arguments") {
  const auto fam = init_basis(small_config("dot_kernel"), 1);
  const auto anchors = fam->anchors();
  for (int i = 0; i < fam->size(); ++i)
    for (int j = 0; j < fam->size(); ++j)
      CHECK(fam->eval(i, anchors[static_cast<std::size_t>(j)], 0).value[0] ==
            doctest::Approx(fam->eval(j, anchors[static_cast<std::size_t>(i)], 0).value[0]));
}

TEST_CASE("hypernet kernel: slots separate repeated anchors") {
  BasisConfig c = small_config("hypernet_kernel");
  c.anchors = {Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(-0.3, 0.4),
               Eigen::Vector2d(0.1, 0.2)};
  CHECK(anchor_slots(c.anchors) == std::vector<int>{0, 1, 0, 2});
  const auto fam = init_basis(c, 2);
  const auto& hk = dynamic_cast<const HypernetKernelBasis&>(*fam);
  CHECK(hk.slot_count() == 3);
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      const auto a = hk.generated(i), b = hk.generated(j);
      CHECK(!std::equal(a.begin(), a.end(), b.begin()));
    }
  }
  const Point q = Eigen::Vector2d(0.5, -0.5);
  CHECK(fam->eval(0, q, 0).value[0] != doctest::Approx(fam->eval(1, q, 0).value[0]));
  c.slot_count = 2;
  CHECK_THROWS_AS(init_basis(c, 2), BadConfig);
}

TEST_CASE("hypernet_generate matches the hypernet forward pass") {
  const EncoderArch target = EncoderArch::mlp(2, {3}, 2, Activation::kTanh);
  const EncoderArch hyper = EncoderArch::mlp(3, {4}, target.param_count(), Activation::kTanh);
  std::mt19937_64 rng(3);
  const auto hp = glorot_init(hyper, rng);
  const Point cond = Eigen::Vector3d(0.2, -0.1, 1.0);
  const EncoderParams e = hypernet_generate(hyper, hp, cond, target);
  const Eigen::VectorXd direct = encoder_eval(hyper, hp, cond, 0).value;
  REQUIRE(static_cast<Eigen::Index>(e.flat.size()) == direct.size());
  for (std::size_t i = 0; i < e.flat.size(); ++i) CHECK(e.flat[i] == direct[static_cast<Eigen::Index>(i)]);
  CHECK_THROWS_AS(hypernet_generate(hyper, hp, cond, EncoderArch::mlp(2, {5}, 2, Activation::kTanh)),
                  ArchMismatch);
}

TEST_CASE("hybrid kernel vanishes exactly beyond three sigma") {
  BasisConfig c = small_config("hybrid_kernel");
  c.sigma = 0.1;
  const auto fam = init_basis(c, 1);
  const auto& hy = dynamic_cast<const HybridKernelBasis&>(*fam);
  CHECK(*fam->support_radius() == doctest::Approx(0.3));
  CHECK(*fam->fallback_value() == 1e5);
  const Point a = fam->anchors()[0];
  const Point inside = a + Eigen::Vector2d(0.299, 0.0);
  const Point outside = a + Eigen::Vector2d(0.3 + 1e-9, 0.0);
  CHECK(fam->eval(0, inside, 2).value[0] != 0.0);
  const DerivativeBundle b = fam->eval(0, outside, 2);
  CHECK(b.value[0] == 0.0);
  CHECK(b.jac.cwiseAbs().maxCoeff() == 0.0);
  CHECK(b.hess.cwiseAbs().maxCoeff() == 0.0);
  const auto sup = hy.supported(a);
  CHECK(std::find(sup.begin(), sup.end(), 0) != sup.end());
  CHECK(std::is_sorted(sup.begin(), sup.end()));
}

TEST_CASE("skewed rbf matches the closed form") {
  const std::vector<Point> anchors{Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(-0.4, 0.5)};
  SkewedRBFBasis fam(anchors, {std::log(0.04), std::log(0.09), std::log(0.01), std::log(0.25)}, false);
  const Point x = Eigen::Vector2d(0.3, -0.1);
  const double e0 = std::exp(-0.5 * (0.2 * 0.2 / 0.04 + 0.3 * 0.3 / 0.09));
  const double e1 = std::exp(-0.5 * (0.7 * 0.7 / 0.01 + 0.6 * 0.6 / 0.25));
  const DerivativeBundle b = fam.eval_all(x, 1);
  CHECK(b.value[0] == doctest::Approx(e0));
  CHECK(b.value[1] == doctest::Approx(e1));
  CHECK(b.jac(0, 0) == doctest::Approx(-e0 * 0.2 / 0.04));
  CHECK(fam.variance(1, 1) == doctest::Approx(0.25));

  SkewedRBFBasis shared(anchors, 0.5, true);
  CHECK(shared.params().size() == 1);
  CHECK(shared.kind() == "rbf");
  CHECK(shared.variance(0, 0) == doctest::Approx(0.25));
  CHECK(shared.variance(1, 1) == doctest::Approx(0.25));
  CHECK_THROWS_AS(SkewedRBFBasis(anchors, std::vector<double>{0.0}, false), DimensionMismatch);
}

TEST_CASE("polynomial basis is quadratic per channel") {
  PolynomialBasis fam(1, 2, {1.0, 2.0, 3.0, -1.0, 0.5, 0.0});
  const DerivativeBundle b = fam.eval_all(Point(Eigen::VectorXd::Constant(1, 2.0)), 2);
  CHECK(b.value[0] == 1 + 4 + 12);
  CHECK(b.value[1] == -1 + 1);
  CHECK(b.jac(0, 0) == 2 + 12);
  CHECK(b.hess(0, 0) == 6);
  CHECK(b.hess(1, 0) == 0);
}

TEST_CASE("constraint layer bases are the encoder outputs") {
  BasisConfig c = small_config("constraint_layer");
  const auto fam = init_basis(c, 8);
  const auto& cl = dynamic_cast<const ConstraintLayerBasis&>(*fam);
  CHECK(cl.size() == c.count);
  const Point x = query(2);
  const EncoderArch arch = EncoderArch::mlp(2, c.hidden, c.count, c.activation, c.output_activation,
                                            c.activation_param);
  const DerivativeBundle direct = encoder_eval(arch, fam->params(), x, 0);
  CHECK((fam->eval_all(x, 0).value - direct.value).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("query validation") {
  const auto fam = init_basis(small_config("gaussian_kernel"), 1);
  CHECK_THROWS_AS(fam->eval_all(Eigen::Vector3d(0, 0, 0), 0), DimensionMismatch);
  CHECK_THROWS_AS(fam->eval_all(Eigen::Vector2d(0, 0), 3), UnsupportedOrder);
  CHECK_THROWS_AS(fam->eval(99, Eigen::Vector2d(0, 0), 0), IndexOutOfRange);
  std::vector<double> p(fam->params().begin(), fam->params().end());
  p.pop_back();
  CHECK_THROWS(fam->set_params(p));
}
