#include "doctest.h"
#include "toys.hpp"

#include "cnf/errors.hpp"
#include "cnf/losses.hpp"
#include "cnf/train.hpp"

#include <cmath>

using namespace cnf;

namespace {

const Box kBox{Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1)};

std::vector<std::pair<std::string, std::shared_ptr<const FieldObjective>>> all_losses() {
  const auto xs = toy::points(5, 99);
  Eigen::MatrixXd ys(5, 1);
  ys << 0.2, -0.4, 0.9, 0.1, 1.5;
  return {{"eikonal", std::make_shared<EikonalLoss>(kBox, 8)},
          {"total_variation", std::make_shared<TotalVariationLoss>(kBox, 8)},
          {"cond", std::make_shared<CondLoss>()},
          {"data_l2", std::make_shared<DataL2Loss>(xs, ys)},
          {"data_log_l1", std::make_shared<DataLogL1Loss>(xs, ys)}};
}

}  // namespace

TEST_CASE("total_loss_grad matches finite differences for every family and loss") {
  for (const auto& kind : toy::scalar_kinds()) {
    const auto pts = toy::points(6, 31);
    ConstrainedField f(init_basis(toy::config(kind, 6, 31), 31), toy::scalar_constraints(pts));
    f.solve();
    for (const auto& [name, loss] : all_losses()) {
      CAPTURE(kind);
      CAPTURE(name);
      LossSpec spec;
      spec.add(1.0, loss);
      std::mt19937_64 r0(5);
      const ParamCotangent g = total_loss_grad(f, spec, r0, true).grad;
      auto value = [&](const std::vector<double>& v) {
        ConstrainedField c(f);
        c.set_params(v);
        c.solve();
        std::mt19937_64 r1(5);
        return total_loss_grad(c, spec, r1, false).total;
      };
      const std::vector<double> at(f.family().params().begin(), f.family().params().end());
      CHECK(toy::grad_error(value, at, g) < 1e-3);
    }
  }
}

TEST_CASE("loss values against direct formulas") {
  const auto pts = toy::points(6, 31);
  ConstrainedField f(init_basis(toy::config("gaussian_kernel", 6, 31), 31), toy::scalar_constraints(pts));
  f.solve();
  std::mt19937_64 rng(1);

  const auto xs = toy::points(3, 7);
  Eigen::MatrixXd ys(3, 1);
  ys << 0.5, 0.0, 2.0;
  double l2 = 0.0, l1 = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double v = f.eval(xs[static_cast<std::size_t>(i)])[0];
    l2 += (v - ys(i, 0)) * (v - ys(i, 0)) / 3.0;
    l1 += std::abs(v - std::log(ys(i, 0) + 1.0)) / 3.0;
  }
  CHECK(DataL2Loss(xs, ys).evaluate(f, rng).value == doctest::Approx(l2));
  CHECK(DataLogL1Loss(xs, ys).evaluate(f, rng).value == doctest::Approx(l1));
  CHECK(CondLoss().evaluate(f, rng).value == doctest::Approx(std::log(f.system().cond)));
  ys(0, 0) = -1.0;
  CHECK_THROWS_AS(DataLogL1Loss(xs, ys), BadTarget);

  std::mt19937_64 a(3), b(3);
  double eik = 0.0, tv = 0.0;
  for (int s = 0; s < 16; ++s) {
    const double n = f.eval_bundle(kBox.sample(b), 1).jac.row(0).norm();
    eik += (n - 1) * (n - 1) / 16;
  }
  CHECK(EikonalLoss(kBox, 16).evaluate(f, a).value == doctest::Approx(eik));
  std::mt19937_64 c(4), d(4);
  for (int s = 0; s < 16; ++s) tv += 4.0 * f.eval_bundle(kBox.sample(d), 1).jac.row(0).norm() / 16;
  CHECK(TotalVariationLoss(kBox, 16).evaluate(f, c).value == doctest::Approx(tv));
}

TEST_CASE("box sampling stays inside and has the right volume") {
  const Box box{Eigen::Vector2d(0, -1), Eigen::Vector2d(2, 3)};
  CHECK(box.volume() == 8.0);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Point p = box.sample(rng);
    CHECK(((p.array() >= box.lo.array()) && (p.array() <= box.hi.array())).all());
  }
}

TEST_CASE("adam first step and bias correction") {
  AdamState s(0.1, 2);
  const std::vector<double> p{1.0, -2.0};
  const auto p1 = adam_step(s, p, std::vector<double>{0.5, -4.0});
  CHECK(p1[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)));
  CHECK(p1[1] == doctest::Approx(-2.0 + 0.1));
  // second step by hand
  const double m = 0.9 * 0.05 + 0.1 * 1.0, v = 0.999 * 0.00025 + 0.001 * 1.0;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  const auto p2 = adam_step(s, p1, std::vector<double>{1.0, 0.0});
  CHECK(p2[0] == doctest::Approx(p1[0] - 0.1 * mh / (std::sqrt(vh) + 1e-8)));
  CHECK(s.step == 2);
  CHECK_THROWS_AS(adam_step(s, p, std::vector<double>{1.0}), ShapeMismatch);

  AdamState frozen(0.1, 2);
  frozen.mask = {1, 0};
  const auto q = adam_step(frozen, p, std::vector<double>{1.0, 1.0});
  CHECK(q[1] == -2.0);
  CHECK(q[0] != 1.0);
}

TEST_CASE("loss spec validation") {
  LossSpec empty;
  CHECK_THROWS_AS(empty.validate(), BadConfig);
  LossSpec neg;
  neg.add(-1.0, std::make_shared<CondLoss>());
  CHECK_THROWS_AS(neg.validate(), BadConfig);
}

TEST_CASE("cond-regularized training lowers the condition surrogate and keeps constraints") {
  const auto pts = toy::points(8, 41);
  BasisConfig c = toy::config("gaussian_kernel", 8, 41);
  c.kernel_scale = 3.0;
  ConstrainedField f(init_basis(c, 41), toy::scalar_constraints(pts));
  f.solve();
  LossSpec spec;
  spec.add(1.0, std::make_shared<CondLoss>());
  TrainOptions opt;
  opt.iterations = 40;
  opt.lr = 1e-2;
  int calls = 0;
  opt.on_iteration = [&](int, const ConstrainedField& g) {
    ++calls;
    CHECK(g.max_residual() <= residual_bound(g.system(), 0));
  };
  const double before = f.system().cond;
  const TrainTrace t = train(f, spec, opt);
  CHECK(!t.singular);
  CHECK(t.rows.size() == 40);
  CHECK(calls == 40);
  CHECK(t.rows.front().cond == doctest::Approx(before));
  CHECK(f.system().cond < before);
  CHECK(t.table().header() ==
        std::vector<std::string>{"iter", "loss_total", "loss_cond", "cond_surrogate", "residual_max"});
}

TEST_CASE("training is deterministic") {
  auto run = [] {
    const auto pts = toy::points(6, 51);
    ConstrainedField f(init_basis(toy::config("hypernet_kernel", 6, 51), 51), toy::scalar_constraints(pts));
    f.solve();
    LossSpec spec;
    spec.add(1.0, std::make_shared<EikonalLoss>(kBox, 16));
    spec.add(0.1, std::make_shared<CondLoss>());
    TrainOptions opt;
    opt.iterations = 5;
    opt.lr = 1e-3;
    opt.seed = 9;
    return train(f, spec, opt).table().str();
  };
  CHECK(run() == run());
}
