#include "cnf/checks.hpp"

#include "cnf/csv.hpp"
#include "cnf/losses.hpp"
#include "cnf/sparse.hpp"
#include "cnf/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cnf {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using linalg::DenseMatrix;

namespace {

DenseMatrix random_matrix(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = u(rng);
  }
  a.diagonal().array() += n / 2.0;
  return a;
}

// Textbook elimination with partial pivoting on an augmented copy.
VectorXd naive_solve(DenseMatrix a, VectorXd b) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index p = k;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    }
    a.row(k).swap(a.row(p));
    std::swap(b[k], b[p]);
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double m = a(i, k) / a(k, k);
      for (Eigen::Index j = k; j < n; ++j) a(i, j) -= m * a(k, j);
      b[i] -= m * b[k];
    }
  }
  VectorXd x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (Eigen::Index j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
    x[i] = s / a(i, i);
  }
  return x;
}

std::vector<Point> toy_anchors(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point> out;
  for (int i = 0; i < n; ++i) out.push_back(Eigen::Vector2d(u(rng), u(rng)));
  return out;
}

}  // namespace

std::vector<CheckResult> run_checks() {
  std::vector<CheckResult> out;
  std::mt19937_64 rng(7);

  {
    const DenseMatrix a = random_matrix(10, rng);
    VectorXd b = VectorXd::Random(10);
    const VectorXd x = linalg::lu_solve(linalg::lu_factor(a), b);
    out.push_back({"lu_solve vs naive elimination", (x - naive_solve(a, b)).cwiseAbs().maxCoeff(), 1e-10});
  }
  {
    const DenseMatrix a = random_matrix(8, rng);
    const VectorXd v = VectorXd::Random(8);
    const VectorXd l = linalg::lu_solve_transpose(linalg::lu_factor(a), v);
    out.push_back({"lu_solve_transpose multiply-back", (a.transpose() * l - v).cwiseAbs().maxCoeff(), 1e-10});
  }
  {
    const DenseMatrix a = random_matrix(5, rng);
    const DenseMatrix g = linalg::cond_surrogate_grad(a);
    std::vector<double> at(a.data(), a.data() + a.size());
    std::vector<double> an(g.data(), g.data() + g.size());
    auto f = [](const std::vector<double>& v) {
      return linalg::cond_surrogate(Eigen::Map<const DenseMatrix>(v.data(), 5, 5));
    };
    out.push_back({"cond_surrogate_grad vs finite differences", fd_check(f, at, an), 1e-4});
  }
  {
    const EncoderArch arch = EncoderArch::mlp(2, {6}, 3, Activation::kSoftplus, Activation::kTanh, 10.0);
    const std::vector<double> p = glorot_init(arch, rng);
    const Point x = Eigen::Vector2d(0.3, -0.2);
    const DerivativeBundle b = encoder_eval(arch, p, x, 2);
    double worst = 0.0;
    for (int k = 0; k < 2; ++k) {
      const double h = 1e-5;
      Point xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      const DerivativeBundle bp = encoder_eval(arch, p, xp, 1);
      const DerivativeBundle bm = encoder_eval(arch, p, xm, 1);
      const VectorXd dv = (bp.value - bm.value) / (2 * h);
      const MatrixXd dj = (bp.jac - bm.jac) / (2 * h);
      for (int f = 0; f < 3; ++f) {
        worst = std::max(worst, std::abs(dv[f] - b.jac(f, k)) / (std::abs(dv[f]) + std::abs(b.jac(f, k)) + 1e-8));
        for (int l = 0; l < 2; ++l) {
          const double an = b.hess_at(f, l, k);
          worst = std::max(worst, std::abs(dj(f, l) - an) / (std::abs(dj(f, l)) + std::abs(an) + 1e-8));
        }
      }
    }
    out.push_back({"encoder jac/hess vs finite differences", worst, 1e-4});
  }

  BasisConfig bc;
  bc.kind = "gaussian_kernel";
  bc.hidden = {8};
  bc.features = 6;
  bc.kernel_scale = 1.0;
  bc.anchors = toy_anchors(6, rng);
  {
    auto fam = init_basis(bc, 3);
    const Point x = Eigen::Vector2d(0.1, 0.4);
    DerivativeBundle cot = DerivativeBundle::zeros(1, 2, 1);
    cot.value[0] = 0.7;
    cot.jac(0, 0) = -0.4;
    cot.jac(0, 1) = 1.1;
    const ParamCotangent g = fam->param_grad(2, x, 1, cot);
    std::vector<double> at(fam->params().begin(), fam->params().end());
    auto f = [&](const std::vector<double>& v) {
      auto c = fam->clone();
      c->set_params(v);
      const DerivativeBundle b = c->eval(2, x, 1);
      return cot.value.dot(b.value) + (cot.jac.array() * b.jac.array()).sum();
    };
    out.push_back({"gaussian kernel param_grad vs finite differences", fd_check(f, at, g, 1e-8), 1e-4});
  }
  {
    std::vector<Constraint> rows;
    const std::vector<std::string> dims{"x", "y"};
    const LinearOperator id = identity_operator(dims);
    const LinearOperator dx = parse_operator("dx", dims);
    for (std::size_t i = 0; i < bc.anchors.size(); ++i) {
      rows.push_back(Constraint{i % 2 ? dx : id, bc.anchors[i], VectorXd::Constant(1, 0.2 * static_cast<double>(i))});
    }
    ConstrainedField field(init_basis(bc, 5), ConstraintSet(rows, 1));
    field.solve();
    const Box box{Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1)};
    LossSpec spec;
    spec.add(1.0, std::make_shared<EikonalLoss>(box, 16));
    spec.add(0.5, std::make_shared<CondLoss>());
    std::mt19937_64 r0(11);
    const ParamCotangent g = total_loss_grad(field, spec, r0, true).grad;
    std::vector<double> at(field.family().params().begin(), field.family().params().end());
    auto f = [&](const std::vector<double>& v) {
      ConstrainedField c(field);
      c.set_params(v);
      c.solve();
      std::mt19937_64 r1(11);
      return total_loss_grad(c, spec, r1, false).total;
    };
    const double scale = *std::max_element(g.begin(), g.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    out.push_back({"total_loss_grad vs finite differences", fd_check(f, at, g, 1e-5 * std::abs(scale)), 1e-3});
  }
  {
    BasisConfig hc = bc;
    hc.kind = "hybrid_kernel";
    hc.anchors = toy_anchors(12, rng);
    hc.sigma = 10.0;
    auto fam = init_basis(hc, 9);
    std::vector<Constraint> rows;
    const std::vector<std::string> dims{"x", "y"};
    for (std::size_t i = 0; i < hc.anchors.size(); ++i) {
      rows.push_back(Constraint{identity_operator(dims), hc.anchors[i], VectorXd::Constant(1, std::sin(3.0 * i))});
    }
    const ConstraintSet cs(rows, 1);
    ConstrainedField field(fam->clone(), cs);
    field.solve();
    PatchSolver solver(dynamic_cast<const HybridKernelBasis&>(*fam), cs, 100);
    double worst = 0.0;
    for (const auto& q : toy_anchors(20, rng)) worst = std::max(worst, std::abs(solver.eval(q)[0] - field.eval(q)[0]));
    out.push_back({"patch solve vs global solve", worst, 1e-6});
  }
  return out;
}

bool report_checks(const std::vector<CheckResult>& results, std::ostream& os) {
  bool all = true;
  for (const auto& r : results) {
    os << (r.pass() ? "PASS " : "FAIL ") << r.name << " (error " << format_real(r.error) << ", tolerance "
       << format_real(r.tolerance) << ")\n";
    all = all && r.pass();
  }
  return all;
}

}  // namespace cnf
