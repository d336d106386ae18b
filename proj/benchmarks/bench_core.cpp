#include "cnf/collocation.hpp"
#include "cnf/linalg.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

cnf::linalg::DenseMatrix random_matrix(int n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  cnf::linalg::DenseMatrix a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = u(rng);
  }
  a.diagonal().array() += n;
  return a;
}

std::vector<cnf::Point> anchors(int n) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<cnf::Point> out;
  for (int i = 0; i < n; ++i) out.push_back(Eigen::Vector2d(u(rng), u(rng)));
  return out;
}

void BM_LuFactor(benchmark::State& state) {
  const auto a = random_matrix(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(cnf::linalg::lu_factor(a));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LuFactor)->RangeMultiplier(2)->Range(64, 1024)->Complexity(benchmark::oNCubed);

void BM_CondSurrogateGrad(benchmark::State& state) {
  const auto a = random_matrix(static_cast<int>(state.range(0)));
  const auto f = cnf::linalg::lu_factor(a);
  for (auto _ : state) benchmark::DoNotOptimize(cnf::linalg::cond_surrogate_with_grad(a, f));
}
BENCHMARK(BM_CondSurrogateGrad)->RangeMultiplier(2)->Range(64, 512);

void BM_EncoderEval(benchmark::State& state) {
  const auto arch = cnf::EncoderArch::mlp(2, {64}, 32, cnf::Activation::kSoftplus, cnf::Activation::kLinear, 10.0);
  std::mt19937_64 rng(3);
  const auto p = cnf::glorot_init(arch, rng);
  const cnf::Point x = Eigen::Vector2d(0.2, -0.3);
  const int order = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(cnf::encoder_eval(arch, p, x, order));
}
BENCHMARK(BM_EncoderEval)->DenseRange(0, 2);

void BM_AssembleSkewedRBF(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  cnf::BasisConfig bc;
  bc.kind = "skewed_rbf";
  bc.anchors = anchors(n);
  bc.bandwidth = 0.2;
  const auto fam = cnf::init_basis(bc, 0);
  const std::vector<std::string> dims{"x", "t"};
  cnf::CoefficientRegistry coeffs;
  coeffs.set("beta", 0.1);
  const auto pde = cnf::parse_operator("dt + beta*dx", dims);
  std::vector<cnf::Constraint> rows;
  for (const auto& a : bc.anchors) rows.push_back(cnf::Constraint{pde, a, Eigen::VectorXd::Zero(1)});
  const cnf::ConstraintSet cs(rows, 1, coeffs);
  for (auto _ : state) benchmark::DoNotOptimize(cnf::assemble_matrices(*fam, cs));
}
BENCHMARK(BM_AssembleSkewedRBF)->RangeMultiplier(2)->Range(128, 1024);

void BM_AssembleGaussianKernel(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  cnf::BasisConfig bc;
  bc.kind = "gaussian_kernel";
  bc.anchors = anchors(n);
  bc.kernel_scale = 1.0;
  const auto fam = cnf::init_basis(bc, 0);
  const std::vector<std::string> dims{"x", "y"};
  std::vector<cnf::Constraint> rows;
  for (const auto& a : bc.anchors) rows.push_back(cnf::Constraint{cnf::identity_operator(dims), a, Eigen::VectorXd::Zero(1)});
  const cnf::ConstraintSet cs(rows, 1);
  for (auto _ : state) benchmark::DoNotOptimize(cnf::assemble_matrices(*fam, cs));
}
BENCHMARK(BM_AssembleGaussianKernel)->RangeMultiplier(2)->Range(128, 512);

}  // namespace

BENCHMARK_MAIN();
