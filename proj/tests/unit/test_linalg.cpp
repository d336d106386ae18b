#include "doctest.h"
#include "oracles.hpp"

#include "cnf/diff.hpp"
#include "cnf/errors.hpp"
#include "cnf/linalg.hpp"

#include <cmath>
#include <limits>

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

using namespace cnf;
using linalg::DenseMatrix;

TEST_CASE("lu_solve agrees with Gauss-Jordan on random systems") {
  std::mt19937_64 rng(1);
  for (int n : {1, 2, 3, 7, 20, 50}) {
    const DenseMatrix a = oracle::random_matrix(n, rng, 0.5);
    const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(n, -1.0, 2.0);
    const Eigen::VectorXd x = linalg::lu_solve(linalg::lu_factor(a), b);
    CHECK((x - oracle::gauss_jordan(a, b)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("factorization reconstructs the matrix") {
  std::mt19937_64 rng(2);
  for (int n : {1, 4, 16, 33}) {
    const DenseMatrix a = oracle::random_matrix(n, rng);
    const auto f = linalg::lu_factor(a);
    CHECK((linalg::lu_reconstruct(f) - a).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(f.perm.size() == static_cast<std::size_t>(n));
    CHECK(std::abs(f.sign) == 1);
  }
}

TEST_CASE("pivoting handles a zero leading entry") {
  DenseMatrix a(2, 2);
  a << 0, 1, 1, 0;
  const Eigen::VectorXd x = linalg::lu_solve(linalg::lu_factor(a), Eigen::VectorXd(Eigen::Vector2d(3, 4)));
  CHECK(x[0] == doctest::Approx(4));
  CHECK(x[1] == doctest::Approx(3));
}

TEST_CASE("transpose solve and inverse") {
  std::mt19937_64 rng(3);
  const DenseMatrix a = oracle::random_matrix(12, rng, 1.0);
  const auto f = linalg::lu_factor(a);
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(12, 0.0, 1.0);
  CHECK((a.transpose() * linalg::lu_solve_transpose(f, v) - v).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((linalg::lu_inverse(f) - oracle::inverse(a)).cwiseAbs().maxCoeff() < 1e-10);

  Eigen::MatrixXd rhs(12, 3);
  rhs.setRandom();
  CHECK((a * linalg::lu_solve(f, rhs) - rhs).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.transpose() * linalg::lu_solve_transpose(f, rhs) - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("singular and non-finite matrices are rejected") {
  DenseMatrix a(3, 3);
  a << 1, 2, 3, 2, 4, 6, 0, 1, 1;
  CHECK_THROWS_AS(linalg::lu_factor(a), SingularMatrix);
  CHECK(std::isinf(linalg::cond_surrogate(a)));
  CHECK_THROWS_AS(linalg::lu_factor(DenseMatrix::Zero(2, 2)), SingularMatrix);
  a(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(linalg::lu_factor(a), NonFiniteValue);
  CHECK_THROWS_AS(linalg::lu_factor(DenseMatrix(2, 3)), DimensionMismatch);
}

TEST_CASE("condition surrogate") {
  CHECK(linalg::cond_surrogate(DenseMatrix::Identity(5, 5)) == doctest::Approx(5.0));
  DenseMatrix d = DenseMatrix::Zero(2, 2);
  d(0, 0) = 10.0;
  d(1, 1) = 0.1;
  CHECK(linalg::cond_surrogate(d) == doctest::Approx(std::hypot(10.0, 0.1) * std::hypot(0.1, 10.0)));

  std::mt19937_64 rng(4);
  for (int n : {2, 5, 9}) {
    const DenseMatrix a = oracle::random_matrix(n, rng);
    const double k = linalg::cond_surrogate(a);
    const double k2 = oracle::cond2(a);
    // κ₂ ≤ κ̃ ≤ n·κ₂ and κ̃ ≥ n
    CHECK(k >= k2 * (1 - 1e-8));
    CHECK(k <= n * k2 * (1 + 1e-8));
    CHECK(k >= n * (1 - 1e-12));
    CHECK(linalg::cond_surrogate(3.7 * a) == doctest::Approx(k).epsilon(1e-12));
  }
}

TEST_CASE("condition surrogate gradient matches finite differences") {
  std::mt19937_64 rng(5);
  for (int n : {2, 4, 6}) {
    const DenseMatrix a = oracle::random_matrix(n, rng, 1.0);
    const DenseMatrix g = linalg::cond_surrogate_grad(a);
    std::vector<double> at(a.data(), a.data() + a.size());
    std::vector<double> an(g.data(), g.data() + g.size());
    auto f = [n](const std::vector<double>& v) {
      return linalg::cond_surrogate(Eigen::Map<const DenseMatrix>(v.data(), n, n));
    };
    CHECK(fd_check(f, at, an, 1e-8) < 1e-5);

    const auto f1 = linalg::lu_factor(a);
    const auto cg = linalg::cond_surrogate_with_grad(a, f1);
    const auto cg2 = linalg::cond_surrogate_with_grad(a, linalg::lu_inverse(f1));
    CHECK((cg.grad - g).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(cg2.cond == doctest::Approx(cg.cond));
  }
}

#if defined(__SSE__)
TEST_CASE("dense routines restore the caller's floating-point mode") {
  std::mt19937_64 rng(11);
  const DenseMatrix a = oracle::random_matrix(12, rng, 3.0);
  const unsigned before = _mm_getcsr();
  const auto f = linalg::lu_factor(a);
  const auto cg = linalg::cond_surrogate_with_grad(a, f);
  CHECK(std::isfinite(cg.cond));
  CHECK(_mm_getcsr() == before);
  volatile double tiny = std::numeric_limits<double>::denorm_min();
  CHECK(tiny * 2.0 != 0.0);
}
#endif
