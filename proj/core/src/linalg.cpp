#include "cnf/linalg.hpp"

#include "cnf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#if defined(__SSE__) || defined(_M_X64)
#include <xmmintrin.h>
#define CNF_HAVE_MXCSR 1
#endif

namespace cnf::linalg {

namespace {

constexpr Eigen::Index kPanelWidth = 48;

// Flush-to-zero and denormals-are-zero for the current thread while in scope.
// Well-conditioned systems drive off-diagonal entries of A⁻¹ and of the LU
// updates far below 1e-300, and subnormal arithmetic in those products slows
// the dense kernels by an order of magnitude. Such values are far below
// round-off of every result, so they are treated as zero.
class FlushDenormals {
 public:
#ifdef CNF_HAVE_MXCSR
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
  ~FlushDenormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

void require_square(const DenseMatrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch(std::string(what) + ": matrix is " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + ", expected square");
  }
}

// Unblocked elimination of columns [k0, k1) over rows [k0, n). Row swaps are
// applied to whole rows so the trailing blocks stay consistent.
void factor_panel(LUFactorization& f, Eigen::Index k0, Eigen::Index k1, double threshold) {
  DenseMatrix& a = f.packed;
  const Eigen::Index n = a.rows();
  for (Eigen::Index k = k0; k < k1; ++k) {
    Eigen::Index p = k;
    double best = std::abs(a(k, k));
    for (Eigen::Index r = k + 1; r < n; ++r) {
      const double v = std::abs(a(r, k));
      if (v > best) {
        best = v;
        p = r;
      }
    }
    if (!(best >= threshold) || best == 0.0) {
      throw SingularMatrix(static_cast<std::size_t>(k),
                           "singular matrix: pivot " + std::to_string(k) + " has magnitude " +
                               std::to_string(best));
    }
    if (p != k) {
      a.row(k).swap(a.row(p));
      std::swap(f.perm[k], f.perm[p]);
      f.sign = -f.sign;
    }
    const double inv = 1.0 / a(k, k);
    const Eigen::Index below = n - k - 1;
    if (below == 0) continue;
    a.col(k).tail(below) *= inv;
    const Eigen::Index right = k1 - k - 1;
    if (right > 0) {
      a.block(k + 1, k + 1, below, right).noalias() -=
          a.col(k).tail(below) * a.row(k).segment(k + 1, right);
    }
  }
}

Vector permute(const LUFactorization& f, const Vector& b) {
  Vector out(b.size());
  for (Eigen::Index i = 0; i < b.size(); ++i) out[i] = b[f.perm[i]];
  return out;
}

RhsBlock permute(const LUFactorization& f, const RhsBlock& b) {
  RhsBlock out(b.rows(), b.cols());
  for (Eigen::Index i = 0; i < b.rows(); ++i) out.row(i) = b.row(f.perm[i]);
  return out;
}

template <typename V>
void check_rhs(const LUFactorization& f, const V& b, const char* what) {
  if (b.rows() != f.order()) {
    throw DimensionMismatch(std::string(what) + ": rhs has " + std::to_string(b.rows()) +
                            " rows, system order is " + std::to_string(f.order()));
  }
}

}  // namespace

void require_finite(const DenseMatrix& a, const char* what) {
  if (!a.allFinite()) throw NonFiniteValue(std::string(what) + ": matrix has non-finite entries");
}

LUFactorization lu_factor(DenseMatrix a) {
  const FlushDenormals ftz;
  require_square(a, "lu_factor");
  require_finite(a, "lu_factor");
  LUFactorization f;
  const Eigen::Index n = a.rows();
  f.max_abs = n ? a.cwiseAbs().maxCoeff() : 0.0;
  f.packed = std::move(a);
  f.perm.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) f.perm[i] = i;
  const double threshold = kSingularPivotTolerance * f.max_abs;

  DenseMatrix& m = f.packed;
  for (Eigen::Index k0 = 0; k0 < n; k0 += kPanelWidth) {
    const Eigen::Index k1 = std::min(n, k0 + kPanelWidth);
    factor_panel(f, k0, k1, threshold);
    const Eigen::Index b = k1 - k0;
    const Eigen::Index rest = n - k1;
    if (rest == 0) continue;
    // U12 = L11⁻¹ A12, then A22 -= L21 U12.
    m.block(k0, k1, b, rest) =
        m.block(k0, k0, b, b).triangularView<Eigen::UnitLower>().solve(m.block(k0, k1, b, rest));
    m.block(k1, k1, rest, rest).noalias() -= m.block(k1, k0, rest, b) * m.block(k0, k1, b, rest);
  }
  return f;
}

Vector lu_solve(const LUFactorization& f, const Vector& b) {
  const FlushDenormals ftz;
  check_rhs(f, b, "lu_solve");
  Vector x = permute(f, b);
  f.packed.triangularView<Eigen::UnitLower>().solveInPlace(x);
  f.packed.triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

RhsBlock lu_solve(const LUFactorization& f, const RhsBlock& b) {
  const FlushDenormals ftz;
  check_rhs(f, b, "lu_solve");
  RhsBlock x = permute(f, b);
  f.packed.triangularView<Eigen::UnitLower>().solveInPlace(x);
  f.packed.triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

Vector lu_solve_transpose(const LUFactorization& f, const Vector& v) {
  const FlushDenormals ftz;
  check_rhs(f, v, "lu_solve_transpose");
  // Aᵀ = Uᵀ Lᵀ P, so solve Uᵀ y = v, Lᵀ z = y, x = Pᵀ z.
  Vector z = v;
  f.packed.transpose().triangularView<Eigen::Lower>().solveInPlace(z);
  f.packed.transpose().triangularView<Eigen::UnitUpper>().solveInPlace(z);
  Vector x(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) x[f.perm[i]] = z[i];
  return x;
}

RhsBlock lu_solve_transpose(const LUFactorization& f, const RhsBlock& v) {
  const FlushDenormals ftz;
  check_rhs(f, v, "lu_solve_transpose");
  RhsBlock z = v;
  f.packed.transpose().triangularView<Eigen::Lower>().solveInPlace(z);
  f.packed.transpose().triangularView<Eigen::UnitUpper>().solveInPlace(z);
  RhsBlock x(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) x.row(f.perm[i]) = z.row(i);
  return x;
}

DenseMatrix lu_inverse(const LUFactorization& f) {
  const Eigen::Index n = f.order();
  return lu_solve(f, RhsBlock(RhsBlock::Identity(n, n)));
}

DenseMatrix lu_reconstruct(const LUFactorization& f) {
  const Eigen::Index n = f.order();
  DenseMatrix lower = f.packed.triangularView<Eigen::UnitLower>();
  DenseMatrix upper = f.packed.triangularView<Eigen::Upper>();
  DenseMatrix pa = lower * upper;
  DenseMatrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) a.row(f.perm[i]) = pa.row(i);
  return a;
}

double cond_surrogate(const DenseMatrix& a, const LUFactorization& f) {
  return a.norm() * lu_inverse(f).norm();
}

double cond_surrogate(const DenseMatrix& a) {
  try {
    return cond_surrogate(a, lu_factor(a));
  } catch (const SingularMatrix&) {
    return std::numeric_limits<double>::infinity();
  }
}

CondGradient cond_surrogate_with_grad(const DenseMatrix& a, const LUFactorization& f) {
  return cond_surrogate_with_grad(a, lu_inverse(f));
}

CondGradient cond_surrogate_with_grad(const DenseMatrix& a, const DenseMatrix& x) {
  const FlushDenormals ftz;
  const double na = a.norm();
  const double nx = x.norm();
  // ∂‖A⁻¹‖_F/∂A = −A⁻ᵀ (A⁻¹ A⁻ᵀ) / ‖A⁻¹‖_F
  DenseMatrix xxt = x * x.transpose();
  DenseMatrix inner = x.transpose() * xxt;
  CondGradient out;
  out.cond = na * nx;
  out.grad = (nx / na) * a - (na / nx) * inner;
  return out;
}

DenseMatrix cond_surrogate_grad(const DenseMatrix& a) {
  return cond_surrogate_with_grad(a, lu_factor(a)).grad;
}

}  // namespace cnf::linalg
