#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace cnf::linalg {

/// Dense row-major real matrix. Collocation matrices and every other square
/// system in the library use this layout.
using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
/// Column-major block of right-hand sides (one system per column).
using RhsBlock = Eigen::MatrixXd;

/// A pivot whose magnitude falls below this fraction of max|A| marks the
/// matrix as numerically singular.
inline constexpr double kSingularPivotTolerance = 1e-13;

/// Packed LU factorization with partial (row) pivoting: P·A = L·U.
///
/// `packed` holds the strictly-lower part of the unit-lower L and the upper
/// triangle U. Row i of P·A is row `perm[i]` of A.
struct LUFactorization {
  DenseMatrix packed;
  std::vector<Eigen::Index> perm;
  int sign = 1;
  /// max|A| of the factored matrix, kept for the pivot threshold.
  double max_abs = 0.0;

  Eigen::Index order() const { return packed.rows(); }
};

/// Throws NonFiniteValue if any entry is NaN or infinite.
void require_finite(const DenseMatrix& a, const char* what);

/// Factors a square matrix. Throws SingularMatrix (carrying the elimination
/// step) when a pivot is below kSingularPivotTolerance·max|A|.
LUFactorization lu_factor(DenseMatrix a);

Vector lu_solve(const LUFactorization& f, const Vector& b);
RhsBlock lu_solve(const LUFactorization& f, const RhsBlock& b);

/// Solves Aᵀ·x = v with the factorization of A.
Vector lu_solve_transpose(const LUFactorization& f, const Vector& v);
RhsBlock lu_solve_transpose(const LUFactorization& f, const RhsBlock& v);

/// A⁻¹ assembled from n solves.
DenseMatrix lu_inverse(const LUFactorization& f);

/// Reconstructs Pᵀ·L·U; used by tests and diagnostics.
DenseMatrix lu_reconstruct(const LUFactorization& f);

/// κ̃(A) = ‖A‖_F · ‖A⁻¹‖_F. Returns +inf when A is singular.
double cond_surrogate(const DenseMatrix& a);
double cond_surrogate(const DenseMatrix& a, const LUFactorization& f);

struct CondGradient {
  double cond = 0.0;
  DenseMatrix grad;  ///< ∂κ̃/∂A entrywise
};

/// Condition surrogate and its gradient with respect to every entry of A,
/// reusing an existing factorization.
CondGradient cond_surrogate_with_grad(const DenseMatrix& a, const LUFactorization& f);
/// Same, from an already materialized A⁻¹.
CondGradient cond_surrogate_with_grad(const DenseMatrix& a, const DenseMatrix& inverse);

/// ∂κ̃/∂A. Throws SingularMatrix if A cannot be factored.
DenseMatrix cond_surrogate_grad(const DenseMatrix& a);

}  // namespace cnf::linalg
