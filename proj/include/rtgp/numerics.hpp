#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "rtgp/errors.hpp"

namespace rtgp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Lower-triangular L with L·Lᵀ = A + jitter·I.
/// Throws NotPositiveDefinite when a pivot is ≤ 0 after jitter (σ² too
/// small or corrupt input).
Matrix cholesky_factor(const Matrix& a, double jitter = 0.0);

/// Solves (L·Lᵀ)·X = B by forward/back substitution against a factor from
/// cholesky_factor.
Matrix solve_posdef(const Matrix& chol_lower, const Matrix& b);
Vector solve_posdef(const Matrix& chol_lower, const Vector& b);

/// log|L·Lᵀ| = 2·Σ log Lᵢᵢ.
double logdet_from_chol(const Matrix& chol_lower);

struct SymTridiagonal {
  Vector diag;     // length J
  Vector offdiag;  // length J−1

  Index size() const { return diag.size(); }
  // Leading j×j block; Lanczos nesting makes these the partial
  // tridiagonalizations after j iterations.
  SymTridiagonal leading(Index j) const {
    return {diag.head(j), offdiag.head(j > 0 ? j - 1 : 0)};
  }
  Matrix dense() const;
};

struct TridiagEig {
  Vector eigenvalues;       // ascending
  Vector first_components;  // e₁ row of the eigenvector matrix, Σ w² = 1
};

/// Eigendecomposition of a symmetric tridiagonal matrix by implicit-shift
/// QL with Wilkinson shifts. Only the first row of the eigenvector matrix
/// is accumulated: that is all e₁ᵀ f(T) e₁ = Σ wᵢ² f(λᵢ) needs.
TridiagEig eig_sym_tridiag(const SymTridiagonal& t);

enum class ProbeKind { rademacher, gaussian };

struct ProbeSet {
  Matrix probes;  // n×t, one probe per column
  ProbeKind kind = ProbeKind::rademacher;
  std::uint64_t seed = 0;

  Index count() const { return probes.cols(); }
  Index dim() const { return probes.rows(); }
};

/// t zero-mean unit-covariance probe vectors of length n, reproducible by
/// seed. Rademacher probes have ‖z‖² = n exactly.
ProbeSet sample_probes(Index n, Index t, ProbeKind kind, std::uint64_t seed);

}  // namespace rtgp
