#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "rtgp/exact_gp.hpp"
#include "rtgp/kernels.hpp"
#include "rtgp/numerics.hpp"

namespace rtgp {

// Symmetric positive definite operator presented as a matvec.
struct LinearOperator {
  Index n = 0;
  std::function<Vector(const Vector&)> apply;

  // Wraps a dense matrix; the matrix must outlive the operator.
  static LinearOperator dense(const Matrix& a) {
    return {a.rows(), [&a](const Vector& v) -> Vector { return a * v; }};
  }
};

// SPD operator approximating K̂⁻¹. Identity unless built by
// pivoted_cholesky.
struct Preconditioner {
  enum class Kind { identity, pivoted_cholesky };
  Kind kind = Kind::identity;
  Index rank = 0;
  std::function<Vector(const Vector&)> apply;

  static Preconditioner identity() { return {}; }
  Vector operator()(const Vector& v) const { return apply ? apply(v) : v; }
};

// Full per-iteration record of one CG solve. Increments are the γⱼdⱼ terms
// of the solution series; RR-CG reweights them individually, which is why
// they are stored rather than just their sum.
struct CGTrace {
  Index n = 0;                     // system size
  std::vector<Vector> increments;  // γⱼ·dⱼ, one per iteration
  std::vector<double> alphas;
  std::vector<double> betas;           // β₁.. (betas[j] pairs iteration j+1)
  std::vector<double> residual_norms;  // ‖rⱼ‖₂ after each iteration
  SymTridiagonal tridiag;              // Lanczos coefficients, J×J
  std::optional<Index> converged_at;   // iteration index (1-based)

  Index iterations() const { return static_cast<Index>(increments.size()); }
  // xⱼ = Σ_{i≤j} increments[i]; j is 1-based, j=0 gives the zero vector.
  Vector partial_solution(Index j) const;
  Vector solution() const { return partial_solution(iterations()); }
};

struct MbcgResult {
  Matrix solutions;             // one column per rhs
  std::vector<CGTrace> traces;  // one per rhs column
};

/// Preconditioned CG over a block of right-hand sides with full trace
/// recording. Each column runs until its residual 2-norm drops to tol or
/// max_iter is reached; converged columns stop contributing increments.
/// Tridiagonal entries follow the Lanczos-CG identities
/// [T]ⱼⱼ = 1/αⱼ + β_{j−1}/α_{j−1} and [T]_{j−1,j} = √β_{j−1}/α_{j−1}.
MbcgResult mbcg(const LinearOperator& a, const Matrix& b,
                const Preconditioner& precond, Index max_iter, double tol);

/// Greedy diagonal-pivot low-rank factor L_r of the noiseless kernel; the
/// preconditioner applies (L_r·L_rᵀ + σ²I)⁻¹ via Woodbury. rank 0 returns
/// the identity preconditioner.
Preconditioner pivoted_cholesky(const Matrix& k, Index rank, double noise_sq);

/// u₁..u_J with uⱼ = yᵀxⱼ: the CG estimates of yᵀK̂⁻¹y after j iterations.
/// Nondecreasing in j; each underestimates the exact inverse quadratic.
Vector invquad_cg(const CGTrace& trace, const Vector& y);

/// v₁..v_J: probe-averaged stochastic Lanczos quadrature estimates of
/// log|K̂|, vⱼ = mean over probes of ‖z‖²·e₁ᵀ(log T^(j))e₁ on the leading
/// j×j tridiagonal block. Probes must be Rademacher so ‖z‖² = N.
Vector slq_logdet(const std::vector<CGTrace>& traces, const ProbeSet& probes);

/// Same estimate evaluated only at the requested block sizes (column order
/// matches `js`); blocks past a converged trace clamp to the last one.
Vector slq_logdet_at(const std::vector<CGTrace>& traces, const ProbeSet& probes,
                     const std::vector<Index>& js);

/// Single-probe SLQ values at every prefix 1..J of one trace.
Vector slq_prefix_values(const CGTrace& trace, double probe_sqnorm);

/// Early-truncated stochastic gradient: CG solves capped at J for K̂⁻¹zᵢ
/// (averaged over probes) and K̂⁻¹y, assembled into
/// ½(zᵀK̂⁻¹(∂K̂/∂θ)z − yᵀK̂⁻¹(∂K̂/∂θ)K̂⁻¹y). Biased for J < N.
Vector stochastic_grad_cg(const Dataset& data, const Hyperparams& theta,
                          const ProbeSet& probes, Index max_iter,
                          const Preconditioner& precond, double tol = 0.0);

/// Early-truncated CG estimate of both likelihood terms from one mBCG run
/// on [y | probes]: invquad u_J and probe-averaged SLQ logdet v_J.
MLLTerms cg_mll_estimate(const Dataset& data, const Hyperparams& theta,
                         const ProbeSet& probes, Index max_iter,
                         const Preconditioner& precond, double tol = 0.0);

}  // namespace rtgp
