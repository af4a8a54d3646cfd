#pragma once

#include "rtgp/kernels.hpp"

namespace rtgp {

// Negative log marginal likelihood split into its two expensive terms.
struct MLLTerms {
  double logdet = 0.0;     // log|K̂|
  double invquad = 0.0;    // yᵀK̂⁻¹y
  double total_nll = 0.0;  // ½(logdet + invquad + N·log 2π)

  static MLLTerms from_parts(double logdet, double invquad, Index n);
};

/// Exact terms via Cholesky: logdet from the factor diagonal, invquad from
/// triangular solves. This is the ground-truth path for everything else.
MLLTerms mll_exact(const Dataset& data, const Hyperparams& theta);

/// Exact gradient of total_nll with respect to the raw parameters,
/// ½(tr(K̂⁻¹ ∂K̂/∂θ) − yᵀK̂⁻¹ ∂K̂/∂θ K̂⁻¹y) per coordinate. K̂⁻¹ is
/// materialized once per call; O(N³) but maximally trustworthy.
Vector grad_exact(const Dataset& data, const Hyperparams& theta);

struct Posterior {
  Vector mean;
  Vector variance;  // includes observation noise σ²
};

/// Exact GP posterior at test inputs.
Posterior posterior_predict(const Dataset& data, const Hyperparams& theta,
                            const Matrix& xstar);

}  // namespace rtgp
