#pragma once

#include <optional>
#include <vector>

#include "rtgp/numerics.hpp"

namespace rtgp {

// RBF kernel hyperparameters. Lengthscales hold either one shared value or
// one per input dimension (ARD).
struct Hyperparams {
  double outputscale_sq = 1.0;  // o²
  Vector lengthscales;          // ℓ, length 1 or d
  double noise_sq = 0.1;        // σ²

  static Hyperparams isotropic(double outputscale_sq, double lengthscale,
                               double noise_sq) {
    Hyperparams h;
    h.outputscale_sq = outputscale_sq;
    h.lengthscales = Vector::Constant(1, lengthscale);
    h.noise_sq = noise_sq;
    return h;
  }

  // Number of free parameters: o², each ℓ, σ².
  Index param_count() const { return lengthscales.size() + 2; }
  double lengthscale_for_dim(Index k) const {
    return lengthscales.size() == 1 ? lengthscales(0) : lengthscales(k);
  }
  void validate(Index d) const;
};

// Which raw parameter a derivative is taken with respect to.
struct ParamRef {
  enum class Kind { outputscale_sq, lengthscale, noise_sq };
  Kind kind = Kind::outputscale_sq;
  Index lengthscale_index = 0;
};

// Flat layout used for gradient vectors: [o², ℓ₀ … ℓ_{L−1}, σ²].
ParamRef param_at(const Hyperparams& theta, Index flat_index);
Vector params_to_vector(const Hyperparams& theta);
Hyperparams params_from_vector(const Vector& v, Index lengthscale_count);

struct Standardization {
  Vector feature_means;
  Vector feature_scales;
  double target_mean = 0.0;
  double target_scale = 1.0;
};

struct Dataset {
  Matrix x;  // N×d
  Vector y;  // N
  std::optional<Standardization> standardization;

  Index size() const { return x.rows(); }
  Index dim() const { return x.cols(); }
};

/// K̂[i,j] = o²·exp(−½ Σₖ (xᵢₖ−xⱼₖ)²/ℓₖ²) + σ²·𝕀[i=j] (noise optional).
/// Both triangles are filled from one computation, so K = Kᵀ exactly.
Matrix kernel_matrix(const Matrix& x, const Hyperparams& theta,
                     bool include_noise = true);

/// ∂K̂/∂θ for one raw parameter: ∂K̂/∂σ² = I, ∂K̂/∂o² = K/o²,
/// ∂K̂/∂ℓₖ = K ∘ Dₖ/ℓₖ³ with Dₖ the pairwise squared k-coordinate distances.
Matrix kernel_grad(const Matrix& x, const Hyperparams& theta,
                   const ParamRef& param);

/// M×N noiseless kernel between test and training inputs.
Matrix cross_kernel(const Matrix& xstar, const Matrix& x,
                    const Hyperparams& theta);

}  // namespace rtgp
