#pragma once

#include <cstdint>

#include "rtgp/exact_gp.hpp"
#include "rtgp/kernels.hpp"
#include "rtgp/rng.hpp"

namespace rtgp {

// Random Fourier frequencies for the RBF kernel. The raw draw is kept as
// standard normals; ω = base/ℓ is derived at use time so that lengthscale
// gradients can flow through a frozen draw (reparameterization).
struct RFFFeatures {
  Matrix base_normals;       // J/2 × d standard normals
  Matrix omega;              // base_normals scaled by 1/ℓ at theta_at_draw
  std::uint64_t seed = 0;
  Hyperparams theta_at_draw;

  Index pair_count() const { return base_normals.rows(); }  // J/2
  Index feature_count() const { return 2 * base_normals.rows(); }  // J
  Matrix omega_at(const Hyperparams& theta) const;
};

// Φ with paired cos/sin columns; each row has squared norm o² exactly.
struct FeatureMatrix {
  Matrix phi;   // N × 2m
  double scale; // √(2o²/J) with J = 2m

  Index feature_count() const { return phi.cols(); }
};

/// Draws J/2 frequencies from the RBF spectral density N(0, diag(1/ℓₖ²)).
/// J counts basis functions (columns of Φ), so it must be even.
RFFFeatures sample_features(const Hyperparams& theta, Index d, Index j,
                            Rng& rng);

/// Feature map from the first m frequency rows (nested prefix): columns
/// [cos(ωᵢᵀx), sin(ωᵢᵀx)]·√(2o²/(2m)) for i = 1..m.
FeatureMatrix feature_map(const Matrix& x, const RFFFeatures& features,
                          Index m);

/// Same map with ω and o² re-derived from an explicit θ over the frozen
/// base normals; used by gradients and finite-difference checks.
FeatureMatrix feature_map_at(const Matrix& x, const RFFFeatures& features,
                             const Hyperparams& theta, Index m);

/// Likelihood terms of K̃ = ΦΦᵀ + σ²I at O(NJ² + J³) via the Woodbury
/// identity and the matrix determinant lemma:
///   invquad = (yᵀy − yᵀΦ(ΦᵀΦ+σ²I)⁻¹Φᵀy)/σ²
///   logdet  = log|ΦᵀΦ+σ²I| − J·log σ² + N·log σ²
MLLTerms mll_rff(const FeatureMatrix& phi, const Vector& y, double noise_sq);

/// Gradient of the RFF total_nll with respect to the raw parameters, for a
/// frozen base-normal draw (ω = base/ℓ differentiates through the draw).
Vector grad_rff(const Dataset& data, const Hyperparams& theta,
                const RFFFeatures& features, Index m);

}  // namespace rtgp
