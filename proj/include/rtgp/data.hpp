#pragma once

#include <string>

#include "rtgp/kernels.hpp"
#include "rtgp/rng.hpp"

namespace rtgp {

/// Draws y ~ N(0, K + σ²I) at the given inputs: y = L·ε + σ·ε′ with L the
/// Cholesky factor of the noiseless kernel (jitter 1e-10 tolerated here).
Vector sample_gp_prior(const Matrix& x, const Hyperparams& theta, Rng& rng);

/// Toy regression problem y = x·sin(5πx) + ε, ε ~ N(0, noise_sd²), inputs
/// on a uniform grid over [0, 1].
Dataset gen_toy_sine(Index n, double noise_sd, Rng& rng);

/// Synthetic GP-prior dataset: uniform random inputs in [0,1]^d, targets
/// sampled from the prior at θ.
Dataset gen_gp_dataset(Index n, Index d, const Hyperparams& theta, Rng& rng);

/// Loads a rectangular numeric CSV with header; splits off target_column
/// and optionally z-scores features and target, recording the transform.
Dataset load_csv(const std::string& path, const std::string& target_column,
                 bool standardize = true);

/// Undoes target standardization for predictions.
Vector unstandardize_target(const Dataset& data, const Vector& y);

}  // namespace rtgp
