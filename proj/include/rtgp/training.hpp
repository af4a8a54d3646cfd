#pragma once

#include <limits>
#include <string>
#include <vector>

#include "rtgp/unbiased.hpp"

namespace rtgp {

enum class TrainMethod { cholesky, cg, rr_cg, rff, ss_rff };

std::string to_string(TrainMethod m);
TrainMethod train_method_from_string(const std::string& s);

struct TrainConfig {
  TrainMethod method = TrainMethod::cholesky;
  Index iters = 100;
  double lr = 0.1;
  std::vector<double> schedule_milestones = {0.5, 0.7, 0.9};
  double schedule_factor = 0.1;
  std::uint64_t seed = 0;

  // cg / rr_cg
  Index cg_max_iter = 20;          // J for the fixed-truncation method
  double rr_lambda = 0.1;          // exponential decay rate
  Index rr_j_min = 1;              // minimum truncation
  double rr_expected_j = 0.0;      // when > 0, picks J_min to hit this mean
  Index probe_count = 1;           // t in the stochastic trace term
  Index precond_rank = 0;          // pivoted Cholesky rank, 0 = identity

  // rff / ss_rff
  Index feature_count = 100;       // J basis functions for rff
  Index ssrff_base_pairs = 4;      // J₀
  Index ssrff_step = 1;            // c
  bool freeze_features = false;    // keep one ω draw across steps (FD tests)

  // telemetry
  bool exact_telemetry = true;     // Cholesky total_nll per step when N allows
  Index exact_telemetry_max_n = 1500;

  // parameters held fixed during optimization (flat layout); empty = none
  std::vector<Index> frozen_params;

  void validate() const;
};

struct OptimState {
  Vector first_moment;
  Vector second_moment;
  long step_count = 0;
};

/// Bias-corrected Adam update (β₁ = 0.9, β₂ = 0.999, ε = 1e-8). Returns
/// the parameter delta; the state is advanced in place.
Vector adam_step(OptimState& state, const Vector& grad, double lr);

struct TrainStep {
  Index step = 0;
  Vector theta_raw;
  double approx_objective = std::numeric_limits<double>::quiet_NaN();
  double exact_nll = std::numeric_limits<double>::quiet_NaN();
  double grad_norm = 0.0;               // in unconstrained space
  std::vector<long> sampled_j;          // truncations drawn this step
  double lr = 0.0;
  double wall_ms = 0.0;
};

struct TrainRecord {
  TrainConfig config;
  std::vector<TrainStep> steps;
  Hyperparams theta_final;
};

/// u = log θ elementwise (positivity via log reparameterization).
Vector to_unconstrained(const Hyperparams& theta);
Hyperparams from_unconstrained(const Vector& u, Index lengthscale_count);

/// Chain rule to u-space: ∂L/∂u = ∂L/∂θ ∘ θ.
Vector grad_to_unconstrained(const Vector& grad_raw, const Vector& theta_raw);

/// Scheduled learning rate at a 0-based step: lr·factor^(#milestones ≤ step).
double scheduled_lr(const TrainConfig& cfg, Index step);

/// Runs `iters` Adam steps in unconstrained space with per-step derived
/// RNG streams. Fresh probes/features/truncations every step.
TrainRecord train(const Dataset& data, const Hyperparams& theta0,
                  const TrainConfig& cfg);

}  // namespace rtgp
