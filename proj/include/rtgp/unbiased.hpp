#pragma once

#include "rtgp/exact_gp.hpp"
#include "rtgp/krylov.hpp"
#include "rtgp/rff.hpp"
#include "rtgp/truncation.hpp"

namespace rtgp {

struct RRCGSolve {
  Vector estimate;
  long j_sampled = 0;
};

/// Russian Roulette CG solve: runs CG for a sampled J iterations and
/// reweights each solution increment γⱼdⱼ by 1/P(𝒥 ≥ j). Unbiased for
/// A⁻¹b at any truncation distribution over {J_min..N}.
RRCGSolve rrcg_solve(const LinearOperator& a, const Vector& b,
                     const TruncationDistribution& dist,
                     const Preconditioner& precond, Rng& rng);

/// Unbiased stochastic gradient: assembles
/// ½(zᵀK̂⁻¹(∂K̂/∂θ)z − yᵀK̂⁻¹(∂K̂/∂θ)K̂⁻¹y) from three independent RR-CG
/// solves (K̂⁻¹z per probe, and separate left/right K̂⁻¹y), each with its
/// own sampled J and RNG stream. Reusing one y-solve for both sides of the
/// quadratic term would bias the estimate; see rrcg_grad_shared_solve.
/// When j_out is given it receives the sampled truncations in solve order.
Vector rrcg_grad(const Dataset& data, const Hyperparams& theta,
                 const TruncationDistribution& dist, const ProbeSet& probes,
                 const Preconditioner& precond, Rng& rng,
                 std::vector<long>* j_out = nullptr);

/// Negative control: same assembly but one RR-CG y-solve reused on both
/// sides of the quadratic term. Biased; kept for the unbiasedness tests.
Vector rrcg_grad_shared_solve(const Dataset& data, const Hyperparams& theta,
                              const TruncationDistribution& dist,
                              const ProbeSet& probes,
                              const Preconditioner& precond, Rng& rng);

struct RRLogdetEstimate {
  double estimate = 0.0;
  long j_sampled = 0;
};

/// Russian Roulette telescope over single-probe SLQ partial estimates,
/// Δⱼ = ‖z‖²e₁ᵀ(log T^(j) − log T^(j−1))e₁. Unbiased for zᵀ(log K̂)z and
/// hence for log|K̂| in expectation over Rademacher probes. Diagnostic
/// only; training never needs the objective itself.
RRLogdetEstimate rrcg_logdet_telescope(const Dataset& data,
                                       const Hyperparams& theta,
                                       const TruncationDistribution& dist,
                                       const Vector& probe, Rng& rng);

/// Operator-level variant for callers that already hold K̂.
RRLogdetEstimate rrcg_logdet_telescope(const LinearOperator& a,
                                       const TruncationDistribution& dist,
                                       const Vector& probe, Rng& rng);

// Single Sample RFF telescope configuration. Interior block j evaluates
// the likelihood with c·j + J₀ feature pairs; the closing block
// (support_max) swaps in the exact dense term so the telescope sums to the
// true value.
struct SSRFFConfig {
  Index base_pairs = 1;  // J₀
  Index step = 1;        // c
  TruncationDistribution dist;

  Index pairs_for_block(long j) const {
    return base_pairs + step * static_cast<Index>(j);
  }
  // Largest feature-pair count any draw may need.
  Index max_pairs() const { return pairs_for_block(dist.support_max - 1); }
  void validate(Index n) const;
};

struct SSRFFEstimate {
  MLLTerms terms;
  long j_sampled = 0;
  bool closing_block = false;  // drew the O(N³) dense term
};

// One replica's randomness: a sampled block index and a nested feature
// draw sized for the largest block. J is sampled before ω so the terms
// stay independent of the truncation index.
struct SSRFFDraw {
  RFFFeatures features;
  long j_sampled = 0;
};

SSRFFDraw ssrff_draw(const Dataset& data, const Hyperparams& theta,
                     const SSRFFConfig& cfg, Rng& rng);

/// Single Sample RFF estimate of the likelihood terms: base term at J₀
/// pairs plus Δ_J/P(J), with nested (prefix-shared) features inside the
/// replica. logdet and invquad share one sampled J and one ω draw.
SSRFFEstimate ssrff_mll(const Dataset& data, const Hyperparams& theta,
                        const SSRFFConfig& cfg, Rng& rng);

/// Same estimate evaluated for a fixed feature draw and block index;
/// exposed so the conditional telescoping identity can be enumerated.
SSRFFEstimate ssrff_mll_fixed(const Dataset& data, const Hyperparams& theta,
                              const SSRFFConfig& cfg,
                              const RFFFeatures& features, long j_sampled);

/// Gradient of the Single Sample estimate with respect to raw θ under
/// frozen randomness: ∇(base) + (∇term_J − ∇term_{J−1})/P(J), closing
/// block via the exact gradient.
Vector ssrff_grad(const Dataset& data, const Hyperparams& theta,
                  const SSRFFConfig& cfg, Rng& rng);

Vector ssrff_grad_fixed(const Dataset& data, const Hyperparams& theta,
                        const SSRFFConfig& cfg, const RFFFeatures& features,
                        long j_sampled);

}  // namespace rtgp
