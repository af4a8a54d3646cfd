#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "rtgp/errors.hpp"
#include "rtgp/rng.hpp"

namespace rtgp {

// Finite-support truncation distribution over {J_min, …, H}. Survival
// probabilities P(𝒥 ≥ j) are 1 for j ≤ J_min: the first J_min series terms
// are mandatory and enter estimates with weight 1.
struct TruncationDistribution {
  long support_min = 1;
  long support_max = 1;
  std::vector<double> pmf;       // indexed by j − support_min
  std::vector<double> cdf;       // P(𝒥 ≤ j)
  std::vector<double> survival;  // P(𝒥 ≥ j)

  long support_size() const { return support_max - support_min + 1; }
  double pmf_at(long j) const {
    return (j < support_min || j > support_max)
               ? 0.0
               : pmf[static_cast<size_t>(j - support_min)];
  }
  // P(𝒥 ≥ j); 1 below the support, 0 above it.
  double survival_at(long j) const {
    if (j <= support_min) return 1.0;
    if (j > support_max) return 0.0;
    return survival[static_cast<size_t>(j - support_min)];
  }
  double mean() const;
  double stddev() const;
};

TruncationDistribution make_from_weights(std::vector<double> weights,
                                         long support_min);

/// pmf[j] ∝ e^{−λj} on {J_min..H}; λ = 0 gives the uniform distribution.
TruncationDistribution make_exponential(double lambda, long j_min, long h);

/// pmf[j] ∝ 1/j on {J_min..H}: the variance-minimizing family for the
/// Single Sample telescope.
TruncationDistribution make_harmonic(long j_min, long h);

/// Point mass, the degenerate no-truncation case.
TruncationDistribution make_point_mass(long j);

/// Exponential distribution whose mean is as close as possible to
/// target_mean, found by scanning J_min at fixed λ.
TruncationDistribution exponential_with_mean(double lambda, double target_mean,
                                             long h);

long sample_truncation(const TruncationDistribution& dist, Rng& rng);

// Yields Δⱼ in order. Returning nullopt signals exact early termination:
// all remaining terms are zero.
template <typename T>
using SeriesSupplier = std::function<std::optional<T>()>;

// Supplier over a fixed list of terms; asking past the end is an error
// unless the list is marked exactly terminated.
template <typename T>
SeriesSupplier<T> list_supplier(std::vector<T> terms,
                                bool exact_termination = false) {
  auto state = std::make_shared<std::pair<std::vector<T>, size_t>>(
      std::move(terms), 0);
  return [state, exact_termination]() -> std::optional<T> {
    if (state->second >= state->first.size()) {
      if (exact_termination) return std::nullopt;
      throw SupplierExhausted("series supplier ran out of terms");
    }
    return state->first[state->second++];
  };
}

/// Russian Roulette estimate Σ_{j≤J} Δⱼ/P(𝒥 ≥ j). Consumes exactly J terms
/// (fewer when the supplier terminates exactly). Elementwise over vector Δ.
template <typename T>
T rr_combine(const SeriesSupplier<T>& supplier,
             const TruncationDistribution& dist, long j_sampled) {
  if (j_sampled < dist.support_min || j_sampled > dist.support_max) {
    throw ZeroProbabilitySample("rr_combine: J outside the support");
  }
  std::optional<T> first = supplier();
  if (!first) throw SupplierExhausted("rr_combine: empty series");
  T acc = *first / dist.survival_at(1);
  for (long j = 2; j <= j_sampled; ++j) {
    std::optional<T> term = supplier();
    if (!term) break;  // remaining Δ are exactly zero
    acc += *term / dist.survival_at(j);
  }
  return acc;
}

/// Single Sample estimate Δ_J/P(J); the supplier is advanced to term J only.
template <typename T>
T ss_combine(const SeriesSupplier<T>& supplier,
             const TruncationDistribution& dist, long j_sampled) {
  const double p = dist.pmf_at(j_sampled);
  if (p <= 0.0) {
    throw ZeroProbabilitySample("ss_combine: sampled term has probability 0");
  }
  std::optional<T> term;
  for (long j = 1; j <= j_sampled; ++j) {
    term = supplier();
    if (!term) throw SupplierExhausted("ss_combine: series ended before J");
  }
  return *term / p;
}

}  // namespace rtgp
