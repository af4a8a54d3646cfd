#include "rtgp/truncation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rtgp {

double TruncationDistribution::mean() const {
  double m = 0.0;
  for (long j = support_min; j <= support_max; ++j) {
    m += static_cast<double>(j) * pmf_at(j);
  }
  return m;
}

double TruncationDistribution::stddev() const {
  const double m = mean();
  double v = 0.0;
  for (long j = support_min; j <= support_max; ++j) {
    const double d = static_cast<double>(j) - m;
    v += d * d * pmf_at(j);
  }
  return std::sqrt(std::max(0.0, v));
}

TruncationDistribution make_from_weights(std::vector<double> weights,
                                         long support_min) {
  if (weights.empty()) throw EmptySupport("truncation: empty support");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw EmptySupport("truncation: weights must be nonnegative and finite");
    }
    total += w;
  }
  if (total <= 0.0) throw EmptySupport("truncation: all weights are zero");

  TruncationDistribution dist;
  dist.support_min = support_min;
  dist.support_max = support_min + static_cast<long>(weights.size()) - 1;
  dist.pmf.resize(weights.size());
  dist.cdf.resize(weights.size());
  dist.survival.resize(weights.size());
  double acc = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    dist.pmf[i] = weights[i] / total;
    acc += dist.pmf[i];
    dist.cdf[i] = acc;
  }
  dist.cdf.back() = 1.0;
  // Backward tail accumulation keeps survival relatively accurate even for
  // thin tails; 1 − cdf would be absolute-eps there, and the Russian
  // Roulette weights divide by these values.
  double tail = 0.0;
  for (size_t i = weights.size(); i-- > 0;) {
    tail += dist.pmf[i];
    dist.survival[i] = tail;
  }
  dist.survival.front() = 1.0;
  return dist;
}

TruncationDistribution make_exponential(double lambda, long j_min, long h) {
  if (j_min > h) throw EmptySupport("make_exponential: J_min > H");
  if (!(lambda >= 0.0)) throw EmptySupport("make_exponential: lambda < 0");
  std::vector<double> weights;
  weights.reserve(static_cast<size_t>(h - j_min + 1));
  for (long j = j_min; j <= h; ++j) {
    // shifted by J_min so weights stay in a sane floating range
    weights.push_back(std::exp(-lambda * static_cast<double>(j - j_min)));
  }
  return make_from_weights(std::move(weights), j_min);
}

TruncationDistribution make_harmonic(long j_min, long h) {
  if (j_min > h) throw EmptySupport("make_harmonic: J_min > H");
  if (j_min < 1) throw EmptySupport("make_harmonic: support must be positive");
  std::vector<double> weights;
  weights.reserve(static_cast<size_t>(h - j_min + 1));
  for (long j = j_min; j <= h; ++j) {
    weights.push_back(1.0 / static_cast<double>(j));
  }
  return make_from_weights(std::move(weights), j_min);
}

TruncationDistribution make_point_mass(long j) {
  return make_from_weights({1.0}, j);
}

TruncationDistribution exponential_with_mean(double lambda, double target_mean,
                                             long h) {
  long best_jmin = 1;
  double best_gap = std::numeric_limits<double>::infinity();
  for (long j_min = 1; j_min <= h; ++j_min) {
    const double gap =
        std::abs(make_exponential(lambda, j_min, h).mean() - target_mean);
    if (gap < best_gap) {
      best_gap = gap;
      best_jmin = j_min;
    }
  }
  return make_exponential(lambda, best_jmin, h);
}

long sample_truncation(const TruncationDistribution& dist, Rng& rng) {
  const double u = rng.uniform();
  const auto it = std::lower_bound(dist.cdf.begin(), dist.cdf.end(), u);
  const long offset = static_cast<long>(it - dist.cdf.begin());
  return std::min(dist.support_min + offset, dist.support_max);
}

}  // namespace rtgp
