#include "rtgp/unbiased.hpp"

#include <cmath>

namespace rtgp {

RRCGSolve rrcg_solve(const LinearOperator& a, const Vector& b,
                     const TruncationDistribution& dist,
                     const Preconditioner& precond, Rng& rng) {
  if (dist.support_max > a.n + 8) {
    throw DimensionMismatch(
        "rrcg_solve: truncation support extends far past N");
  }
  const long j = sample_truncation(dist, rng);
  // tol 0: the term count must equal the sampled J except on exact
  // convergence, where the remaining increments are zero anyway.
  const MbcgResult run = mbcg(a, Matrix(b), precond, j, 0.0);
  const CGTrace& trace = run.traces.front();

  RRCGSolve out;
  out.j_sampled = j;
  out.estimate = Vector::Zero(b.size());
  for (Index i = 0; i < trace.iterations(); ++i) {
    out.estimate += trace.increments[static_cast<size_t>(i)] /
                    dist.survival_at(static_cast<long>(i) + 1);
  }
  return out;
}

namespace {

Vector rrcg_grad_impl(const Dataset& data, const Hyperparams& theta,
                      const TruncationDistribution& dist,
                      const ProbeSet& probes, const Preconditioner& precond,
                      Rng& rng, bool share_y_solve,
                      std::vector<long>* j_out) {
  const Matrix k = kernel_matrix(data.x, theta, true);
  const LinearOperator op = LinearOperator::dense(k);
  const auto note_j = [j_out](long j) {
    if (j_out) j_out->push_back(j);
  };

  // Independent truncations for everything; the left/right y-solves must
  // not share randomness or the quadratic term becomes biased.
  const RRCGSolve left = rrcg_solve(op, data.y, dist, precond, rng);
  note_j(left.j_sampled);
  const Vector y_left = left.estimate;
  Vector y_right = y_left;
  if (!share_y_solve) {
    const RRCGSolve right = rrcg_solve(op, data.y, dist, precond, rng);
    note_j(right.j_sampled);
    y_right = right.estimate;
  }
  Matrix z_solves(data.size(), probes.count());
  for (Index i = 0; i < probes.count(); ++i) {
    const RRCGSolve zs =
        rrcg_solve(op, probes.probes.col(i), dist, precond, rng);
    note_j(zs.j_sampled);
    z_solves.col(i) = zs.estimate;
  }

  Vector grad(theta.param_count());
  for (Index p = 0; p < grad.size(); ++p) {
    const Matrix dk = kernel_grad(data.x, theta, param_at(theta, p));
    double trace_est = 0.0;
    for (Index i = 0; i < probes.count(); ++i) {
      trace_est += z_solves.col(i).dot(dk * probes.probes.col(i));
    }
    trace_est /= static_cast<double>(probes.count());
    grad(p) = 0.5 * (trace_est - y_left.dot(dk * y_right));
  }
  return grad;
}

}  // namespace

Vector rrcg_grad(const Dataset& data, const Hyperparams& theta,
                 const TruncationDistribution& dist, const ProbeSet& probes,
                 const Preconditioner& precond, Rng& rng,
                 std::vector<long>* j_out) {
  return rrcg_grad_impl(data, theta, dist, probes, precond, rng, false, j_out);
}

Vector rrcg_grad_shared_solve(const Dataset& data, const Hyperparams& theta,
                              const TruncationDistribution& dist,
                              const ProbeSet& probes,
                              const Preconditioner& precond, Rng& rng) {
  return rrcg_grad_impl(data, theta, dist, probes, precond, rng, true,
                        nullptr);
}

RRLogdetEstimate rrcg_logdet_telescope(const LinearOperator& a,
                                       const TruncationDistribution& dist,
                                       const Vector& probe, Rng& rng) {
  const long j = sample_truncation(dist, rng);
  const MbcgResult run = mbcg(a, Matrix(probe), Preconditioner::identity(),
                              j, 0.0);
  const CGTrace& trace = run.traces.front();
  const Vector v = slq_prefix_values(trace, probe.squaredNorm());

  RRLogdetEstimate out;
  out.j_sampled = j;
  // Δ₁ = v₁, Δⱼ = vⱼ − v_{j−1}; terms past exact convergence are zero.
  for (Index i = 0; i < v.size(); ++i) {
    const double delta = i == 0 ? v(0) : v(i) - v(i - 1);
    out.estimate += delta / dist.survival_at(static_cast<long>(i) + 1);
  }
  return out;
}

RRLogdetEstimate rrcg_logdet_telescope(const Dataset& data,
                                       const Hyperparams& theta,
                                       const TruncationDistribution& dist,
                                       const Vector& probe, Rng& rng) {
  const Matrix k = kernel_matrix(data.x, theta, true);
  return rrcg_logdet_telescope(LinearOperator::dense(k), dist, probe, rng);
}

void SSRFFConfig::validate(Index n) const {
  if (base_pairs < 1) throw EmptySupport("ssrff: base_pairs must be >= 1");
  if (step < 1) throw EmptySupport("ssrff: step must be >= 1");
  if (dist.support_min < 1) {
    throw EmptySupport("ssrff: block indices start at 1");
  }
  // Interior blocks must stay low rank; the closing block alone may pay
  // the dense O(N³) cost.
  if (max_pairs() > n / 2) {
    throw EmptySupport("ssrff: interior blocks need more than N/2 pairs");
  }
}

SSRFFDraw ssrff_draw(const Dataset& data, const Hyperparams& theta,
                     const SSRFFConfig& cfg, Rng& rng) {
  cfg.validate(data.size());
  SSRFFDraw draw;
  // J first; the ω draw below consumes the same entropy regardless of J,
  // so Δ stays independent of the truncation index.
  draw.j_sampled = sample_truncation(cfg.dist, rng);
  draw.features =
      sample_features(theta, data.dim(), 2 * cfg.max_pairs(), rng);
  return draw;
}

namespace {

MLLTerms rff_terms_at(const Dataset& data, const Hyperparams& theta,
                      const RFFFeatures& features, Index pairs) {
  return mll_rff(feature_map_at(data.x, features, theta, pairs), data.y,
                 theta.noise_sq);
}

}  // namespace

SSRFFEstimate ssrff_mll_fixed(const Dataset& data, const Hyperparams& theta,
                              const SSRFFConfig& cfg,
                              const RFFFeatures& features, long j_sampled) {
  cfg.validate(data.size());
  const double p = cfg.dist.pmf_at(j_sampled);
  if (p <= 0.0) throw ZeroProbabilitySample("ssrff: J outside the support");

  // Base term: left endpoint of the first block the distribution can draw.
  const Index base_pairs_eff = cfg.pairs_for_block(cfg.dist.support_min - 1);
  const MLLTerms base = rff_terms_at(data, theta, features, base_pairs_eff);

  const Index left_pairs = cfg.pairs_for_block(j_sampled - 1);
  const MLLTerms left = left_pairs == base_pairs_eff
                            ? base
                            : rff_terms_at(data, theta, features, left_pairs);

  SSRFFEstimate out;
  out.j_sampled = j_sampled;
  out.closing_block = j_sampled == cfg.dist.support_max;
  const MLLTerms right =
      out.closing_block
          ? mll_exact(data, theta)
          : rff_terms_at(data, theta, features, cfg.pairs_for_block(j_sampled));

  const double logdet = base.logdet + (right.logdet - left.logdet) / p;
  const double invquad = base.invquad + (right.invquad - left.invquad) / p;
  out.terms = MLLTerms::from_parts(logdet, invquad, data.size());
  return out;
}

SSRFFEstimate ssrff_mll(const Dataset& data, const Hyperparams& theta,
                        const SSRFFConfig& cfg, Rng& rng) {
  const SSRFFDraw draw = ssrff_draw(data, theta, cfg, rng);
  return ssrff_mll_fixed(data, theta, cfg, draw.features, draw.j_sampled);
}

Vector ssrff_grad_fixed(const Dataset& data, const Hyperparams& theta,
                        const SSRFFConfig& cfg, const RFFFeatures& features,
                        long j_sampled) {
  cfg.validate(data.size());
  const double p = cfg.dist.pmf_at(j_sampled);
  if (p <= 0.0) throw ZeroProbabilitySample("ssrff: J outside the support");

  const Index base_pairs_eff = cfg.pairs_for_block(cfg.dist.support_min - 1);
  const Vector base = grad_rff(data, theta, features, base_pairs_eff);

  const Index left_pairs = cfg.pairs_for_block(j_sampled - 1);
  const Vector left = left_pairs == base_pairs_eff
                          ? base
                          : grad_rff(data, theta, features, left_pairs);
  const Vector right =
      j_sampled == cfg.dist.support_max
          ? grad_exact(data, theta)
          : grad_rff(data, theta, features, cfg.pairs_for_block(j_sampled));

  return base + (right - left) / p;
}

Vector ssrff_grad(const Dataset& data, const Hyperparams& theta,
                  const SSRFFConfig& cfg, Rng& rng) {
  const SSRFFDraw draw = ssrff_draw(data, theta, cfg, rng);
  return ssrff_grad_fixed(data, theta, cfg, draw.features, draw.j_sampled);
}

}  // namespace rtgp
