#include "rtgp/training.hpp"

#include <chrono>
#include <cmath>

namespace rtgp {

std::string to_string(TrainMethod m) {
  switch (m) {
    case TrainMethod::cholesky: return "cholesky";
    case TrainMethod::cg: return "cg";
    case TrainMethod::rr_cg: return "rr_cg";
    case TrainMethod::rff: return "rff";
    case TrainMethod::ss_rff: return "ss_rff";
  }
  return "?";
}

TrainMethod train_method_from_string(const std::string& s) {
  if (s == "cholesky") return TrainMethod::cholesky;
  if (s == "cg") return TrainMethod::cg;
  if (s == "rr_cg") return TrainMethod::rr_cg;
  if (s == "rff") return TrainMethod::rff;
  if (s == "ss_rff") return TrainMethod::ss_rff;
  throw UnknownParam("unknown training method: " + s);
}

void TrainConfig::validate() const {
  if (iters < 1) throw NonPositiveParam("train: iters must be >= 1");
  if (!(lr > 0.0)) throw NonPositiveParam("train: lr must be > 0");
  double prev = 0.0;
  for (double m : schedule_milestones) {
    if (!(m > prev && m < 1.0)) {
      throw NonPositiveParam(
          "train: milestones must be strictly increasing in (0,1)");
    }
    prev = m;
  }
}

Vector adam_step(OptimState& state, const Vector& grad, double lr) {
  if (!grad.allFinite()) {
    throw NonFiniteGradient("adam_step: gradient has non-finite entries");
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (state.first_moment.size() != grad.size()) {
    state.first_moment = Vector::Zero(grad.size());
    state.second_moment = Vector::Zero(grad.size());
    state.step_count = 0;
  }
  state.step_count += 1;
  state.first_moment = beta1 * state.first_moment + (1.0 - beta1) * grad;
  state.second_moment =
      beta2 * state.second_moment + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step_count));
  const Vector mhat = state.first_moment / c1;
  const Vector vhat = state.second_moment / c2;
  return (-lr * (mhat.array() / (vhat.array().sqrt() + eps))).matrix();
}

Vector to_unconstrained(const Hyperparams& theta) {
  const Vector raw = params_to_vector(theta);
  for (Index i = 0; i < raw.size(); ++i) {
    if (!(raw(i) > 0.0)) {
      throw NonPositiveParam("to_unconstrained: parameters must be positive");
    }
  }
  return raw.array().log();
}

Hyperparams from_unconstrained(const Vector& u, Index lengthscale_count) {
  return params_from_vector(u.array().exp(), lengthscale_count);
}

Vector grad_to_unconstrained(const Vector& grad_raw, const Vector& theta_raw) {
  return grad_raw.cwiseProduct(theta_raw);
}

double scheduled_lr(const TrainConfig& cfg, Index step) {
  double lr = cfg.lr;
  for (double m : cfg.schedule_milestones) {
    if (step >= static_cast<Index>(std::floor(m * static_cast<double>(cfg.iters)))) {
      lr *= cfg.schedule_factor;
    }
  }
  return lr;
}

namespace {

TruncationDistribution rr_distribution(const TrainConfig& cfg, Index n) {
  if (cfg.rr_expected_j > 0.0) {
    return exponential_with_mean(cfg.rr_lambda, cfg.rr_expected_j, n);
  }
  return make_exponential(cfg.rr_lambda, cfg.rr_j_min, n);
}

}  // namespace

TrainRecord train(const Dataset& data, const Hyperparams& theta0,
                  const TrainConfig& cfg) {
  cfg.validate();
  theta0.validate(data.dim());
  const Index n = data.size();
  const Index l_count = theta0.lengthscales.size();

  const bool telemetry = cfg.exact_telemetry && n <= cfg.exact_telemetry_max_n;

  TruncationDistribution rr_dist;
  if (cfg.method == TrainMethod::rr_cg) rr_dist = rr_distribution(cfg, n);
  SSRFFConfig ss_cfg;
  if (cfg.method == TrainMethod::ss_rff) {
    ss_cfg.base_pairs = cfg.ssrff_base_pairs;
    ss_cfg.step = cfg.ssrff_step;
    const long blocks = (n / 2 - ss_cfg.base_pairs) / ss_cfg.step;
    ss_cfg.dist = make_harmonic(1, std::max<long>(blocks, 1) + 1);
    ss_cfg.validate(n);
  }

  std::optional<RFFFeatures> frozen;
  if (cfg.freeze_features && cfg.method == TrainMethod::rff) {
    Rng rng = Rng(cfg.seed).child(0xF);
    frozen = sample_features(theta0, data.dim(), cfg.feature_count, rng);
  }

  Vector u = to_unconstrained(theta0);
  OptimState opt;
  TrainRecord record;
  record.config = cfg;
  record.steps.reserve(static_cast<size_t>(cfg.iters));

  for (Index step = 0; step < cfg.iters; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng = Rng(cfg.seed).child(static_cast<std::uint64_t>(step));
    const Hyperparams theta = from_unconstrained(u, l_count);

    TrainStep row;
    row.step = step;
    row.theta_raw = params_to_vector(theta);
    row.lr = scheduled_lr(cfg, step);

    Vector grad_raw;
    switch (cfg.method) {
      case TrainMethod::cholesky: {
        grad_raw = grad_exact(data, theta);
        break;
      }
      case TrainMethod::cg: {
        const ProbeSet probes = sample_probes(
            n, cfg.probe_count, ProbeKind::rademacher, rng.next_u64());
        Preconditioner precond = Preconditioner::identity();
        if (cfg.precond_rank > 0) {
          precond = pivoted_cholesky(kernel_matrix(data.x, theta, false),
                                     cfg.precond_rank, theta.noise_sq);
        }
        grad_raw = stochastic_grad_cg(data, theta, probes, cfg.cg_max_iter,
                                      precond, 0.0);
        row.approx_objective =
            cg_mll_estimate(data, theta, probes, cfg.cg_max_iter, precond)
                .total_nll;
        break;
      }
      case TrainMethod::rr_cg: {
        const ProbeSet probes = sample_probes(
            n, cfg.probe_count, ProbeKind::rademacher, rng.next_u64());
        Preconditioner precond = Preconditioner::identity();
        if (cfg.precond_rank > 0) {
          precond = pivoted_cholesky(kernel_matrix(data.x, theta, false),
                                     cfg.precond_rank, theta.noise_sq);
        }
        grad_raw =
            rrcg_grad(data, theta, rr_dist, probes, precond, rng, &row.sampled_j);
        break;
      }
      case TrainMethod::rff: {
        RFFFeatures features =
            frozen ? *frozen
                   : sample_features(theta, data.dim(), cfg.feature_count, rng);
        const Index m = features.pair_count();
        grad_raw = grad_rff(data, theta, features, m);
        row.approx_objective =
            mll_rff(feature_map_at(data.x, features, theta, m), data.y,
                    theta.noise_sq)
                .total_nll;
        break;
      }
      case TrainMethod::ss_rff: {
        const SSRFFDraw draw = ssrff_draw(data, theta, ss_cfg, rng);
        row.sampled_j.push_back(draw.j_sampled);
        grad_raw =
            ssrff_grad_fixed(data, theta, ss_cfg, draw.features, draw.j_sampled);
        row.approx_objective =
            ssrff_mll_fixed(data, theta, ss_cfg, draw.features, draw.j_sampled)
                .terms.total_nll;
        break;
      }
    }

    for (Index idx : cfg.frozen_params) grad_raw(idx) = 0.0;
    Vector grad_u = grad_to_unconstrained(grad_raw, row.theta_raw);
    row.grad_norm = grad_u.norm();

    if (telemetry) row.exact_nll = mll_exact(data, theta).total_nll;

    u += adam_step(opt, grad_u, row.lr);

    const auto t1 = std::chrono::steady_clock::now();
    row.wall_ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    record.steps.push_back(std::move(row));
  }

  record.theta_final = from_unconstrained(u, l_count);
  return record;
}

}  // namespace rtgp
