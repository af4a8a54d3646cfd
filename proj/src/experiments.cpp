#include "rtgp/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "rtgp/parallel.hpp"

namespace rtgp {

namespace {

struct Accumulator {
  double sum = 0, sumsq = 0;
  long n = 0;
  void add(double v) {
    sum += v;
    sumsq += v * v;
    ++n;
  }
  double mean() const { return sum / static_cast<double>(n); }
  double se() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double var =
        std::max(0.0, (sumsq - static_cast<double>(n) * m * m) /
                          static_cast<double>(n - 1));
    return std::sqrt(var / static_cast<double>(n));
  }
};

}  // namespace

CsvTable BiasSweepReport::to_csv() const {
  CsvTable t;
  t.header = {"method_id", "j",           "replicas",     "logdet_mean",
              "logdet_se", "invquad_mean", "invquad_se",  "exact_logdet",
              "exact_invquad"};
  for (const auto& r : rows) {
    double method_id = 0;
    if (r.method == "cg") method_id = 0;
    else if (r.method == "rr_cg") method_id = 1;
    else if (r.method == "rff") method_id = 2;
    else method_id = 3;
    t.rows.push_back({method_id, r.j, static_cast<double>(r.replicas),
                      r.logdet_mean, r.logdet_se, r.invquad_mean, r.invquad_se,
                      exact_logdet, exact_invquad});
  }
  return t;
}

BiasSweepReport bias_sweep(const Dataset& data, const Hyperparams& theta,
                           const BiasSweepOptions& opts) {
  const Index n = data.size();
  const MLLTerms exact = mll_exact(data, theta);
  const Matrix k = kernel_matrix(data.x, theta, true);
  const LinearOperator op = LinearOperator::dense(k);

  BiasSweepReport report;
  report.exact_logdet = exact.logdet;
  report.exact_invquad = exact.invquad;

  for (TrainMethod method : opts.methods) {
    if (method == TrainMethod::cg) {
      Index j_max = 1;
      std::vector<Index> js;
      for (Index j : opts.j_grid) {
        js.push_back(std::min<Index>(j, n));
        j_max = std::max(j_max, js.back());
      }
      // One deterministic run against y gives every u_J at once.
      const MbcgResult y_run =
          mbcg(op, Matrix(data.y), Preconditioner::identity(), j_max, 0.0);
      const Vector u = invquad_cg(y_run.traces.front(), data.y);

      const ProbeSet probes = sample_probes(n, opts.replicas,
                                            ProbeKind::rademacher, opts.seed);
      std::vector<std::vector<double>> v_samples(
          js.size(), std::vector<double>(static_cast<size_t>(opts.replicas)));
      parallel_for(opts.replicas, opts.threads, [&](Index r) {
        const MbcgResult run = mbcg(op, Matrix(probes.probes.col(r)),
                                    Preconditioner::identity(), j_max, 0.0);
        for (size_t gi = 0; gi < js.size(); ++gi) {
          const ProbeSet one{probes.probes.col(r), probes.kind, probes.seed};
          v_samples[gi][static_cast<size_t>(r)] =
              slq_logdet_at({run.traces.front()}, one, {js[gi]})(0);
        }
      });

      for (size_t gi = 0; gi < js.size(); ++gi) {
        Accumulator acc;
        for (double v : v_samples[gi]) acc.add(v);
        BiasSweepRow row;
        row.method = "cg";
        row.j = static_cast<double>(js[gi]);
        row.replicas = opts.replicas;
        row.logdet_mean = acc.mean();
        row.logdet_se = acc.se();
        const Index uj = std::min<Index>(js[gi], u.size());
        row.invquad_mean = uj > 0 ? u(uj - 1) : 0.0;
        row.invquad_se = 0.0;  // deterministic given y
        report.rows.push_back(row);
      }
    } else if (method == TrainMethod::rr_cg) {
      for (Index e_j : opts.j_grid) {
        const TruncationDistribution dist = exponential_with_mean(
            opts.rr_lambda, static_cast<double>(std::min<Index>(e_j, n)), n);
        std::vector<double> iq(static_cast<size_t>(opts.replicas));
        std::vector<double> ld(static_cast<size_t>(opts.replicas));
        parallel_for(opts.replicas, opts.threads, [&](Index r) {
          Rng rng = Rng(opts.seed, 0x5272 + static_cast<std::uint64_t>(e_j))
                        .child(static_cast<std::uint64_t>(r));
          const RRCGSolve solve =
              rrcg_solve(op, data.y, dist, Preconditioner::identity(), rng);
          iq[static_cast<size_t>(r)] = data.y.dot(solve.estimate);
          Vector z(n);
          for (Index i = 0; i < n; ++i) z(i) = rng.rademacher();
          ld[static_cast<size_t>(r)] =
              rrcg_logdet_telescope(op, dist, z, rng).estimate;
        });
        Accumulator aq, al;
        for (double v : iq) aq.add(v);
        for (double v : ld) al.add(v);
        BiasSweepRow row;
        row.method = "rr_cg";
        row.j = dist.mean();
        row.replicas = opts.replicas;
        row.logdet_mean = al.mean();
        row.logdet_se = al.se();
        row.invquad_mean = aq.mean();
        row.invquad_se = aq.se();
        report.rows.push_back(row);
      }
    } else if (method == TrainMethod::rff) {
      for (Index j : opts.j_grid) {
        const Index feat = std::max<Index>(2, j + (j % 2));
        std::vector<double> iq(static_cast<size_t>(opts.replicas));
        std::vector<double> ld(static_cast<size_t>(opts.replicas));
        parallel_for(opts.replicas, opts.threads, [&](Index r) {
          Rng rng = Rng(opts.seed, 0xFF00 + static_cast<std::uint64_t>(j))
                        .child(static_cast<std::uint64_t>(r));
          const RFFFeatures f = sample_features(theta, data.dim(), feat, rng);
          const MLLTerms terms = mll_rff(
              feature_map(data.x, f, f.pair_count()), data.y, theta.noise_sq);
          iq[static_cast<size_t>(r)] = terms.invquad;
          ld[static_cast<size_t>(r)] = terms.logdet;
        });
        Accumulator aq, al;
        for (double v : iq) aq.add(v);
        for (double v : ld) al.add(v);
        BiasSweepRow row;
        row.method = "rff";
        row.j = static_cast<double>(feat);
        row.replicas = opts.replicas;
        row.logdet_mean = al.mean();
        row.logdet_se = al.se();
        row.invquad_mean = aq.mean();
        row.invquad_se = aq.se();
        report.rows.push_back(row);
      }
    } else if (method == TrainMethod::ss_rff) {
      for (Index j : opts.j_grid) {
        SSRFFConfig cfg;
        cfg.base_pairs = std::max<Index>(1, j / 2);
        cfg.step = opts.ssrff_step;
        const long interior =
            std::max<long>(0, (n / 2 - cfg.base_pairs) / cfg.step);
        cfg.dist = make_harmonic(1, interior + 1);
        std::vector<double> iq(static_cast<size_t>(opts.replicas));
        std::vector<double> ld(static_cast<size_t>(opts.replicas));
        parallel_for(opts.replicas, opts.threads, [&](Index r) {
          Rng rng = Rng(opts.seed, 0x55FF + static_cast<std::uint64_t>(j))
                        .child(static_cast<std::uint64_t>(r));
          const SSRFFEstimate est = ssrff_mll(data, theta, cfg, rng);
          iq[static_cast<size_t>(r)] = est.terms.invquad;
          ld[static_cast<size_t>(r)] = est.terms.logdet;
        });
        Accumulator aq, al;
        for (double v : iq) aq.add(v);
        for (double v : ld) al.add(v);
        BiasSweepRow row;
        row.method = "ss_rff";
        row.j = static_cast<double>(2 * cfg.base_pairs);
        row.replicas = opts.replicas;
        row.logdet_mean = al.mean();
        row.logdet_se = al.se();
        row.invquad_mean = aq.mean();
        row.invquad_se = aq.se();
        report.rows.push_back(row);
      }
    }
  }
  return report;
}

CsvTable LengthscaleBiasReport::to_csv() const {
  CsvTable t;
  t.header = {"method_id", "j",        "seed",         "learned_ell",
              "log_ratio", "reference_ell", "initial_ell"};
  for (const auto& r : rows) {
    const double method_id = r.method == "cg" ? 0.0 : 2.0;
    t.rows.push_back({method_id, static_cast<double>(r.j),
                      static_cast<double>(r.seed), r.learned_ell, r.log_ratio,
                      reference_ell, initial_ell});
  }
  return t;
}

LengthscaleBiasReport lengthscale_bias_experiment(
    const LengthscaleBiasOptions& opts) {
  Rng data_rng(opts.data_seed);
  const Dataset data = gen_toy_sine(opts.n, opts.noise_sd, data_rng);

  const double noise_sq = opts.noise_sd * opts.noise_sd;
  const auto theta_at = [&](double ell) {
    return Hyperparams::isotropic(1.0, ell, noise_sq);
  };

  TrainConfig base_cfg;
  base_cfg.iters = opts.iters;
  base_cfg.lr = opts.lr;
  base_cfg.probe_count = opts.probe_count;
  base_cfg.frozen_params = {0, 2};  // o² and σ² stay at the truth
  base_cfg.exact_telemetry = false;

  // Locate the Cholesky optimum, then restart everything (including the
  // reference) from +50% so all methods share a non-degenerate start.
  TrainConfig chol_cfg = base_cfg;
  chol_cfg.method = TrainMethod::cholesky;
  const double ell_opt =
      train(data, theta_at(opts.start_ell), chol_cfg).theta_final.lengthscales(0);
  const double ell_init = 1.5 * ell_opt;
  const double reference =
      train(data, theta_at(ell_init), chol_cfg).theta_final.lengthscales(0);

  LengthscaleBiasReport report;
  report.reference_ell = reference;
  report.initial_ell = ell_init;

  struct Job {
    TrainMethod method;
    Index j;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Index j : opts.j_grid_cg) {
    for (std::uint64_t s : opts.seeds) jobs.push_back({TrainMethod::cg, j, s});
  }
  for (Index j : opts.j_grid_rff) {
    for (std::uint64_t s : opts.seeds) jobs.push_back({TrainMethod::rff, j, s});
  }

  std::vector<LengthscaleBiasRow> rows(jobs.size());
  parallel_for(static_cast<Index>(jobs.size()), opts.threads, [&](Index i) {
    const Job& job = jobs[static_cast<size_t>(i)];
    TrainConfig cfg = base_cfg;
    cfg.method = job.method;
    cfg.seed = job.seed;
    if (job.method == TrainMethod::cg) {
      cfg.cg_max_iter = job.j;
    } else {
      cfg.feature_count = job.j + (job.j % 2);
    }
    const double learned =
        train(data, theta_at(ell_init), cfg).theta_final.lengthscales(0);
    rows[static_cast<size_t>(i)] = {to_string(job.method), job.j, job.seed,
                                    learned, std::log(learned / reference)};
  });
  report.rows = rows;
  return report;
}

CsvTable EstimatorCheckReport::to_csv() const {
  CsvTable t;
  t.header = {"output", "mean", "se", "exact", "z", "pass"};
  for (size_t i = 0; i < outputs.size(); ++i) {
    const auto& o = outputs[i];
    t.rows.push_back({static_cast<double>(i), o.mean, o.se, o.exact, o.z,
                      pass ? 1.0 : 0.0});
  }
  return t;
}

TruncationDistribution make_distribution(const std::string& family,
                                         double lambda, long j_min, long h) {
  if (family == "exponential") return make_exponential(lambda, j_min, h);
  if (family == "harmonic") return make_harmonic(j_min, h);
  if (family == "uniform") return make_exponential(0.0, j_min, h);
  if (family == "point") return make_point_mass(h);
  throw UnknownParam("unknown distribution family: " + family);
}

namespace {

EstimatorCheckOutput mc_output(const std::string& name,
                               const std::vector<double>& samples,
                               double exact) {
  Accumulator acc;
  for (double v : samples) acc.add(v);
  EstimatorCheckOutput out;
  out.name = name;
  out.mean = acc.mean();
  out.se = acc.se();
  out.exact = exact;
  out.z = out.se > 0 ? (out.mean - exact) / out.se : 0.0;
  return out;
}

}  // namespace

EstimatorCheckReport estimator_check(const EstimatorCheckConfig& cfg) {
  EstimatorCheckReport report;
  report.kind = cfg.kind;

  const Hyperparams theta = Hyperparams::isotropic(
      cfg.outputscale_sq, cfg.lengthscale, cfg.noise_sq);

  if (cfg.kind == "rr" || cfg.kind == "ss") {
    // Deterministic Δ sequence; the expectation enumerates exactly.
    const long h = cfg.support_max > 0 ? cfg.support_max : 10;
    Rng rng(cfg.seed);
    std::vector<double> delta(static_cast<size_t>(h));
    double psi = 0.0;
    for (auto& v : delta) {
      v = 2.0 * rng.uniform() - 1.0;
      psi += v;
    }
    const TruncationDistribution dist =
        make_distribution(cfg.dist_family, cfg.lambda,
                          cfg.kind == "ss" ? 1 : cfg.j_min, h);
    double expectation = 0.0;
    for (long j = dist.support_min; j <= dist.support_max; ++j) {
      const double est =
          cfg.kind == "rr"
              ? rr_combine<double>(list_supplier(delta), dist, j)
              : ss_combine<double>(list_supplier(delta), dist, j);
      expectation += dist.pmf_at(j) * est;
    }
    report.enumeration = true;
    report.worst = std::abs(expectation - psi);
    report.pass = report.worst <= 1e-12 * std::max(1.0, std::abs(psi));
    report.outputs.push_back({"estimate", expectation, 0.0, psi, 0.0});
    return report;
  }

  Rng data_rng(cfg.seed);
  const Dataset data = gen_gp_dataset(cfg.n, cfg.d, theta, data_rng);
  const Index n = data.size();

  if (cfg.kind == "rr_cg_solve") {
    const long h = cfg.support_max > 0 ? cfg.support_max : n;
    const TruncationDistribution dist =
        make_distribution(cfg.dist_family, cfg.lambda, cfg.j_min, h);
    const Matrix k = kernel_matrix(data.x, theta, true);
    const LinearOperator op = LinearOperator::dense(k);
    const Vector exact = solve_posdef(cholesky_factor(k), data.y);

    Matrix estimates(n, cfg.replicas);
    parallel_for(cfg.replicas, cfg.threads, [&](Index r) {
      Rng rng = Rng(cfg.seed, 1).child(static_cast<std::uint64_t>(r));
      estimates.col(r) =
          rrcg_solve(op, data.y, dist, Preconditioner::identity(), rng)
              .estimate;
    });
    for (Index i = 0; i < n; ++i) {
      std::vector<double> samples(estimates.row(i).begin(),
                                  estimates.row(i).end());
      report.outputs.push_back(
          mc_output("x" + std::to_string(i), samples, exact(i)));
    }
  } else if (cfg.kind == "rr_cg_grad") {
    const long h = cfg.support_max > 0 ? cfg.support_max : n;
    const TruncationDistribution dist =
        make_distribution(cfg.dist_family, cfg.lambda, cfg.j_min, h);
    const Vector exact = grad_exact(data, theta);

    Matrix estimates(exact.size(), cfg.replicas);
    parallel_for(cfg.replicas, cfg.threads, [&](Index r) {
      Rng rng = Rng(cfg.seed, 2).child(static_cast<std::uint64_t>(r));
      const ProbeSet probes =
          sample_probes(n, 1, ProbeKind::rademacher, rng.next_u64());
      estimates.col(r) =
          cfg.negative_control
              ? rrcg_grad_shared_solve(data, theta, dist, probes,
                                       Preconditioner::identity(), rng)
              : rrcg_grad(data, theta, dist, probes,
                          Preconditioner::identity(), rng);
    });
    const char* names[] = {"d_outputscale_sq", "d_lengthscale", "d_noise_sq"};
    for (Index i = 0; i < exact.size(); ++i) {
      std::vector<double> samples(estimates.row(i).begin(),
                                  estimates.row(i).end());
      const std::string name =
          i < 3 ? names[i] : "g" + std::to_string(i);
      report.outputs.push_back(mc_output(name, samples, exact(i)));
    }
  } else if (cfg.kind == "ss_rff_mll") {
    SSRFFConfig ss;
    ss.base_pairs = cfg.base_pairs;
    ss.step = cfg.step;
    const long interior = std::max<long>(0, (n / 2 - ss.base_pairs) / ss.step);
    const long h = cfg.support_max > 0 ? cfg.support_max : interior + 1;
    ss.dist = make_distribution(cfg.dist_family, cfg.lambda, cfg.j_min, h);
    const MLLTerms exact = mll_exact(data, theta);

    if (cfg.replicas == 0) {
      // Conditional enumeration: one ω draw, expectation over J exactly.
      Rng rng = Rng(cfg.seed, 3);
      const RFFFeatures features =
          sample_features(theta, data.dim(), 2 * ss.max_pairs(), rng);
      double e_logdet = 0.0, e_invquad = 0.0;
      for (long j = ss.dist.support_min; j <= ss.dist.support_max; ++j) {
        const SSRFFEstimate est =
            ssrff_mll_fixed(data, theta, ss, features, j);
        e_logdet += ss.dist.pmf_at(j) * est.terms.logdet;
        e_invquad += ss.dist.pmf_at(j) * est.terms.invquad;
      }
      report.enumeration = true;
      const double gap = std::max(std::abs(e_logdet - exact.logdet),
                                  std::abs(e_invquad - exact.invquad));
      report.worst = gap;
      report.pass = gap <= 1e-10 * std::max(1.0, std::abs(exact.total_nll));
      report.outputs.push_back({"logdet", e_logdet, 0.0, exact.logdet, 0.0});
      report.outputs.push_back(
          {"invquad", e_invquad, 0.0, exact.invquad, 0.0});
      return report;
    }

    std::vector<double> ld(static_cast<size_t>(cfg.replicas));
    std::vector<double> iq(static_cast<size_t>(cfg.replicas));
    parallel_for(cfg.replicas, cfg.threads, [&](Index r) {
      Rng rng = Rng(cfg.seed, 3).child(static_cast<std::uint64_t>(r));
      const SSRFFEstimate est = ssrff_mll(data, theta, ss, rng);
      ld[static_cast<size_t>(r)] = est.terms.logdet;
      iq[static_cast<size_t>(r)] = est.terms.invquad;
    });
    report.outputs.push_back(mc_output("logdet", ld, exact.logdet));
    report.outputs.push_back(mc_output("invquad", iq, exact.invquad));
  } else {
    throw UnknownParam("unknown estimator kind: " + cfg.kind);
  }

  double worst = 0.0;
  for (const auto& o : report.outputs) worst = std::max(worst, std::abs(o.z));
  report.worst = worst;
  report.pass = worst <= 3.0;
  return report;
}

CsvTable train_record_to_csv(const TrainRecord& record) {
  CsvTable t;
  const Index p = record.steps.empty() ? 0 : record.steps[0].theta_raw.size();
  const bool have_exact =
      !record.steps.empty() && std::isfinite(record.steps[0].exact_nll);
  const bool have_approx =
      !record.steps.empty() && std::isfinite(record.steps[0].approx_objective);
  size_t j_cols = 0;
  for (const auto& s : record.steps) j_cols = std::max(j_cols, s.sampled_j.size());

  t.header = {"step"};
  t.header.push_back("outputscale_sq");
  for (Index i = 1; i + 1 < p; ++i) {
    t.header.push_back("lengthscale" + std::to_string(i - 1));
  }
  t.header.push_back("noise_sq");
  if (have_approx) t.header.push_back("approx_objective");
  if (have_exact) t.header.push_back("exact_nll");
  t.header.push_back("grad_norm");
  t.header.push_back("lr");
  for (size_t i = 0; i < j_cols; ++i) {
    t.header.push_back("sampled_j" + std::to_string(i + 1));
  }
  t.header.push_back("wall_ms");

  for (const auto& s : record.steps) {
    std::vector<double> row;
    row.push_back(static_cast<double>(s.step));
    for (Index i = 0; i < p; ++i) row.push_back(s.theta_raw(i));
    if (have_approx) row.push_back(s.approx_objective);
    if (have_exact) row.push_back(s.exact_nll);
    row.push_back(s.grad_norm);
    row.push_back(s.lr);
    for (size_t i = 0; i < j_cols; ++i) {
      row.push_back(i < s.sampled_j.size()
                        ? static_cast<double>(s.sampled_j[i])
                        : 0.0);
    }
    row.push_back(s.wall_ms);
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace rtgp
