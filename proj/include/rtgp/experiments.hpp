#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rtgp/csv.hpp"
#include "rtgp/data.hpp"
#include "rtgp/training.hpp"

namespace rtgp {

// Mean/SE of the two likelihood terms per (method, J), against the
// Cholesky reference. The paper's bias directions are read straight off
// this table: CG rows sit above exact logdet / below exact invquad, RFF
// rows do the opposite, RR-CG rows straddle both within noise.
struct BiasSweepRow {
  std::string method;
  double j = 0;  // iterations, expected iterations, or feature count
  long replicas = 0;
  double logdet_mean = 0, logdet_se = 0;
  double invquad_mean = 0, invquad_se = 0;
};

struct BiasSweepReport {
  double exact_logdet = 0;
  double exact_invquad = 0;
  std::vector<BiasSweepRow> rows;
  CsvTable to_csv() const;
};

struct BiasSweepOptions {
  std::vector<Index> j_grid = {5, 10, 20, 40, 80};
  Index replicas = 500;
  std::vector<TrainMethod> methods = {TrainMethod::cg, TrainMethod::rr_cg,
                                      TrainMethod::rff, TrainMethod::ss_rff};
  double rr_lambda = 0.1;
  Index ssrff_step = 1;
  std::uint64_t seed = 0;
  int threads = 1;
};

BiasSweepReport bias_sweep(const Dataset& data, const Hyperparams& theta,
                           const BiasSweepOptions& opts);

// Learned lengthscale per (method, J, seed) against the Cholesky optimum,
// all runs started from the same perturbed initialization.
struct LengthscaleBiasRow {
  std::string method;
  Index j = 0;
  std::uint64_t seed = 0;
  double learned_ell = 0;
  double log_ratio = 0;  // log(ℓ_method / ℓ_chol)
};

struct LengthscaleBiasReport {
  double reference_ell = 0;
  double initial_ell = 0;
  std::vector<LengthscaleBiasRow> rows;
  CsvTable to_csv() const;
};

struct LengthscaleBiasOptions {
  Index n = 100;
  double noise_sd = 0.1;  // ε ~ N(0, 0.01)
  std::uint64_t data_seed = 7;
  std::vector<Index> j_grid_cg = {5, 15, 45};
  std::vector<Index> j_grid_rff = {20, 100, 500};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  Index iters = 300;
  double lr = 0.05;
  Index probe_count = 10;  // averages down the trace-term noise
  double start_ell = 0.2;  // for locating the Cholesky optimum
  int threads = 1;
};

LengthscaleBiasReport lengthscale_bias_experiment(
    const LengthscaleBiasOptions& opts);

// Monte-Carlo (or exact-enumeration) unbiasedness check of one estimator
// against its exact reference.
struct EstimatorCheckOutput {
  std::string name;
  double mean = 0, se = 0, exact = 0, z = 0;
};

struct EstimatorCheckReport {
  std::string kind;
  bool enumeration = false;  // exact expectation instead of sampling
  bool pass = false;
  double worst = 0;  // max |z| (MC) or max abs gap (enumeration)
  std::vector<EstimatorCheckOutput> outputs;
  CsvTable to_csv() const;
};

struct EstimatorCheckConfig {
  std::string kind = "rr";  // rr | ss | rr_cg_solve | rr_cg_grad | ss_rff_mll
  long replicas = 20000;
  std::string dist_family = "exponential";  // exponential|harmonic|uniform|point
  double lambda = 0.1;
  long j_min = 1;
  long support_max = 0;  // 0 = instance default
  // synthetic instance
  Index n = 40;
  Index d = 1;
  std::uint64_t seed = 1234;
  double outputscale_sq = 1.0;
  double lengthscale = 0.25;
  double noise_sq = 0.04;
  // ss-rff telescope shape
  Index base_pairs = 2;
  Index step = 1;
  bool negative_control = false;  // rr_cg_grad with a shared y-solve
  int threads = 1;
};

EstimatorCheckReport estimator_check(const EstimatorCheckConfig& cfg);

TruncationDistribution make_distribution(const std::string& family,
                                         double lambda, long j_min, long h);

CsvTable train_record_to_csv(const TrainRecord& record);

}  // namespace rtgp
