// Command-line laboratory for GP hyperparameter-learning experiments:
// synthetic data generation, training with exact/truncated/unbiased
// methods, bias sweeps, the lengthscale-bias study, and estimator checks.
// Every run writes a manifest sufficient to reproduce its outputs bitwise.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "rtgp/csv.hpp"
#include "rtgp/data.hpp"
#include "rtgp/experiments.hpp"
#include "rtgp/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rtgp;

namespace {

constexpr const char* kVersion = "0.1.0";

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw Error("config: unknown key '" + item.key() + "' in " + where);
    }
  }
}

json versions_json() {
  return json{{"rtgp", kVersion},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                            std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"compiler", __VERSION__}};
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const json& config, std::uint64_t seed,
                    const std::vector<std::string>& outputs) {
  json manifest{{"command", command},
                {"config", config},
                {"seed", seed},
                {"versions", versions_json()},
                {"outputs", outputs}};
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
}

Dataset dataset_to_table_roundtrip(const Dataset& data, const fs::path& path) {
  CsvTable t;
  for (Index k = 0; k < data.dim(); ++k) {
    t.header.push_back("x" + std::to_string(k));
  }
  t.header.push_back("y");
  for (Index i = 0; i < data.size(); ++i) {
    std::vector<double> row;
    for (Index k = 0; k < data.dim(); ++k) row.push_back(data.x(i, k));
    row.push_back(data.y(i));
    t.rows.push_back(std::move(row));
  }
  write_csv(path.string(), t);
  return data;
}

struct DataSpec {
  std::string type = "gp";  // sine | gp | csv
  Index n = 300;
  Index d = 1;
  double noise_sd = 0.1;
  double outputscale_sq = 1.0;
  double lengthscale = 0.2;
  double noise_sq = 0.01;
  std::string path;
  std::string target_column = "y";
  bool standardize = true;
  std::uint64_t data_seed = 7;

  static DataSpec from_json(const json& j) {
    reject_unknown_keys(j,
                        {"type", "n", "d", "noise_sd", "outputscale_sq",
                         "lengthscale", "noise_sq", "path", "target_column",
                         "standardize", "data_seed"},
                        "data");
    DataSpec spec;
    spec.type = j.value("type", spec.type);
    spec.n = j.value("n", spec.n);
    spec.d = j.value("d", spec.d);
    spec.noise_sd = j.value("noise_sd", spec.noise_sd);
    spec.outputscale_sq = j.value("outputscale_sq", spec.outputscale_sq);
    spec.lengthscale = j.value("lengthscale", spec.lengthscale);
    spec.noise_sq = j.value("noise_sq", spec.noise_sq);
    spec.path = j.value("path", spec.path);
    spec.target_column = j.value("target_column", spec.target_column);
    spec.standardize = j.value("standardize", spec.standardize);
    spec.data_seed = j.value("data_seed", spec.data_seed);
    return spec;
  }

  Dataset load() const {
    if (type == "sine") {
      Rng rng(data_seed);
      return gen_toy_sine(n, noise_sd, rng);
    }
    if (type == "gp") {
      Rng rng(data_seed);
      return gen_gp_dataset(
          n, d, Hyperparams::isotropic(outputscale_sq, lengthscale, noise_sq),
          rng);
    }
    if (type == "csv") return load_csv(path, target_column, standardize);
    throw Error("config: unknown data type '" + type + "'");
  }
};

Hyperparams theta_from_json(const json& j, Index d) {
  reject_unknown_keys(j, {"outputscale_sq", "lengthscales", "lengthscale",
                          "noise_sq"},
                      "init");
  Hyperparams theta;
  theta.outputscale_sq = j.value("outputscale_sq", 1.0);
  theta.noise_sq = j.value("noise_sq", 0.1);
  if (j.contains("lengthscales")) {
    const auto ls = j["lengthscales"].get<std::vector<double>>();
    theta.lengthscales.resize(static_cast<Index>(ls.size()));
    for (size_t i = 0; i < ls.size(); ++i) {
      theta.lengthscales(static_cast<Index>(i)) = ls[i];
    }
  } else {
    theta.lengthscales = Vector::Constant(1, j.value("lengthscale", 0.5));
  }
  theta.validate(d);
  return theta;
}

json theta_to_json(const Hyperparams& theta) {
  std::vector<double> ls(theta.lengthscales.begin(), theta.lengthscales.end());
  return json{{"outputscale_sq", theta.outputscale_sq},
              {"lengthscales", ls},
              {"noise_sq", theta.noise_sq}};
}

TrainConfig train_config_from_json(const json& j) {
  reject_unknown_keys(
      j,
      {"method", "iters", "lr", "schedule_milestones", "schedule_factor",
       "seed", "cg_max_iter", "rr_lambda", "rr_j_min", "rr_expected_j",
       "probe_count", "precond_rank", "feature_count", "ssrff_base_pairs",
       "ssrff_step", "exact_telemetry", "frozen_params", "data", "init"},
      "run config");
  TrainConfig cfg;
  cfg.method = train_method_from_string(j.value("method", "cholesky"));
  cfg.iters = j.value("iters", cfg.iters);
  cfg.lr = j.value("lr", cfg.lr);
  if (j.contains("schedule_milestones")) {
    cfg.schedule_milestones =
        j["schedule_milestones"].get<std::vector<double>>();
  }
  cfg.schedule_factor = j.value("schedule_factor", cfg.schedule_factor);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.cg_max_iter = j.value("cg_max_iter", cfg.cg_max_iter);
  cfg.rr_lambda = j.value("rr_lambda", cfg.rr_lambda);
  cfg.rr_j_min = j.value("rr_j_min", cfg.rr_j_min);
  cfg.rr_expected_j = j.value("rr_expected_j", cfg.rr_expected_j);
  cfg.probe_count = j.value("probe_count", cfg.probe_count);
  cfg.precond_rank = j.value("precond_rank", cfg.precond_rank);
  cfg.feature_count = j.value("feature_count", cfg.feature_count);
  cfg.ssrff_base_pairs = j.value("ssrff_base_pairs", cfg.ssrff_base_pairs);
  cfg.ssrff_step = j.value("ssrff_step", cfg.ssrff_step);
  cfg.exact_telemetry = j.value("exact_telemetry", cfg.exact_telemetry);
  if (j.contains("frozen_params")) {
    for (long v : j["frozen_params"].get<std::vector<long>>()) {
      cfg.frozen_params.push_back(v);
    }
  }
  cfg.validate();
  return cfg;
}

std::vector<Index> parse_grid(const std::string& csv) {
  std::vector<Index> grid;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) grid.push_back(std::stol(tok));
  if (grid.empty()) throw Error("empty grid");
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GP training lab: exact, truncated, and bias-free methods"};
  app.require_subcommand(1);

  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int threads = 2;
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", seed, "base RNG seed")->capture_default_str();
  app.add_option("--threads", threads, "worker threads for replica loops")
      ->capture_default_str();

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset CSV");
  DataSpec gen_spec;
  std::string gen_out = "data.csv";
  gen->add_option("--type", gen_spec.type, "sine | gp");
  gen->add_option("--n", gen_spec.n, "rows");
  gen->add_option("--d", gen_spec.d, "input dimensions (gp)");
  gen->add_option("--noise-sd", gen_spec.noise_sd, "sine noise sd");
  gen->add_option("--outputscale-sq", gen_spec.outputscale_sq, "gp o²");
  gen->add_option("--lengthscale", gen_spec.lengthscale, "gp ℓ");
  gen->add_option("--noise-sq", gen_spec.noise_sq, "gp σ²");
  gen->add_option("--data-seed", gen_spec.data_seed, "data RNG seed");
  gen->add_option("--file", gen_out, "output CSV path");

  // train
  auto* train_cmd = app.add_subcommand("train", "run a training config");
  std::string config_path;
  bool seed_given = false;
  train_cmd->add_option("--config", config_path, "RunConfig JSON")->required();
  train_cmd->add_flag("--override-seed", seed_given,
                      "use --seed instead of the config seed");

  // bias-sweep
  auto* sweep = app.add_subcommand(
      "bias-sweep", "mean/SE of both likelihood terms per method and J");
  DataSpec sweep_data;
  BiasSweepOptions sweep_opts;
  std::string sweep_methods = "cg,rr_cg,rff,ss_rff";
  std::string sweep_grid = "5,10,20,40,80";
  double sweep_ell = 0.2, sweep_out_sq = 1.0, sweep_noise_sq = 0.01;
  sweep->add_option("--n", sweep_data.n, "instance size");
  sweep->add_option("--lengthscale", sweep_ell, "kernel ℓ");
  sweep->add_option("--outputscale-sq", sweep_out_sq, "kernel o²");
  sweep->add_option("--noise-sq", sweep_noise_sq, "kernel σ²");
  sweep->add_option("--data-seed", sweep_data.data_seed, "data RNG seed");
  sweep->add_option("--j-grid", sweep_grid, "comma-separated J values");
  sweep->add_option("--replicas", sweep_opts.replicas, "replicas per cell");
  sweep->add_option("--methods", sweep_methods, "subset of cg,rr_cg,rff,ss_rff");
  sweep->add_option("--rr-lambda", sweep_opts.rr_lambda, "RR-CG λ");

  // lengthscale-bias
  auto* lsb = app.add_subcommand(
      "lengthscale-bias", "learned ℓ per method/J/seed on the toy sine");
  LengthscaleBiasOptions lsb_opts;
  std::string lsb_cg_grid = "5,15,45";
  std::string lsb_rff_grid = "20,100,500";
  std::string lsb_seeds = "1,2,3";
  lsb->add_option("--n", lsb_opts.n, "toy size");
  lsb->add_option("--cg-grid", lsb_cg_grid, "CG iteration grid");
  lsb->add_option("--rff-grid", lsb_rff_grid, "RFF feature grid");
  lsb->add_option("--seeds", lsb_seeds, "training seeds");
  lsb->add_option("--iters", lsb_opts.iters, "Adam steps per run");
  lsb->add_option("--lr", lsb_opts.lr, "Adam learning rate");
  lsb->add_option("--data-seed", lsb_opts.data_seed, "toy data seed");

  // estimator-check
  auto* check = app.add_subcommand(
      "estimator-check", "unbiasedness check against an exact reference");
  EstimatorCheckConfig check_cfg;
  check->add_option("--kind", check_cfg.kind,
                    "rr | ss | rr_cg_solve | rr_cg_grad | ss_rff_mll");
  check->add_option("--replicas", check_cfg.replicas,
                    "Monte-Carlo replicas (0 = enumerate, where supported)");
  check->add_option("--dist", check_cfg.dist_family,
                    "exponential | harmonic | uniform | point");
  check->add_option("--lambda", check_cfg.lambda, "exponential decay rate");
  check->add_option("--j-min", check_cfg.j_min, "minimum truncation");
  check->add_option("--support-max", check_cfg.support_max,
                    "H (0 = instance default)");
  check->add_option("--n", check_cfg.n, "instance size");
  check->add_option("--lengthscale", check_cfg.lengthscale, "instance ℓ");
  check->add_option("--noise-sq", check_cfg.noise_sq, "instance σ²");
  check->add_option("--base-pairs", check_cfg.base_pairs, "SS-RFF J₀ pairs");
  check->add_option("--step", check_cfg.step, "SS-RFF block step c");
  check->add_flag("--negative-control", check_cfg.negative_control,
                  "share the y-solve in rr_cg_grad (documented bias)");

  // predict
  auto* predict = app.add_subcommand(
      "predict", "posterior mean/variance at test inputs");
  std::string pred_theta_path, pred_train_csv, pred_test_csv;
  std::string pred_target = "y";
  bool pred_no_standardize = false;
  predict->add_option("--theta", pred_theta_path, "hyperparameter JSON")
      ->required();
  predict->add_option("--train-csv", pred_train_csv, "training data CSV")
      ->required();
  predict->add_option("--test-csv", pred_test_csv, "test inputs CSV")
      ->required();
  predict->add_option("--target", pred_target, "target column name");
  predict->add_flag("--no-standardize", pred_no_standardize,
                    "skip z-score standardization of the training data");

  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    if (*gen) {
      Dataset data = gen_spec.load();
      dataset_to_table_roundtrip(data, gen_out);
      json cfg{{"type", gen_spec.type},
               {"n", gen_spec.n},
               {"d", gen_spec.d},
               {"noise_sd", gen_spec.noise_sd},
               {"outputscale_sq", gen_spec.outputscale_sq},
               {"lengthscale", gen_spec.lengthscale},
               {"noise_sq", gen_spec.noise_sq},
               {"data_seed", gen_spec.data_seed},
               {"file", gen_out}};
      write_manifest(dir, "gen-data", cfg, gen_spec.data_seed, {gen_out});
      std::cout << "wrote " << gen_out << "\n";
    } else if (*train_cmd) {
      std::ifstream in(config_path);
      if (!in) throw Error("cannot open config " + config_path);
      json j = json::parse(in);
      TrainConfig cfg = train_config_from_json(j);
      if (seed_given) cfg.seed = seed;
      const DataSpec data_spec =
          DataSpec::from_json(j.value("data", json::object()));
      const Dataset data = data_spec.load();
      const Hyperparams theta0 =
          theta_from_json(j.value("init", json::object()), data.dim());

      const TrainRecord record = train(data, theta0, cfg);
      const std::string record_path = (dir / "train_record.csv").string();
      write_csv(record_path, train_record_to_csv(record));
      const std::string theta_path = (dir / "theta_final.json").string();
      std::ofstream theta_out(theta_path);
      theta_out << theta_to_json(record.theta_final).dump(2) << "\n";

      j["seed"] = cfg.seed;
      write_manifest(dir, "train", j, cfg.seed, {record_path, theta_path});
      std::cout << "final nll="
                << (record.steps.back().exact_nll == record.steps.back().exact_nll
                        ? record.steps.back().exact_nll
                        : record.steps.back().approx_objective)
                << " theta=" << theta_to_json(record.theta_final).dump()
                << "\n";
    } else if (*sweep) {
      sweep_opts.seed = seed;
      sweep_opts.threads = threads;
      sweep_opts.j_grid = parse_grid(sweep_grid);
      sweep_opts.methods.clear();
      std::stringstream ss(sweep_methods);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        sweep_opts.methods.push_back(train_method_from_string(tok));
      }
      Rng rng(sweep_data.data_seed);
      const Hyperparams theta =
          Hyperparams::isotropic(sweep_out_sq, sweep_ell, sweep_noise_sq);
      const Dataset data = gen_gp_dataset(sweep_data.n, 1, theta, rng);
      const BiasSweepReport report = bias_sweep(data, theta, sweep_opts);
      const std::string csv_path = (dir / "bias_sweep.csv").string();
      write_csv(csv_path, report.to_csv());
      json cfg{{"n", sweep_data.n},
               {"lengthscale", sweep_ell},
               {"outputscale_sq", sweep_out_sq},
               {"noise_sq", sweep_noise_sq},
               {"data_seed", sweep_data.data_seed},
               {"j_grid", sweep_grid},
               {"replicas", sweep_opts.replicas},
               {"methods", sweep_methods},
               {"rr_lambda", sweep_opts.rr_lambda}};
      write_manifest(dir, "bias-sweep", cfg, seed, {csv_path});
      std::cout << "exact logdet=" << report.exact_logdet
                << " invquad=" << report.exact_invquad << "; wrote "
                << csv_path << "\n";
    } else if (*lsb) {
      lsb_opts.threads = threads;
      lsb_opts.j_grid_cg = parse_grid(lsb_cg_grid);
      lsb_opts.j_grid_rff = parse_grid(lsb_rff_grid);
      lsb_opts.seeds.clear();
      for (Index s : parse_grid(lsb_seeds)) {
        lsb_opts.seeds.push_back(static_cast<std::uint64_t>(s));
      }
      const LengthscaleBiasReport report = lengthscale_bias_experiment(lsb_opts);
      const std::string csv_path = (dir / "lengthscale_bias.csv").string();
      write_csv(csv_path, report.to_csv());
      json cfg{{"n", lsb_opts.n},
               {"cg_grid", lsb_cg_grid},
               {"rff_grid", lsb_rff_grid},
               {"seeds", lsb_seeds},
               {"iters", lsb_opts.iters},
               {"lr", lsb_opts.lr},
               {"data_seed", lsb_opts.data_seed}};
      write_manifest(dir, "lengthscale-bias", cfg, seed, {csv_path});
      std::cout << "reference ell=" << report.reference_ell << "; wrote "
                << csv_path << "\n";
    } else if (*check) {
      check_cfg.threads = threads;
      check_cfg.seed = seed ? seed : check_cfg.seed;
      const EstimatorCheckReport report = estimator_check(check_cfg);
      const std::string csv_path = (dir / "estimator_check.csv").string();
      write_csv(csv_path, report.to_csv());
      json cfg{{"kind", check_cfg.kind},
               {"replicas", check_cfg.replicas},
               {"dist", check_cfg.dist_family},
               {"lambda", check_cfg.lambda},
               {"j_min", check_cfg.j_min},
               {"support_max", check_cfg.support_max},
               {"n", check_cfg.n},
               {"negative_control", check_cfg.negative_control}};
      write_manifest(dir, "estimator-check", cfg, check_cfg.seed, {csv_path});
      std::cout << (report.pass ? "PASS" : "FAIL")
                << (report.enumeration ? " (enumeration" : " (monte-carlo")
                << ", worst=" << report.worst << ")\n";
      return report.pass ? 0 : 1;
    } else if (*predict) {
      std::ifstream in(pred_theta_path);
      if (!in) throw Error("cannot open theta " + pred_theta_path);
      const json tj = json::parse(in);
      const Dataset data =
          load_csv(pred_train_csv, pred_target, !pred_no_standardize);
      const Hyperparams theta = theta_from_json(tj, data.dim());

      CsvTable test = read_csv(pred_test_csv);
      Matrix xstar(static_cast<Index>(test.rows.size()), data.dim());
      for (size_t i = 0; i < test.rows.size(); ++i) {
        Index k = 0;
        for (size_t c = 0; c < test.header.size() && k < data.dim(); ++c) {
          if (test.header[c] == pred_target) continue;
          double v = test.rows[i][c];
          if (data.standardization) {
            v = (v - data.standardization->feature_means(k)) /
                data.standardization->feature_scales(k);
          }
          xstar(static_cast<Index>(i), k++) = v;
        }
      }
      Posterior post = posterior_predict(data, theta, xstar);
      if (data.standardization) {
        post.mean = unstandardize_target(data, post.mean);
        post.variance *= data.standardization->target_scale *
                         data.standardization->target_scale;
      }
      CsvTable out_table;
      out_table.header = {"mean", "variance"};
      for (Index i = 0; i < post.mean.size(); ++i) {
        out_table.rows.push_back({post.mean(i), post.variance(i)});
      }
      const std::string csv_path = (dir / "predictions.csv").string();
      write_csv(csv_path, out_table);
      json cfg{{"theta", tj},
               {"train_csv", pred_train_csv},
               {"test_csv", pred_test_csv},
               {"target", pred_target},
               {"standardize", !pred_no_standardize}};
      write_manifest(dir, "predict", cfg, 0, {csv_path});
      std::cout << "wrote " << csv_path << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
