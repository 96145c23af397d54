#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "avica/baselines.hpp"
#include "avica/experiments.hpp"
#include "avica/io.hpp"
#include "avica/metrics.hpp"
#include "avica/model.hpp"

namespace avica::cli {

namespace fs = std::filesystem;

int run_generate(const GenerateArgs& args) {
  SynthConfig config;
  config.m = args.m;
  config.k = args.k;
  config.n = args.n;
  config.seed = args.seed;
  config.mean_log_sigma = args.mean_log_sigma;
  config.std_log_sigma = args.std_log_sigma;
  config.dirichlet_alpha = args.dirichlet_alpha;
  auto [data, truth] = generate_dataset(config);
  save_bundle(args.out, data, &truth, config, args.format);
  std::cout << "wrote bundle (m=" << config.m << ", k=" << config.k << ", n=" << config.n
            << ") to " << args.out << '\n';
  return 0;
}

int run_fit(const FitArgs& args) {
  const DatasetBundle bundle = load_bundle(args.bundle);
  const MultiViewDataset& data = bundle.data;

  FitArtifacts artifacts;
  artifacts.algorithm = args.algorithm;

  if (args.algorithm == "avica-mle" || args.algorithm == "mvica") {
    OptimizerConfig cfg;
    cfg.tol = args.tol;
    cfg.mu_sq = args.mu_sq.value_or(1e-3);
    cfg.max_sweeps = args.max_sweeps;
    cfg.ls_max_halvings = args.ls_max_halvings;
    cfg.hess_floor = args.hess_floor;
    cfg.seed = args.seed;
    const FitResult fit =
        args.algorithm == "mvica" ? run_mvica(data, cfg) : run_avica_mle(data, cfg);
    artifacts.params = fit.params;
    artifacts.sources = fit.sources;
    artifacts.trace = fit.trace;
    artifacts.terminated = fit.terminated == Termination::converged ? "converged" : "max_sweeps";
  } else if (args.algorithm == "avica-em") {
    EmConfig cfg;
    cfg.tol = args.tol;
    cfg.mu_sq = args.mu_sq.value_or(0.0);
    cfg.max_sweeps = args.max_sweeps;
    cfg.ls_max_halvings = args.ls_max_halvings;
    cfg.hess_floor = args.hess_floor;
    cfg.seed = args.seed;
    const FitResult fit = run_avica_em(data, cfg);
    artifacts.params = fit.params;
    artifacts.sources = fit.sources;
    artifacts.trace = fit.trace;
    artifacts.terminated = fit.terminated == Termination::converged ? "converged" : "max_sweeps";
  } else if (args.algorithm == "concat" || args.algorithm == "perm") {
    OptimizerConfig cfg;
    cfg.tol = args.tol;
    cfg.mu_sq = args.mu_sq.value_or(1e-3);
    cfg.max_sweeps = args.max_sweeps;
    cfg.ls_max_halvings = args.ls_max_halvings;
    cfg.hess_floor = args.hess_floor;
    cfg.seed = args.seed;
    const GroupIcaResult group = args.algorithm == "concat"
                                     ? concat_ica(data, data.n_components(), cfg)
                                     : perm_ica(data, cfg);
    artifacts.params = params_from_unmixing(group.unmixing, 0.0);
    artifacts.sources = group.sources;
    artifacts.terminated = "none";
  } else {
    throw std::invalid_argument("unknown algorithm: " + args.algorithm);
  }

  save_fit(args.out, artifacts, args.timing);
  std::cout << args.algorithm << " result written to " << args.out
            << " (terminated: " << artifacts.terminated << ")\n";
  return 0;
}

int run_evaluate(const EvaluateArgs& args) {
  const FitArtifacts artifacts = load_fit(args.result);
  const DatasetBundle bundle = load_bundle(args.bundle);
  if (!bundle.truth) throw std::runtime_error("evaluate: bundle has no ground truth");
  const GroundTruth& truth = *bundle.truth;

  std::vector<std::pair<std::string, double>> metrics;
  metrics.emplace_back("reconstruction_error",
                       reconstruction_error(truth.sources, artifacts.sources));
  if (artifacts.algorithm.rfind("avica", 0) == 0) {
    const Alignment al = align_sources(truth.sources, artifacts.sources);
    metrics.emplace_back("precision_error",
                         precision_error(truth.precision, artifacts.params.precision, al));
  }
  metrics.emplace_back("unmixing_recovery_score",
                       unmixing_recovery_score(artifacts.params.unmixing, truth.mixing));
  metrics.emplace_back("nll", neg_log_likelihood(artifacts.params, bundle.data));

  const std::string out_path =
      args.out.empty() ? (fs::path(args.result) / "metrics.csv").string() : args.out;
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << "# avica-metrics v1\n";
  out << "metric,value\n";
  for (const auto& [name, value] : metrics) {
    out << name << ',' << format_double(value) << '\n';
    std::cout << name << " = " << format_double(value) << '\n';
  }
  return 0;
}

int run_experiment_cmd(const ExperimentArgs& args) {
  ExperimentOptions options;
  options.seeds = args.seeds;
  options.m = args.m;
  options.k = args.k;
  options.n = args.n;
  options.threads = args.threads;
  options.optimizer.tol = args.tol;
  options.optimizer.mu_sq = args.mu_sq;
  options.optimizer.max_sweeps = args.max_sweeps;
  options.out_dir = args.out;

  const ExperimentReport report = run_experiment(args.name, options);
  write_report_files(args.out, report);
  std::cout << "experiment " << args.name << ": " << report.records.size()
            << " records written to " << args.out << '\n';
  return 0;
}

}  // namespace avica::cli
