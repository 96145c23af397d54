#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"avica: adaptive multiview ICA with learned per-view noise"};
  app.require_subcommand(1);

  avica::cli::GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "write a synthetic dataset bundle");
  generate->add_option("--out", gen.out, "output directory")->required();
  generate->add_option("--m", gen.m, "number of views");
  generate->add_option("--k", gen.k, "number of sources");
  generate->add_option("--n", gen.n, "number of samples");
  generate->add_option("--seed", gen.seed, "generator seed");
  generate->add_option("--mean-log-sigma", gen.mean_log_sigma, "mean of log noise levels");
  generate->add_option("--std-log-sigma", gen.std_log_sigma, "std of log noise levels");
  generate->add_option("--dirichlet-alpha", gen.dirichlet_alpha, "precision Dirichlet parameter");
  generate->add_option("--format", gen.format, "matrix file format: csv or bin")
      ->check(CLI::IsMember({"csv", "bin"}));

  avica::cli::FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit a decomposition to a bundle");
  fit_cmd->add_option("--bundle", fit.bundle, "dataset bundle directory")->required();
  fit_cmd->add_option("--algorithm", fit.algorithm, "avica-mle | avica-em | mvica | concat | perm")
      ->check(CLI::IsMember({"avica-mle", "avica-em", "mvica", "concat", "perm"}));
  fit_cmd->add_option("--out", fit.out, "result directory")->required();
  fit_cmd->add_option("--tol", fit.tol, "gradient infinity-norm tolerance");
  double mu_sq_opt = -1.0;
  fit_cmd
      ->add_option("--mu-sq", mu_sq_opt,
                   "precision floor (defaults: 1e-3 for avica-mle, 0 for avica-em)")
      ->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--max-sweeps", fit.max_sweeps, "sweep cap");
  fit_cmd->add_option("--ls-max-halvings", fit.ls_max_halvings, "line-search halvings");
  fit_cmd->add_option("--hess-floor", fit.hess_floor, "Hessian eigenvalue floor");
  fit_cmd->add_option("--seed", fit.seed, "initialization seed");
  fit_cmd->add_flag("--timing", fit.timing, "record wall seconds in the trace table");

  avica::cli::EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "score a result against ground truth");
  eval_cmd->add_option("--result", eval.result, "result directory")->required();
  eval_cmd->add_option("--bundle", eval.bundle, "dataset bundle directory")->required();
  eval_cmd->add_option("--out", eval.out, "metrics file (default <result>/metrics.csv)");

  avica::cli::ExperimentArgs exp;
  auto* exp_cmd = app.add_subcommand("experiment", "run a named synthetic study");
  exp_cmd
      ->add_option("--name", exp.name,
                   "reconstruction | convergence | adaptive-scaling | precision-recovery | "
                   "transfer")
      ->required();
  exp_cmd->add_option("--out", exp.out, "report directory")->required();
  exp_cmd->add_option("--seeds", exp.seeds, "number of seeded repetitions");
  exp_cmd->add_option("--m", exp.m, "number of views");
  exp_cmd->add_option("--k", exp.k, "number of sources");
  exp_cmd->add_option("--n", exp.n, "number of samples");
  exp_cmd->add_option("--threads", exp.threads, "worker threads (0 = auto)");
  exp_cmd->add_option("--tol", exp.tol, "optimizer tolerance");
  exp_cmd->add_option("--mu-sq", exp.mu_sq, "precision floor for the adaptive fits");
  exp_cmd->add_option("--max-sweeps", exp.max_sweeps, "sweep cap");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return avica::cli::run_generate(gen);
    if (*fit_cmd) {
      if (mu_sq_opt >= 0.0) fit.mu_sq = mu_sq_opt;
      return avica::cli::run_fit(fit);
    }
    if (*eval_cmd) return avica::cli::run_evaluate(eval);
    if (*exp_cmd) return avica::cli::run_experiment_cmd(exp);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
