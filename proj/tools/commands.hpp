#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace avica::cli {

struct GenerateArgs {
  std::string out;
  int m = 10;
  int k = 5;
  int n = 1000;
  std::uint64_t seed = 0;
  double mean_log_sigma = 0.0;
  double std_log_sigma = 0.70710678118654752440;
  double dirichlet_alpha = 1.0;
  std::string format = "csv";
};

struct FitArgs {
  std::string bundle;
  std::string algorithm = "avica-mle";  // avica-mle | avica-em | mvica | concat | perm
  std::string out;
  double tol = 1e-3;
  std::optional<double> mu_sq;  // defaults: 1e-3 (avica-mle), 0 (avica-em)
  int max_sweeps = 1000;
  int ls_max_halvings = 20;
  double hess_floor = 1e-7;
  std::uint64_t seed = 0;
  bool timing = false;  // write wall seconds into the trace table
};

struct EvaluateArgs {
  std::string result;
  std::string bundle;
  std::string out;  // metrics file; defaults to <result>/metrics.csv
};

struct ExperimentArgs {
  std::string name;
  std::string out;
  int seeds = 100;
  int m = 10;
  int k = 5;
  int n = 1000;
  int threads = 0;
  double tol = 1e-3;
  double mu_sq = 1e-3;
  int max_sweeps = 1000;
};

int run_generate(const GenerateArgs& args);
int run_fit(const FitArgs& args);
int run_evaluate(const EvaluateArgs& args);
int run_experiment_cmd(const ExperimentArgs& args);

}  // namespace avica::cli
