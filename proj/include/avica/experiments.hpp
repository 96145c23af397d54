#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "avica/optim_em.hpp"
#include "avica/optim_mle.hpp"

namespace avica {

// ConcatICA-initialized fits (precision 1/m, noise level 1 at the start).
FitResult run_avica_mle(const MultiViewDataset& data, const OptimizerConfig& config);
FitResult run_avica_em(const MultiViewDataset& data, const EmConfig& config);
FitResult run_mvica(const MultiViewDataset& data, const OptimizerConfig& config);

struct ExperimentOptions {
  int seeds = 100;
  int m = 10;
  int k = 5;
  int n = 1000;
  int threads = 0;  // 0: one worker per hardware thread
  OptimizerConfig optimizer;
  std::string out_dir;  // convergence traces land here when non-empty
};

struct ExperimentRecord {
  double condition;
  std::uint64_t seed;
  std::string method;
  std::string metric;
  double value;
};

struct ExperimentReport {
  std::string name;
  std::vector<std::pair<std::string, std::string>> config_echo;
  std::vector<ExperimentRecord> records;  // ordered by (condition, seed, method)
};

// Named sweeps: "reconstruction" (noise-level sweep of the source-recovery
// error across methods), "convergence" (both optimizers on the same
// likelihood, per-seed traces plus final records), "adaptive-scaling" (two
// 1-D views, one heavily corrupted), "precision-recovery" (precision table
// error vs the uniform assignment), "transfer" (leave-one-view-out
// reconstruction scored by R^2).
ExperimentReport run_experiment(const std::string& name, const ExperimentOptions& options);

// report.csv (raw records) + summary.csv (median and quartiles per condition,
// method and metric), schema-versioned header lines.
void write_report_files(const std::string& dir, const ExperimentReport& report);

// Linear-interpolation quantile of a sample (exposed for tests).
double quantile(std::vector<double> values, double p);

}  // namespace avica
