#pragma once

#include <cstdint>

#include "avica/types.hpp"

namespace avica {

struct OptimizerConfig {
  double tol = 1e-3;         // gradient infinity-norm threshold
  double mu_sq = 1e-3;       // precision floor installed into the fitted params
  int max_sweeps = 1000;
  int ls_max_halvings = 20;
  double hess_floor = 1e-7;  // eigenvalue floor for Hessian regularization
  std::uint64_t seed = 0;    // consumed by ICA initialization, not by the fit itself
};

struct SweepRecord {
  double unmixing_grad_inf;   // max over views of ||G^W||_inf
  double precision_grad_inf;  // max over sources of ||G^eta||_inf
  double noise_grad_inf;      // max over sources of ||G^sigma||_inf
  double nll;
  double seconds;             // wall time since the fit started
};

struct ConvergenceTrace {
  std::vector<SweepRecord> sweeps;
};

enum class Termination { converged, max_sweeps };

struct FitResult {
  ModelParams params;
  Matrix sources;  // k x n MMSE posterior means at the fitted parameters
  ConvergenceTrace trace;
  Termination terminated = Termination::max_sweeps;
};

// One line-searched quasi-Newton step on a single parameter block. The
// reported gradient norm is the pre-step norm; a rejected line search leaves
// the block unchanged.
struct StepOutcome {
  ModelParams params;
  double grad_inf_norm = 0.0;
  bool accepted = false;
};

StepOutcome step_unmixing(const ModelParams& params, const MultiViewDataset& data, int view,
                          const OptimizerConfig& config);
StepOutcome step_precision(const ModelParams& params, const MultiViewDataset& data, int source,
                           const OptimizerConfig& config);
StepOutcome step_sigma(const ModelParams& params, const MultiViewDataset& data, int source,
                       const OptimizerConfig& config);

// Alternating quasi-Newton descent: sweeps of all views' unmixing steps, then
// per-source precision and noise steps, until the sweep's max gradient
// infinity-norm drops to config.tol or max_sweeps is reached.
FitResult fit_mle(const MultiViewDataset& data, const OptimizerConfig& config,
                  const ModelParams& init);

// Fixed-noise mode: precision frozen at 1/m and sigma at 1; unmixing steps only.
FitResult fit_mle_fixed_noise(const MultiViewDataset& data, const OptimizerConfig& config,
                              const ModelParams& init);

// Regularized Newton directions (exposed for tests).
// Pairwise 2x2 blocks of the unmixing Hessian approximation, eigenvalue-floored.
Matrix solve_unmixing_direction(const Matrix& grad, const Matrix& hess_coef, double hess_floor);
// Tangent-space solve with eigenvalue flooring; eta spans the sphere's radial direction.
Vector solve_precision_direction(const Vector& riem_grad, const Matrix& riem_hess,
                                 const Vector& eta, double hess_floor);

}  // namespace avica
