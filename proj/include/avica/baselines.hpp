#pragma once

#include "avica/optim_mle.hpp"

namespace avica {

// Per-view PCA: centering followed by projection onto the leading principal
// directions. Eigenvector signs are fixed (largest-magnitude entry positive)
// so the reduction is deterministic given the data.
struct ReductionOperator {
  std::vector<Matrix> projection;       // k_out x k_in per view
  std::vector<Matrix> back_projection;  // k_in x k_out per view
  std::vector<Vector> means;            // k_in per view
};

std::pair<MultiViewDataset, ReductionOperator> pca_reduce_per_view(const MultiViewDataset& data,
                                                                   int k_out);

// Smoothed-density Infomax: the single-view (m = 1) instance of the shared
// model, with the precision pinned at one and the noise level learned.
// Initialized at a PCA whitener composed with a seeded random rotation.
// `sources` are the raw unmixed rows W x (baseline semantics, no shrinkage).
struct IcaResult {
  Matrix unmixing;
  Matrix sources;
  ConvergenceTrace trace;
  Termination terminated = Termination::max_sweeps;
};
IcaResult single_view_ica(const Matrix& x, const OptimizerConfig& config);

// Group baselines: per-view unmixing matrices plus one shared source array.
struct GroupIcaResult {
  std::vector<Matrix> unmixing;
  Matrix sources;
};

// PCA on the component-stacked views down to k, ICA on the reduction, and
// least-squares per-view unmixing matrices W^i = S (x^i)^T (x^i (x^i)^T)^-1.
GroupIcaResult concat_ica(const MultiViewDataset& data, int k, const OptimizerConfig& config);

// Independent per-view ICA, Hungarian matching to view 1 on absolute
// correlation, sign fixing, then averaging of the matched sources.
GroupIcaResult perm_ica(const MultiViewDataset& data, const OptimizerConfig& config);

// Fixed-noise multiview fit: precision frozen at 1/m and noise level at 1.
FitResult mvica_fit(const MultiViewDataset& data, const OptimizerConfig& config,
                    const ModelParams& init);

// Model parameters assembled from a group baseline (precision 1/m, noise 1),
// the standard initialization for the adaptive fits.
ModelParams params_from_unmixing(const std::vector<Matrix>& unmixing, double mu_sq);

}  // namespace avica
