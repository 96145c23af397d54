#pragma once

#include "avica/types.hpp"

namespace avica {

// One mixture branch of the closed-form source posterior: the evidence weight
// theta (a Gaussian density value of s~ under variance alpha + sigma^2/m), the
// branch posterior mean and the branch posterior variance.
struct PosteriorComponent {
  double alpha;
  double theta;
  double mean;
  double variance;
};

struct PosteriorComponentPair {
  PosteriorComponent narrow;  // alpha = 1/2
  PosteriorComponent wide;    // alpha = 3/2
};

PosteriorComponentPair posterior_components(double s_tilde, double sigma, int m);

// Posterior mean of a single source value (the MMSE estimate) and its exact
// mixture second moment / variance; responsibilities computed in log space.
void posterior_moments_scalar(double s_tilde, double sigma, int m, double& mean,
                              double& second_moment);

// Paper-literal within-component variance sum(theta * nu) / sum(theta), kept
// as a separate accessor; the exact mixture variance is what the optimizers use.
double posterior_within_variance(double s_tilde, double sigma, int m);

// Per-source, per-sample posterior statistics for a whole dataset.
struct PosteriorMoments {
  Matrix mean;           // k x n, E[s_j | x]
  Matrix second_moment;  // k x n, E[s_j^2 | x]
  Matrix variance;       // k x n, second_moment - mean^2
  Matrix s_tilde;        // k x n, the weighted unmixed average feeding the posterior
};

PosteriorMoments mmse_sources(const ModelParams& params, const MultiViewDataset& data);

// Same, reusing already-unmixed views (optimizer hot path).
PosteriorMoments mmse_sources_from_unmixed(const ModelParams& params,
                                           const std::vector<Matrix>& unmixed);

}  // namespace avica
