#pragma once

#include <cstdint>
#include <utility>

#include "avica/types.hpp"

namespace avica {

// Generation protocol for the synthetic studies: unit-variance Laplace
// sources, standard-normal mixing entries, Dirichlet precision columns,
// log-normal noise levels, Gaussian source-space noise with variance
// sigma_j^2 / (m * precision(i, j)).
struct SynthConfig {
  int m = 10;
  int k = 5;
  int n = 1000;
  double mean_log_sigma = 0.0;
  double std_log_sigma = 0.70710678118654752440;  // sqrt(1/2)
  double dirichlet_alpha = 1.0;
  std::uint64_t seed = 0;
};

struct GroundTruth {
  Matrix sources;              // k x n
  std::vector<Matrix> mixing;  // m matrices, k x k
  Matrix precision;            // m x k
  Vector noise_level;          // k
  std::vector<Matrix> noise;   // m matrices, k x n
};

// Draw order (one SplitMix64 stream per seed):
//   1. sources, row-major (j ascending, then t)          [1 draw each]
//   2. mixing matrices, i ascending, row-major entries   [2 draws each]
//   3. precision columns, j ascending, i ascending       [1 draw each at alpha == 1]
//   4. noise levels, j ascending                         [2 draws each]
//   5. noise, i ascending, j ascending, t ascending      [2 draws each]
std::pair<MultiViewDataset, GroundTruth> generate_dataset(const SynthConfig& config);

// Two one-dimensional views of a shared Laplace source with fixed noise
// variances on the source (view 1 heavily corrupted, view 2 swept); the
// precision/noise-level ground truth is derived from the two variances.
struct ScaledNoisePairConfig {
  int n = 1000;
  double var_view1 = 100.0;
  double var_view2 = 1.0;
  std::uint64_t seed = 0;
};
std::pair<MultiViewDataset, GroundTruth> generate_scaled_noise_pair(
    const ScaledNoisePairConfig& config);

}  // namespace avica
