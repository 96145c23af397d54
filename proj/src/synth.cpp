#include "avica/synth.hpp"

#include <cmath>

#include "avica/rng.hpp"

namespace avica {

std::pair<MultiViewDataset, GroundTruth> generate_dataset(const SynthConfig& config) {
  if (config.m < 1 || config.k < 1 || config.n < 1)
    throw std::invalid_argument("generate_dataset: counts must be >= 1");
  if (config.std_log_sigma < 0.0)
    throw std::invalid_argument("generate_dataset: std_log_sigma must be >= 0");
  const int m = config.m, k = config.k, n = config.n;
  SplitMix64 rng(config.seed);

  GroundTruth truth;
  truth.sources.resize(k, n);
  for (int j = 0; j < k; ++j)
    for (int t = 0; t < n; ++t) truth.sources(j, t) = rng.laplace_unit_variance();

  truth.mixing.resize(m);
  for (int i = 0; i < m; ++i) {
    truth.mixing[i].resize(k, k);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) truth.mixing[i](a, b) = rng.normal();
  }

  truth.precision.resize(m, k);
  for (int j = 0; j < k; ++j) {
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
      truth.precision(i, j) = rng.gamma(config.dirichlet_alpha);
      total += truth.precision(i, j);
    }
    truth.precision.col(j) /= total;
  }

  truth.noise_level.resize(k);
  for (int j = 0; j < k; ++j)
    truth.noise_level[j] = std::exp(config.mean_log_sigma + config.std_log_sigma * rng.normal());

  truth.noise.resize(m);
  MultiViewDataset data;
  data.views.resize(m);
  for (int i = 0; i < m; ++i) {
    truth.noise[i].resize(k, n);
    for (int j = 0; j < k; ++j) {
      const double sd = truth.noise_level[j] / std::sqrt(m * truth.precision(i, j));
      for (int t = 0; t < n; ++t) truth.noise[i](j, t) = sd * rng.normal();
    }
    data.views[i] = truth.mixing[i] * (truth.sources + truth.noise[i]);
  }
  return {std::move(data), std::move(truth)};
}

std::pair<MultiViewDataset, GroundTruth> generate_scaled_noise_pair(
    const ScaledNoisePairConfig& config) {
  if (config.n < 1) throw std::invalid_argument("generate_scaled_noise_pair: n must be >= 1");
  if (!(config.var_view1 > 0.0) || !(config.var_view2 > 0.0))
    throw std::invalid_argument("generate_scaled_noise_pair: variances must be > 0");
  const int n = config.n;
  SplitMix64 rng(config.seed);

  GroundTruth truth;
  truth.sources.resize(1, n);
  for (int t = 0; t < n; ++t) truth.sources(0, t) = rng.laplace_unit_variance();

  truth.mixing.resize(2);
  for (int i = 0; i < 2; ++i) {
    truth.mixing[i].resize(1, 1);
    truth.mixing[i](0, 0) = rng.normal();
  }

  // Derive (sigma, precision) from the two per-view source-noise variances.
  const double v1 = config.var_view1, v2 = config.var_view2;
  const double sig2 = 1.0 / (0.5 * (1.0 / v1 + 1.0 / v2));
  truth.noise_level = Vector::Constant(1, std::sqrt(sig2));
  truth.precision.resize(2, 1);
  truth.precision(0, 0) = sig2 / (2.0 * v1);
  truth.precision(1, 0) = sig2 / (2.0 * v2);

  truth.noise.resize(2);
  MultiViewDataset data;
  data.views.resize(2);
  const double sds[2] = {std::sqrt(v1), std::sqrt(v2)};
  for (int i = 0; i < 2; ++i) {
    truth.noise[i].resize(1, n);
    for (int t = 0; t < n; ++t) truth.noise[i](0, t) = sds[i] * rng.normal();
    data.views[i] = truth.mixing[i] * (truth.sources + truth.noise[i]);
  }
  return {std::move(data), std::move(truth)};
}

}  // namespace avica
