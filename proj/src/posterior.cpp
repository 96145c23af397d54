#include "avica/posterior.hpp"

#include <cmath>

#include "avica/model.hpp"

namespace avica {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kAlpha0 = 0.5;
constexpr double kAlpha1 = 1.5;

void check_args(double sigma, int m) {
  if (!(sigma > 0.0)) throw std::invalid_argument("posterior: sigma must be > 0");
  if (m < 1) throw std::invalid_argument("posterior: m must be >= 1");
}

PosteriorComponent make_component(double alpha, double s_tilde, double sigma, int m) {
  const double sig2 = sigma * sigma;
  const double v = alpha + sig2 / m;  // evidence variance
  PosteriorComponent c;
  c.alpha = alpha;
  c.theta = std::exp(-s_tilde * s_tilde / (2.0 * v) - 0.5 * (kLog2Pi + std::log(v)));
  c.mean = m * alpha * s_tilde / (m * alpha + sig2);
  c.variance = sig2 * alpha / (m * alpha + sig2);
  return c;
}

// log theta for both branches; used for underflow-safe responsibilities.
void log_thetas(double s_tilde, double sigma, int m, double& l0, double& l1) {
  const double sig2 = sigma * sigma;
  const double v0 = kAlpha0 + sig2 / m;
  const double v1 = kAlpha1 + sig2 / m;
  l0 = -s_tilde * s_tilde / (2.0 * v0) - 0.5 * (kLog2Pi + std::log(v0));
  l1 = -s_tilde * s_tilde / (2.0 * v1) - 0.5 * (kLog2Pi + std::log(v1));
}
}  // namespace

PosteriorComponentPair posterior_components(double s_tilde, double sigma, int m) {
  check_args(sigma, m);
  return {make_component(kAlpha0, s_tilde, sigma, m),
          make_component(kAlpha1, s_tilde, sigma, m)};
}

void posterior_moments_scalar(double s_tilde, double sigma, int m, double& mean,
                              double& second_moment) {
  check_args(sigma, m);
  double l0, l1;
  log_thetas(s_tilde, sigma, m, l0, l1);
  const double hi = std::max(l0, l1);
  const double e0 = std::exp(l0 - hi);
  const double e1 = std::exp(l1 - hi);
  const double w0 = e0 / (e0 + e1);
  const double w1 = 1.0 - w0;

  const double sig2 = sigma * sigma;
  const double mu0 = m * kAlpha0 * s_tilde / (m * kAlpha0 + sig2);
  const double mu1 = m * kAlpha1 * s_tilde / (m * kAlpha1 + sig2);
  const double nu0 = sig2 * kAlpha0 / (m * kAlpha0 + sig2);
  const double nu1 = sig2 * kAlpha1 / (m * kAlpha1 + sig2);

  mean = w0 * mu0 + w1 * mu1;
  second_moment = w0 * (nu0 + mu0 * mu0) + w1 * (nu1 + mu1 * mu1);
}

double posterior_within_variance(double s_tilde, double sigma, int m) {
  check_args(sigma, m);
  double l0, l1;
  log_thetas(s_tilde, sigma, m, l0, l1);
  const double hi = std::max(l0, l1);
  const double e0 = std::exp(l0 - hi);
  const double e1 = std::exp(l1 - hi);
  const double w0 = e0 / (e0 + e1);
  const double sig2 = sigma * sigma;
  const double nu0 = sig2 * kAlpha0 / (m * kAlpha0 + sig2);
  const double nu1 = sig2 * kAlpha1 / (m * kAlpha1 + sig2);
  return w0 * nu0 + (1.0 - w0) * nu1;
}

PosteriorMoments mmse_sources_from_unmixed(const ModelParams& params,
                                           const std::vector<Matrix>& unmixed) {
  const int m = params.n_views();
  const int k = params.n_components();
  const auto n = unmixed[0].cols();

  PosteriorMoments out;
  out.s_tilde = weighted_mean_sources(unmixed, params.precision);
  out.mean.resize(k, n);
  out.second_moment.resize(k, n);
  for (int j = 0; j < k; ++j) {
    const double sigma = params.noise_level[j];
    check_args(sigma, m);
    for (Eigen::Index t = 0; t < n; ++t)
      posterior_moments_scalar(out.s_tilde(j, t), sigma, m, out.mean(j, t),
                               out.second_moment(j, t));
  }
  out.variance = out.second_moment - out.mean.cwiseProduct(out.mean);
  return out;
}

PosteriorMoments mmse_sources(const ModelParams& params, const MultiViewDataset& data) {
  return mmse_sources_from_unmixed(params, unmix(params, data));
}

}  // namespace avica
