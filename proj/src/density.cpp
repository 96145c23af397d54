#include "avica/density.hpp"

#include <cmath>
#include <stdexcept>

namespace avica {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kAlpha0 = 0.5;
constexpr double kAlpha1 = 1.5;

void check_args(double sigma, int m) {
  if (!(sigma > 0.0)) throw std::invalid_argument("smoothed density: sigma must be > 0");
  if (m < 1) throw std::invalid_argument("smoothed density: m must be >= 1");
}
}  // namespace

DensityDerivs smoothed_neg_log_density(double s, double sigma, int m) {
  check_args(sigma, m);
  const double v0 = kAlpha0 + sigma * sigma / m;
  const double v1 = kAlpha1 + sigma * sigma / m;

  const double lp0 = -s * s / (2.0 * v0) - 0.5 * (kLog2Pi + std::log(v0));
  const double lp1 = -s * s / (2.0 * v1) - 0.5 * (kLog2Pi + std::log(v1));
  const double hi = std::max(lp0, lp1);
  const double e0 = std::exp(lp0 - hi);
  const double e1 = std::exp(lp1 - hi);
  const double z = e0 + e1;
  const double w0 = e0 / z;
  const double w1 = e1 / z;

  DensityDerivs d;
  d.value = -(hi + std::log(z));

  // s-derivatives via the mixture responsibilities.
  const double r0 = s / v0, r1 = s / v1;
  d.d_s = w0 * r0 + w1 * r1;
  d.d2_s = w0 * (1.0 / v0 - r0 * r0) + w1 * (1.0 / v1 - r1 * r1) + d.d_s * d.d_s;

  // sigma enters through the component variances: dv/dsigma = 2 sigma / m.
  const double t0 = (sigma / m) * (s * s / (v0 * v0) - 1.0 / v0);
  const double t1 = (sigma / m) * (s * s / (v1 * v1) - 1.0 / v1);
  const double dt0 = (1.0 / m) * (s * s / (v0 * v0) - 1.0 / v0) +
                     (sigma / m) * (-2.0 * s * s / (v0 * v0 * v0) + 1.0 / (v0 * v0)) * (2.0 * sigma / m);
  const double dt1 = (1.0 / m) * (s * s / (v1 * v1) - 1.0 / v1) +
                     (sigma / m) * (-2.0 * s * s / (v1 * v1 * v1) + 1.0 / (v1 * v1)) * (2.0 * sigma / m);
  const double ws = w0 * t0 + w1 * t1;
  d.d_sigma = -ws;
  d.d2_sigma = -(w0 * (t0 * t0 + dt0) + w1 * (t1 * t1 + dt1)) + ws * ws;
  return d;
}

double mean_phi_row(const Eigen::ArrayXd& s, double sigma, int m) {
  check_args(sigma, m);
  const double v0 = kAlpha0 + sigma * sigma / m;
  const double v1 = kAlpha1 + sigma * sigma / m;
  const double c0 = -0.5 * (kLog2Pi + std::log(v0));
  const double c1 = -0.5 * (kLog2Pi + std::log(v1));
  // v0 < v1, so the second exponent dominates for every s; shift by it.
  const Eigen::ArrayXd s2 = s.square();
  const Eigen::ArrayXd lp1 = -s2 / (2.0 * v1) + c1;
  const Eigen::ArrayXd diff = -s2 * (0.5 / v0 - 0.5 / v1) + (c0 - c1);  // lp0 - lp1 <= c0 - c1
  return -(lp1 + (1.0 + diff.exp()).log()).mean();
}

void phi_derivative_rows(const Eigen::ArrayXd& s, double sigma, int m,
                         Eigen::ArrayXd& d_s, Eigen::ArrayXd& d2_s,
                         double& mean_d_sigma, double& mean_d2_sigma) {
  check_args(sigma, m);
  const double v0 = kAlpha0 + sigma * sigma / m;
  const double v1 = kAlpha1 + sigma * sigma / m;
  const double c0 = -0.5 * (kLog2Pi + std::log(v0));
  const double c1 = -0.5 * (kLog2Pi + std::log(v1));

  const Eigen::ArrayXd s2 = s.square();
  // Responsibility of the narrow component; exponent difference is bounded above.
  const Eigen::ArrayXd e = (-s2 * (0.5 / v0 - 0.5 / v1) + (c0 - c1)).exp();
  const Eigen::ArrayXd w0 = e / (1.0 + e);
  const Eigen::ArrayXd w1 = 1.0 - w0;

  const Eigen::ArrayXd r0 = s / v0;
  const Eigen::ArrayXd r1 = s / v1;
  d_s = w0 * r0 + w1 * r1;
  d2_s = w0 * (1.0 / v0 - r0.square()) + w1 * (1.0 / v1 - r1.square()) + d_s.square();

  const Eigen::ArrayXd t0 = (sigma / m) * (s2 / (v0 * v0) - 1.0 / v0);
  const Eigen::ArrayXd t1 = (sigma / m) * (s2 / (v1 * v1) - 1.0 / v1);
  const Eigen::ArrayXd dt0 =
      (1.0 / m) * (s2 / (v0 * v0) - 1.0 / v0) +
      (sigma / m) * (-2.0 * s2 / (v0 * v0 * v0) + 1.0 / (v0 * v0)) * (2.0 * sigma / m);
  const Eigen::ArrayXd dt1 =
      (1.0 / m) * (s2 / (v1 * v1) - 1.0 / v1) +
      (sigma / m) * (-2.0 * s2 / (v1 * v1 * v1) + 1.0 / (v1 * v1)) * (2.0 * sigma / m);
  const Eigen::ArrayXd ws = w0 * t0 + w1 * t1;
  mean_d_sigma = -ws.mean();
  mean_d2_sigma = (-(w0 * (t0.square() + dt0) + w1 * (t1.square() + dt1)) + ws.square()).mean();
}

}  // namespace avica
