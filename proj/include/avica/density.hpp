#pragma once

#include <Eigen/Dense>

namespace avica {

// phi(s, sigma) = -log( N(s; 0, 1/2 + sigma^2/m) + N(s; 0, 3/2 + sigma^2/m) ),
// the negative log of the source prior smoothed by a Gaussian of variance
// sigma^2/m, together with its first and second partial derivatives in s and
// in sigma. Everything is analytic; densities are handled in log space so the
// tails stay finite.
struct DensityDerivs {
  double value;
  double d_s;
  double d2_s;
  double d_sigma;
  double d2_sigma;
};

DensityDerivs smoothed_neg_log_density(double s, double sigma, int m);

// Row helpers for the optimizer hot paths (same formulas, vectorized).
// phi values for a whole row of s; returns the sample mean.
double mean_phi_row(const Eigen::ArrayXd& s, double sigma, int m);

// First/second s-derivatives for a row, plus sample means of the sigma derivatives.
void phi_derivative_rows(const Eigen::ArrayXd& s, double sigma, int m,
                         Eigen::ArrayXd& d_s, Eigen::ArrayXd& d2_s,
                         double& mean_d_sigma, double& mean_d2_sigma);

}  // namespace avica
