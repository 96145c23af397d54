#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace avica {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Thrown when an unmixing matrix (or data covariance) is numerically singular,
// |det| < 1e-300.
struct SingularMatrixError : std::runtime_error {
  explicit SingularMatrixError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown by metrics when a signal row has zero variance and correlations are undefined.
struct DegenerateDataError : std::runtime_error {
  explicit DegenerateDataError(const std::string& what) : std::runtime_error(what) {}
};

// m views of the same k sources, each view a k x n matrix (components x samples).
struct MultiViewDataset {
  std::vector<Matrix> views;

  int n_views() const { return static_cast<int>(views.size()); }
  int n_components() const { return views.empty() ? 0 : static_cast<int>(views[0].rows()); }
  int n_samples() const { return views.empty() ? 0 : static_cast<int>(views[0].cols()); }

  // Checks m >= 1, identical shapes across views and finite entries.
  void validate() const;
};

// Parameters of the noisy shared-source model: per-view unmixing matrices, the
// table of relative noise precisions (columns sum to one, floored at
// precision_floor when it is positive) and the per-source global noise levels.
struct ModelParams {
  std::vector<Matrix> unmixing;  // m matrices, k x k
  Matrix precision;              // m x k, entry (i, j) weights view i on source j
  Vector noise_level;            // k, sigma_j > 0
  double precision_floor = 0.0;  // mu^2

  int n_views() const { return static_cast<int>(unmixing.size()); }
  int n_components() const { return unmixing.empty() ? 0 : static_cast<int>(unmixing[0].rows()); }

  void validate() const;  // throws std::invalid_argument / SingularMatrixError
};

// Gradients and (approximate) Hessians of the negative log-likelihood at a
// parameter point, with expectations replaced by sample means.
// unmixing_hess[i](a, b) holds the diagonal-block coefficient h_ab of the
// Hessian approximation H[a,b,c,d] = d_ad d_bc + d_ac d_bd h_ab.
struct GradientBundle {
  std::vector<Matrix> unmixing_grad;   // m relative gradients, k x k
  std::vector<Matrix> unmixing_hess;   // m coefficient tables, k x k
  std::vector<Vector> precision_grad;  // k Riemannian gradients, length m
  std::vector<Matrix> precision_hess;  // k Riemannian Hessians, m x m
  Vector noise_grad;                   // k
  Vector noise_hess;                   // k
};

inline double sq(double x) { return x * x; }

// log |det W|; throws SingularMatrixError when |det| < 1e-300.
double log_abs_det(const Matrix& w);

}  // namespace avica
