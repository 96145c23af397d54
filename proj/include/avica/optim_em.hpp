#pragma once

#include "avica/optim_mle.hpp"
#include "avica/posterior.hpp"

namespace avica {

struct EmConfig {
  double tol = 1e-3;
  double mu_sq = 0.0;  // EM's closed-form noise step cannot enforce a floor; default off
  int max_sweeps = 1000;
  int ls_max_halvings = 20;
  double hess_floor = 1e-7;
  std::uint64_t seed = 0;
};

// Closed-form noise update: Sigma^i_j = mean_t[(y^i_j - E[s_j|x])^2 + Var[s_j|x]].
// Returns one length-k vector of source-space noise variances per view.
std::vector<Vector> m_step_noise(const PosteriorMoments& moments,
                                 const std::vector<Matrix>& unmixed);

// (sigma, lambda^2) <-> Sigma reparametrization. Forward map:
// sigma_j = (1/m sum_i 1/Sigma^i_j)^{-1/2}, precision(i,j) = sigma_j^2 / (m Sigma^i_j);
// precision columns sum to one by construction.
struct NoiseReparam {
  Vector noise_level;  // k
  Matrix precision;    // m x k
};
NoiseReparam noise_reparam(const std::vector<Vector>& sigma_per_view);
std::vector<Vector> noise_reparam_inverse(const Vector& noise_level, const Matrix& precision);

// Expected complete-data negative log-likelihood piece for one view (E-step
// statistics fixed), up to terms constant in all parameters:
//   -log|W| + 1/2 sum_j log Sigma_j + 1/2 mean_t sum_j ((y_j - E[s_j|x])^2 + Var[s_j|x]) / Sigma_j
double em_view_objective(const Matrix& unmixing, const Matrix& x, const PosteriorMoments& moments,
                         const Vector& sigma_view);

// Relative gradient of em_view_objective: -I + diag(1/Sigma) mean_t[(y - E[s|x]) y^T].
Matrix em_unmixing_gradient(const Matrix& unmixed_view, const PosteriorMoments& moments,
                            const Vector& sigma_view);

// Exact relative Hessian of em_view_objective as a (k^2 x k^2) matrix over
// vec(eps) (row-major pairs): H[(a,b),(c,d)] = d_ad d_bc + d_ac mean_t[y_b y_d] / Sigma_a.
Matrix em_unmixing_hessian_exact(const Matrix& unmixed_view, const Vector& sigma_view);

// One line-searched quasi-Newton step on W^view against em_view_objective,
// using the diagonal Hessian approximation h_ab = mean_t[y_b^2] / Sigma_a.
struct EmStepOutcome {
  Matrix unmixing;
  bool accepted = false;
};
EmStepOutcome m_step_unmixing(const ModelParams& params, const MultiViewDataset& data,
                              const PosteriorMoments& moments, int view, const EmConfig& config);

// Generalized EM: alternates the closed-form E-step, the closed-form noise
// M-step and one quasi-Newton unmixing step per view, monitoring the gradients
// of the actual likelihood for termination.
FitResult fit_em(const MultiViewDataset& data, const EmConfig& config, const ModelParams& init);

}  // namespace avica
