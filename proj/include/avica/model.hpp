#pragma once

#include "avica/types.hpp"

namespace avica {

// y^i = W^i x^i for every view. Throws std::invalid_argument on shape mismatch.
std::vector<Matrix> unmix(const ModelParams& params, const MultiViewDataset& data);

// Weighted average of unmixed rows: s~_j(t) = sum_i precision(i, j) * y^i_j(t).
Matrix weighted_mean_sources(const std::vector<Matrix>& unmixed, const Matrix& precision);

// Negative log-likelihood, averaged over samples, additive constants dropped.
double neg_log_likelihood(const ModelParams& params, const MultiViewDataset& data);
double nll_from_unmixed(const ModelParams& params, const std::vector<Matrix>& unmixed);

// Loss contribution of source j given cached unmixed views and their weighted
// average: the -1/2 log precision column, the (1-m)/2 log(m/sigma^2) term, the
// quadratic penalty and the smoothed-density term (sample means).
// neg_log_likelihood == sum_i -log|W^i| + sum_j source_loss_term(j).
double source_loss_term(const ModelParams& params, const std::vector<Matrix>& unmixed,
                        const Matrix& s_tilde, int j);

// All gradients and Hessian approximations of the loss at `params`.
GradientBundle loss_gradients(const ModelParams& params, const MultiViewDataset& data);
GradientBundle loss_gradients_from_unmixed(const ModelParams& params,
                                           const std::vector<Matrix>& unmixed);

// Per-block pieces, shared between loss_gradients and the optimizer steps.
// phi_s / phi_ss are k x n tables of density derivatives at (s~_j(t), sigma_j).
void unmixing_grad_hess(const ModelParams& params, const std::vector<Matrix>& unmixed,
                        const Matrix& s_tilde, const Matrix& phi_s, const Matrix& phi_ss,
                        int view, Matrix& grad, Matrix& hess_coef);

// Riemannian gradient and Hessian for the precision column of one source,
// in the sqrt(lambda^2 - mu^2) parametrization on its sphere.
void precision_grad_hess(const ModelParams& params, const std::vector<Matrix>& unmixed,
                         const Matrix& s_tilde, const Eigen::ArrayXd& phi_s_row,
                         const Eigen::ArrayXd& phi_ss_row, int source, Vector& riem_grad,
                         Matrix& riem_hess);

void noise_grad_hess(const ModelParams& params, const std::vector<Matrix>& unmixed,
                     const Matrix& s_tilde, int source, double& grad, double& hess);

// Density derivative tables at the current weighted averages.
void phi_tables(const Matrix& s_tilde, const Vector& noise_level, int m,
                Matrix& phi_s, Matrix& phi_ss);

}  // namespace avica
