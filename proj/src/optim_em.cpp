#include "avica/optim_em.hpp"

#include <chrono>
#include <cmath>

#include "avica/line_search.hpp"
#include "avica/model.hpp"

namespace avica {

namespace {

// Clamp one precision column into [mu2, 1-(m-1)mu2] and rescale the free mass
// so the column sums to one again. Repeats until no entry falls below the
// floor; terminates in at most m passes.
void clamp_precision_column(Eigen::Ref<Vector> col, double mu2) {
  const int m = static_cast<int>(col.size());
  std::vector<bool> pinned(m, false);
  for (int pass = 0; pass < m; ++pass) {
    double pinned_mass = 0.0;
    double free_mass = 0.0;
    for (int i = 0; i < m; ++i) {
      if (col[i] <= mu2) pinned[i] = true;
      if (pinned[i])
        pinned_mass += mu2;
      else
        free_mass += col[i];
    }
    if (free_mass <= 0.0) break;
    const double scale = (1.0 - pinned_mass) / free_mass;
    bool changed = false;
    for (int i = 0; i < m; ++i) {
      if (pinned[i]) {
        col[i] = mu2;
      } else {
        col[i] *= scale;
        if (col[i] < mu2) changed = true;
      }
    }
    if (!changed) break;
  }
  col = col.cwiseMax(mu2);
}

}  // namespace

std::vector<Vector> m_step_noise(const PosteriorMoments& moments,
                                 const std::vector<Matrix>& unmixed) {
  const int m = static_cast<int>(unmixed.size());
  if (moments.mean.rows() != unmixed[0].rows() || moments.mean.cols() != unmixed[0].cols())
    throw std::invalid_argument("m_step_noise: shape mismatch");
  const Vector mean_var = moments.variance.rowwise().mean();
  std::vector<Vector> sigma(m);
  for (int i = 0; i < m; ++i)
    sigma[i] = (unmixed[i] - moments.mean).array().square().rowwise().mean().matrix() + mean_var;
  return sigma;
}

NoiseReparam noise_reparam(const std::vector<Vector>& sigma_per_view) {
  const int m = static_cast<int>(sigma_per_view.size());
  const int k = static_cast<int>(sigma_per_view[0].size());
  NoiseReparam out;
  out.noise_level.resize(k);
  out.precision.resize(m, k);
  for (int j = 0; j < k; ++j) {
    double inv_sum = 0.0;
    for (int i = 0; i < m; ++i) {
      if (!(sigma_per_view[i][j] > 0.0))
        throw std::invalid_argument("noise_reparam: non-positive noise variance");
      inv_sum += 1.0 / sigma_per_view[i][j];
    }
    const double sig2 = 1.0 / (inv_sum / m);
    out.noise_level[j] = std::sqrt(sig2);
    for (int i = 0; i < m; ++i) out.precision(i, j) = sig2 / (sigma_per_view[i][j] * m);
  }
  return out;
}

std::vector<Vector> noise_reparam_inverse(const Vector& noise_level, const Matrix& precision) {
  const int m = static_cast<int>(precision.rows());
  std::vector<Vector> sigma(m);
  for (int i = 0; i < m; ++i)
    sigma[i] = (noise_level.array().square() / (m * precision.row(i).transpose().array())).matrix();
  return sigma;
}

double em_view_objective(const Matrix& unmixing, const Matrix& x, const PosteriorMoments& moments,
                         const Vector& sigma_view) {
  const Matrix y = unmixing * x;
  double obj = -log_abs_det(unmixing) + 0.5 * sigma_view.array().log().sum();
  const Vector quad =
      ((y - moments.mean).array().square() + moments.variance.array()).rowwise().mean().matrix();
  obj += 0.5 * (quad.array() / sigma_view.array()).sum();
  return obj;
}

Matrix em_unmixing_gradient(const Matrix& unmixed_view, const PosteriorMoments& moments,
                            const Vector& sigma_view) {
  const auto n = unmixed_view.cols();
  const int k = static_cast<int>(unmixed_view.rows());
  Matrix grad = (unmixed_view - moments.mean) * unmixed_view.transpose() / static_cast<double>(n);
  grad.array().colwise() /= sigma_view.array();
  grad -= Matrix::Identity(k, k);
  return grad;
}

Matrix em_unmixing_hessian_exact(const Matrix& unmixed_view, const Vector& sigma_view) {
  const int k = static_cast<int>(unmixed_view.rows());
  const auto n = unmixed_view.cols();
  const Matrix second = unmixed_view * unmixed_view.transpose() / static_cast<double>(n);
  Matrix hess = Matrix::Zero(k * k, k * k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      for (int c = 0; c < k; ++c)
        for (int d = 0; d < k; ++d) {
          double v = 0.0;
          if (a == d && b == c) v += 1.0;
          if (a == c) v += second(b, d) / sigma_view[a];
          hess(a * k + b, c * k + d) = v;
        }
  return hess;
}

EmStepOutcome m_step_unmixing(const ModelParams& params, const MultiViewDataset& data,
                              const PosteriorMoments& moments, int view, const EmConfig& config) {
  const int k = params.n_components();
  const std::vector<Vector> sigma =
      noise_reparam_inverse(params.noise_level, params.precision);
  const Matrix y = params.unmixing[view] * data.views[view];
  const Matrix grad = em_unmixing_gradient(y, moments, sigma[view]);

  // Diagonal Hessian approximation: h_ab = mean_t[y_b^2] / Sigma_a.
  const Vector mean_y2 = y.array().square().rowwise().mean().matrix();
  Matrix dir(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      dir(a, b) = grad(a, b) / std::max(mean_y2[b] / sigma[view][a], config.hess_floor);
  if (grad.cwiseProduct(dir).sum() <= 0.0) dir = grad;

  const double current = em_view_objective(params.unmixing[view], data.views[view], moments,
                                           sigma[view]);
  Matrix w_cand;
  auto try_step = [&](double rho) -> std::optional<double> {
    w_cand.noalias() = (Matrix::Identity(k, k) - rho * dir) * params.unmixing[view];
    try {
      return em_view_objective(w_cand, data.views[view], moments, sigma[view]);
    } catch (const SingularMatrixError&) {
      return std::nullopt;
    }
  };

  const LineSearchResult ls = backtracking_line_search(current, try_step, config.ls_max_halvings);
  if (ls.accepted) return {std::move(w_cand), true};
  return {params.unmixing[view], false};
}

FitResult fit_em(const MultiViewDataset& data, const EmConfig& config, const ModelParams& init) {
  data.validate();
  const int m = data.n_views();
  const int k = data.n_components();
  ModelParams p = init;
  p.precision_floor = config.mu_sq;
  p.validate();
  if (config.max_sweeps < 1) throw std::invalid_argument("fit_em: max_sweeps must be >= 1");

  std::vector<Matrix> unmixed = unmix(p, data);
  FitResult result;
  result.terminated = Termination::max_sweeps;
  const auto t0 = std::chrono::steady_clock::now();

  EmConfig step_cfg = config;
  for (int sweep = 0; sweep < config.max_sweeps; ++sweep) {
    // E-step at the current parameters.
    const PosteriorMoments moments = mmse_sources_from_unmixed(p, unmixed);

    // Closed-form noise update, then back to the (sigma, precision) parametrization.
    const std::vector<Vector> sigma_views = m_step_noise(moments, unmixed);
    NoiseReparam np = noise_reparam(sigma_views);
    if (config.mu_sq > 0.0)
      for (int j = 0; j < k; ++j) clamp_precision_column(np.precision.col(j), config.mu_sq);
    p.noise_level = np.noise_level;
    p.precision = np.precision;

    // One quasi-Newton step per view against the complete-data surrogate.
    for (int i = 0; i < m; ++i) {
      EmStepOutcome step = m_step_unmixing(p, data, moments, i, step_cfg);
      if (step.accepted) {
        p.unmixing[i] = std::move(step.unmixing);
        unmixed[i].noalias() = p.unmixing[i] * data.views[i];
      }
    }

    // Convergence is monitored on the actual likelihood's gradients.
    const GradientBundle g = loss_gradients_from_unmixed(p, unmixed);
    double tol_w = 0.0, tol_eta = 0.0, tol_sigma = 0.0;
    for (int i = 0; i < m; ++i) tol_w = std::max(tol_w, g.unmixing_grad[i].cwiseAbs().maxCoeff());
    for (int j = 0; j < k; ++j) {
      tol_eta = std::max(tol_eta, g.precision_grad[j].cwiseAbs().maxCoeff());
      tol_sigma = std::max(tol_sigma, std::abs(g.noise_grad[j]));
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.trace.sweeps.push_back({tol_w, tol_eta, tol_sigma, nll_from_unmixed(p, unmixed),
                                   seconds});
    if (std::max({tol_w, tol_eta, tol_sigma}) <= config.tol) {
      result.terminated = Termination::converged;
      break;
    }
  }

  result.sources = mmse_sources_from_unmixed(p, unmixed).mean;
  result.params = std::move(p);
  return result;
}

}  // namespace avica
