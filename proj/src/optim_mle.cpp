#include "avica/optim_mle.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "avica/density.hpp"
#include "avica/line_search.hpp"
#include "avica/model.hpp"
#include "avica/posterior.hpp"

namespace avica {

namespace {

// Cached per-fit quantities: unmixed views, their weighted average, and the
// additive loss pieces. The loss is sum(source_terms) - sum(logdets); every
// committed piece comes from a fresh candidate evaluation, so nothing drifts.
struct SweepState {
  const MultiViewDataset& data;
  ModelParams params;
  std::vector<Matrix> unmixed;
  Matrix s_tilde;
  std::vector<double> logdets;       // per view
  std::vector<double> source_terms;  // per source

  SweepState(const MultiViewDataset& d, ModelParams p) : data(d), params(std::move(p)) {
    unmixed = unmix(params, data);
    s_tilde = weighted_mean_sources(unmixed, params.precision);
    logdets.resize(params.n_views());
    for (int i = 0; i < params.n_views(); ++i) logdets[i] = log_abs_det(params.unmixing[i]);
    source_terms.resize(params.n_components());
    for (int j = 0; j < params.n_components(); ++j)
      source_terms[j] = source_loss_term(params, unmixed, s_tilde, j);
  }

  double nll() const {
    return std::accumulate(source_terms.begin(), source_terms.end(), 0.0) -
           std::accumulate(logdets.begin(), logdets.end(), 0.0);
  }
};

double inf_norm(const Matrix& g) { return g.cwiseAbs().maxCoeff(); }

// One quasi-Newton step on W^view: W <- (I - rho D) W with D from the
// regularized 2x2-block inverse of the Hessian approximation.
double do_step_unmixing(SweepState& st, int view, const OptimizerConfig& config,
                        bool* accepted_out = nullptr) {
  const int k = st.params.n_components();
  Matrix phi_s, phi_ss;
  phi_tables(st.s_tilde, st.params.noise_level, st.params.n_views(), phi_s, phi_ss);

  Matrix grad, hess_coef;
  unmixing_grad_hess(st.params, st.unmixed, st.s_tilde, phi_s, phi_ss, view, grad, hess_coef);
  const double norm = inf_norm(grad);
  if (norm == 0.0) {
    if (accepted_out) *accepted_out = false;
    return norm;
  }

  Matrix dir = solve_unmixing_direction(grad, hess_coef, config.hess_floor);
  if (grad.cwiseProduct(dir).sum() <= 0.0) dir = grad;  // fall back to plain gradient

  // Candidate artifacts, kept so the accepted trial commits without recompute.
  struct Candidate {
    Matrix w, y, s_tilde;
    double logdet;
    std::vector<double> terms;
  } cand;
  cand.terms.resize(k);

  const double current = st.nll();
  auto try_step = [&](double rho) -> std::optional<double> {
    cand.w.noalias() = (Matrix::Identity(k, k) - rho * dir) * st.params.unmixing[view];
    try {
      cand.logdet = log_abs_det(cand.w);
    } catch (const SingularMatrixError&) {
      return std::nullopt;
    }
    cand.y.noalias() = cand.w * st.data.views[view];
    Matrix y_prev = std::move(st.unmixed[view]);
    st.unmixed[view] = std::move(cand.y);
    cand.s_tilde = weighted_mean_sources(st.unmixed, st.params.precision);
    double total = -cand.logdet;
    for (int i = 0; i < st.params.n_views(); ++i)
      if (i != view) total -= st.logdets[i];
    for (int j = 0; j < k; ++j) {
      cand.terms[j] = source_loss_term(st.params, st.unmixed, cand.s_tilde, j);
      total += cand.terms[j];
    }
    cand.y = std::move(st.unmixed[view]);
    st.unmixed[view] = std::move(y_prev);
    return total;
  };

  LineSearchResult ls = backtracking_line_search(current, try_step, config.ls_max_halvings);
  if (!ls.accepted && (dir - grad).cwiseAbs().maxCoeff() != 0.0) {
    dir = grad;  // quasi-Newton direction failed everywhere; retry along the gradient
    ls = backtracking_line_search(current, try_step, config.ls_max_halvings);
  }
  if (ls.accepted) {
    st.params.unmixing[view] = std::move(cand.w);
    st.unmixed[view] = std::move(cand.y);
    st.s_tilde = std::move(cand.s_tilde);
    st.logdets[view] = cand.logdet;
    st.source_terms = cand.terms;
  }
  if (accepted_out) *accepted_out = ls.accepted;
  return norm;
}

// One Riemannian quasi-Newton step on the precision column of one source,
// retracted onto the sphere of radius sqrt(1 - m mu^2).
double do_step_precision(SweepState& st, int source, const OptimizerConfig& config,
                         bool* accepted_out = nullptr) {
  const int m = st.params.n_views();
  const int j = source;
  const double mu2 = st.params.precision_floor;
  if (m * mu2 >= 1.0) throw std::invalid_argument("step_precision: m * mu_sq must be < 1");
  if (m == 1) {  // the sphere is a point; nothing to move
    if (accepted_out) *accepted_out = false;
    return 0.0;
  }

  Eigen::ArrayXd phi_s_row, phi_ss_row;
  double msig, msig2;
  phi_derivative_rows(st.s_tilde.row(j).transpose().array(), st.params.noise_level[j], m,
                      phi_s_row, phi_ss_row, msig, msig2);

  Vector rgrad;
  Matrix rhess;
  precision_grad_hess(st.params, st.unmixed, st.s_tilde, phi_s_row, phi_ss_row, j, rgrad, rhess);
  const double norm = rgrad.cwiseAbs().maxCoeff();
  if (norm == 0.0) {
    if (accepted_out) *accepted_out = false;
    return norm;
  }

  const Vector eta =
      (st.params.precision.col(j).array() - mu2).max(0.0).sqrt().matrix();
  const double radius = std::sqrt(1.0 - m * mu2);

  Vector dir = solve_precision_direction(rgrad, rhess, eta, config.hess_floor);
  if (rgrad.dot(dir) <= 0.0) dir = rgrad;

  struct Candidate {
    Vector lam;
    Eigen::RowVectorXd s_row;
    double term;
  } cand;

  const double current = st.nll();
  auto try_step = [&](double rho) -> std::optional<double> {
    Vector stepped = eta - rho * dir;
    const double len = stepped.norm();
    if (!(len > 1e-12)) return std::nullopt;
    stepped *= radius / len;
    Vector lam = stepped.array().square() + mu2;
    lam /= lam.sum();                                  // pin the column sum at one
    if (mu2 > 0.0) lam = lam.cwiseMax(mu2);            // rounding guard
    cand.lam = std::move(lam);

    cand.s_row.setZero(st.s_tilde.cols());
    for (int i = 0; i < m; ++i) cand.s_row += cand.lam[i] * st.unmixed[i].row(j);

    Matrix s_tilde_cand = st.s_tilde;
    s_tilde_cand.row(j) = cand.s_row;
    Vector col_prev = st.params.precision.col(j);
    st.params.precision.col(j) = cand.lam;
    cand.term = source_loss_term(st.params, st.unmixed, s_tilde_cand, j);
    st.params.precision.col(j) = col_prev;
    return current - st.source_terms[j] + cand.term;
  };

  LineSearchResult ls = backtracking_line_search(current, try_step, config.ls_max_halvings);
  if (!ls.accepted && (dir - rgrad).cwiseAbs().maxCoeff() != 0.0) {
    dir = rgrad;
    ls = backtracking_line_search(current, try_step, config.ls_max_halvings);
  }
  if (ls.accepted) {
    st.params.precision.col(j) = cand.lam;
    st.s_tilde.row(j) = cand.s_row;
    st.source_terms[j] = cand.term;
  }
  if (accepted_out) *accepted_out = ls.accepted;
  return norm;
}

// One scalar Newton step on sigma_j; candidates with sigma <= 0 are invalid.
double do_step_sigma(SweepState& st, int source, const OptimizerConfig& config,
                     bool* accepted_out = nullptr) {
  const int j = source;
  double grad, hess;
  noise_grad_hess(st.params, st.unmixed, st.s_tilde, j, grad, hess);
  const double norm = std::abs(grad);
  if (norm == 0.0) {
    if (accepted_out) *accepted_out = false;
    return norm;
  }
  const double denom = hess > 0.0 ? hess : std::abs(hess) + config.hess_floor;
  const double dir = grad / denom;

  struct Candidate {
    double sigma;
    double term;
  } cand;

  const double current = st.nll();
  auto try_step = [&](double rho) -> std::optional<double> {
    const double sigma_new = st.params.noise_level[j] - rho * dir;
    if (!(sigma_new > 0.0)) return std::nullopt;
    const double sigma_prev = st.params.noise_level[j];
    st.params.noise_level[j] = sigma_new;
    cand.sigma = sigma_new;
    cand.term = source_loss_term(st.params, st.unmixed, st.s_tilde, j);
    st.params.noise_level[j] = sigma_prev;
    return current - st.source_terms[j] + cand.term;
  };

  const LineSearchResult ls = backtracking_line_search(current, try_step, config.ls_max_halvings);
  if (ls.accepted) {
    st.params.noise_level[j] = cand.sigma;
    st.source_terms[j] = cand.term;
  }
  if (accepted_out) *accepted_out = ls.accepted;
  return norm;
}

FitResult fit_impl(const MultiViewDataset& data, const OptimizerConfig& config,
                   ModelParams init, bool freeze_noise) {
  data.validate();
  const int m = data.n_views();
  const int k = data.n_components();
  if (freeze_noise) {
    init.precision = Matrix::Constant(m, k, 1.0 / m);
    init.noise_level = Vector::Ones(k);
    init.precision_floor = 0.0;
  } else {
    init.precision_floor = config.mu_sq;
  }
  init.validate();
  if (config.max_sweeps < 1) throw std::invalid_argument("fit: max_sweeps must be >= 1");
  if (!(config.tol > 0.0)) throw std::invalid_argument("fit: tol must be > 0");

  SweepState st(data, std::move(init));
  FitResult result;
  result.terminated = Termination::max_sweeps;
  const auto t0 = std::chrono::steady_clock::now();

  for (int sweep = 0; sweep < config.max_sweeps; ++sweep) {
    double tol_w = 0.0, tol_eta = 0.0, tol_sigma = 0.0;
    for (int i = 0; i < m; ++i)
      tol_w = std::max(tol_w, do_step_unmixing(st, i, config));
    if (!freeze_noise) {
      for (int j = 0; j < k; ++j) {
        tol_eta = std::max(tol_eta, do_step_precision(st, j, config));
        tol_sigma = std::max(tol_sigma, do_step_sigma(st, j, config));
      }
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.trace.sweeps.push_back({tol_w, tol_eta, tol_sigma, st.nll(), seconds});
    if (std::max({tol_w, tol_eta, tol_sigma}) <= config.tol) {
      result.terminated = Termination::converged;
      break;
    }
  }

  result.sources = mmse_sources_from_unmixed(st.params, st.unmixed).mean;
  result.params = std::move(st.params);
  return result;
}

}  // namespace

Matrix solve_unmixing_direction(const Matrix& grad, const Matrix& hess_coef, double hess_floor) {
  const int k = static_cast<int>(grad.rows());
  Matrix dir(k, k);
  for (int a = 0; a < k; ++a) {
    dir(a, a) = grad(a, a) / std::max(std::abs(1.0 + hess_coef(a, a)), hess_floor);
    for (int b = a + 1; b < k; ++b) {
      // Symmetric block [[h_ab, 1], [1, h_ba]] acting on (eps_ab, eps_ba):
      // rotate to diagonal, flip negative curvature, floor, solve. The
      // magnitude-preserving flip keeps near-singular blocks from emitting
      // directions the line search can never shorten enough to accept.
      const double x = hess_coef(a, b), y = hess_coef(b, a);
      const double theta = 0.5 * std::atan2(2.0, x - y);
      const double c = std::cos(theta), s = std::sin(theta);
      const double e1 = std::max(std::abs(x * c * c + 2.0 * c * s + y * s * s), hess_floor);
      const double e2 = std::max(std::abs(x * s * s - 2.0 * c * s + y * c * c), hess_floor);
      const double g1 = c * grad(a, b) + s * grad(b, a);
      const double g2 = -s * grad(a, b) + c * grad(b, a);
      dir(a, b) = c * (g1 / e1) - s * (g2 / e2);
      dir(b, a) = s * (g1 / e1) + c * (g2 / e2);
    }
  }
  return dir;
}

Vector solve_precision_direction(const Vector& riem_grad, const Matrix& riem_hess,
                                 const Vector& eta, double hess_floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(riem_hess);
  const Vector coef = es.eigenvectors().transpose() * riem_grad;
  Vector dir = Vector::Zero(riem_grad.size());
  for (Eigen::Index v = 0; v < coef.size(); ++v)
    dir += es.eigenvectors().col(v) *
           (coef[v] / std::max(std::abs(es.eigenvalues()[v]), hess_floor));
  dir -= eta * (eta.dot(dir) / eta.squaredNorm());  // keep the step tangent
  return dir;
}

StepOutcome step_unmixing(const ModelParams& params, const MultiViewDataset& data, int view,
                          const OptimizerConfig& config) {
  SweepState st(data, params);
  bool accepted = false;
  const double norm = do_step_unmixing(st, view, config, &accepted);
  return {std::move(st.params), norm, accepted};
}

StepOutcome step_precision(const ModelParams& params, const MultiViewDataset& data, int source,
                           const OptimizerConfig& config) {
  SweepState st(data, params);
  bool accepted = false;
  const double norm = do_step_precision(st, source, config, &accepted);
  return {std::move(st.params), norm, accepted};
}

StepOutcome step_sigma(const ModelParams& params, const MultiViewDataset& data, int source,
                       const OptimizerConfig& config) {
  SweepState st(data, params);
  bool accepted = false;
  const double norm = do_step_sigma(st, source, config, &accepted);
  return {std::move(st.params), norm, accepted};
}

FitResult fit_mle(const MultiViewDataset& data, const OptimizerConfig& config,
                  const ModelParams& init) {
  return fit_impl(data, config, init, false);
}

FitResult fit_mle_fixed_noise(const MultiViewDataset& data, const OptimizerConfig& config,
                              const ModelParams& init) {
  return fit_impl(data, config, init, true);
}

}  // namespace avica
