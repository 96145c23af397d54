#include "avica/model.hpp"

#include <cmath>

#include "avica/density.hpp"

namespace avica {

void MultiViewDataset::validate() const {
  if (views.empty()) throw std::invalid_argument("dataset: need at least one view");
  const auto rows = views[0].rows();
  const auto cols = views[0].cols();
  if (rows < 1 || cols < 1) throw std::invalid_argument("dataset: empty view");
  for (const auto& v : views) {
    if (v.rows() != rows || v.cols() != cols)
      throw std::invalid_argument("dataset: views must share identical shapes");
    if (!v.allFinite()) throw std::invalid_argument("dataset: non-finite entries");
  }
}

void ModelParams::validate() const {
  const int m = n_views();
  const int k = n_components();
  if (m < 1) throw std::invalid_argument("params: need at least one view");
  if (precision.rows() != m || precision.cols() != k)
    throw std::invalid_argument("params: precision table must be m x k");
  if (noise_level.size() != k) throw std::invalid_argument("params: noise_level must have length k");
  if (!(precision_floor >= 0.0) || m * precision_floor >= 1.0)
    throw std::invalid_argument("params: need 0 <= m * precision_floor < 1");
  for (const auto& w : unmixing) {
    if (w.rows() != k || w.cols() != k)
      throw std::invalid_argument("params: unmixing matrices must be k x k");
    log_abs_det(w);  // throws if singular
  }
  for (int j = 0; j < k; ++j) {
    const double colsum = precision.col(j).sum();
    if (std::abs(colsum - 1.0) > 1e-12)
      throw std::invalid_argument("params: precision columns must sum to one");
    if (precision_floor > 0.0 && (precision.col(j).array() < precision_floor - 1e-15).any())
      throw std::invalid_argument("params: precision entries below the floor");
    if (!(noise_level[j] > 0.0)) throw std::invalid_argument("params: noise levels must be > 0");
  }
}

double log_abs_det(const Matrix& w) {
  Eigen::PartialPivLU<Matrix> lu(w);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    const double d = std::abs(lu.matrixLU()(i, i));
    if (d == 0.0) throw SingularMatrixError("singular matrix (zero pivot)");
    logdet += std::log(d);
  }
  if (!(logdet >= std::log(1e-300)))
    throw SingularMatrixError("singular matrix (|det| < 1e-300)");
  return logdet;
}

std::vector<Matrix> unmix(const ModelParams& params, const MultiViewDataset& data) {
  const int m = data.n_views();
  if (params.n_views() != m) throw std::invalid_argument("unmix: view count mismatch");
  std::vector<Matrix> out;
  out.reserve(m);
  for (int i = 0; i < m; ++i) {
    if (params.unmixing[i].cols() != data.views[i].rows())
      throw std::invalid_argument("unmix: dimension mismatch");
    out.push_back(params.unmixing[i] * data.views[i]);
  }
  return out;
}

Matrix weighted_mean_sources(const std::vector<Matrix>& unmixed, const Matrix& precision) {
  const int m = static_cast<int>(unmixed.size());
  if (precision.rows() != m || precision.cols() != unmixed[0].rows())
    throw std::invalid_argument("weighted_mean_sources: shape mismatch");
  Matrix s_tilde = Matrix::Zero(unmixed[0].rows(), unmixed[0].cols());
  for (int i = 0; i < m; ++i)
    s_tilde.array() += unmixed[i].array().colwise() * precision.row(i).transpose().array();
  return s_tilde;
}

double source_loss_term(const ModelParams& params, const std::vector<Matrix>& unmixed,
                        const Matrix& s_tilde, int j) {
  const int m = params.n_views();
  const double sigma = params.noise_level[j];
  const double sig2 = sigma * sigma;

  double term = -0.5 * params.precision.col(j).array().log().sum();
  term += 0.5 * (1.0 - m) * std::log(m / sig2);

  double quad = 0.0;
  for (int i = 0; i < m; ++i) {
    const double c = 0.5 * m * params.precision(i, j) / sig2;
    quad += c * (unmixed[i].row(j) - s_tilde.row(j)).array().square().mean();
  }
  return term + quad + mean_phi_row(s_tilde.row(j).transpose().array(), sigma, m);
}

double nll_from_unmixed(const ModelParams& params, const std::vector<Matrix>& unmixed) {
  const Matrix s_tilde = weighted_mean_sources(unmixed, params.precision);
  double loss = 0.0;
  for (const auto& w : params.unmixing) loss -= log_abs_det(w);
  for (int j = 0; j < params.n_components(); ++j)
    loss += source_loss_term(params, unmixed, s_tilde, j);
  return loss;
}

double neg_log_likelihood(const ModelParams& params, const MultiViewDataset& data) {
  return nll_from_unmixed(params, unmix(params, data));
}

void phi_tables(const Matrix& s_tilde, const Vector& noise_level, int m,
                Matrix& phi_s, Matrix& phi_ss) {
  const int k = static_cast<int>(s_tilde.rows());
  phi_s.resize(k, s_tilde.cols());
  phi_ss.resize(k, s_tilde.cols());
  Eigen::ArrayXd ds, dss;
  double msig, msig2;
  for (int j = 0; j < k; ++j) {
    phi_derivative_rows(s_tilde.row(j).transpose().array(), noise_level[j], m, ds, dss,
                        msig, msig2);
    phi_s.row(j) = ds.matrix().transpose();
    phi_ss.row(j) = dss.matrix().transpose();
  }
}

void unmixing_grad_hess(const ModelParams& params, const std::vector<Matrix>& unmixed,
                        const Matrix& s_tilde, const Matrix& phi_s, const Matrix& phi_ss,
                        int view, Matrix& grad, Matrix& hess_coef) {
  const int m = params.n_views();
  const auto n = unmixed[view].cols();
  const auto& y = unmixed[view];
  const Eigen::ArrayXd lam = params.precision.row(view).transpose().array();  // k
  const Eigen::ArrayXd sig2 = params.noise_level.array().square();

  // G_ab = mean_t[ (lam_a phi'(s~_a) + (m/sig_a^2) lam_a (y_a - s~_a)) y_b ] - d_ab
  Matrix coeff = (phi_s.array().colwise() * lam).matrix();
  coeff.array() += (y - s_tilde).array().colwise() * (lam * (m / sig2));
  grad.noalias() = coeff * y.transpose() / static_cast<double>(n);
  grad.diagonal().array() -= 1.0;

  // h_ab = mean_t[ lam_a^2 phi''(s~_a) y_b^2 ] + (m/sig_a^2)(1 - lam_a) lam_a mean_t[y_b^2]
  const Matrix y2 = y.array().square().matrix();
  const Matrix phi2w = (phi_ss.array().colwise() * lam.square()).matrix();
  hess_coef.noalias() = phi2w * y2.transpose() / static_cast<double>(n);
  const Vector row_const = ((m / sig2) * (1.0 - lam) * lam).matrix();  // k
  const Vector mean_y2 = y2.rowwise().mean();                          // k
  hess_coef.noalias() += row_const * mean_y2.transpose();
}

void precision_grad_hess(const ModelParams& params, const std::vector<Matrix>& unmixed,
                         const Matrix& s_tilde, const Eigen::ArrayXd& phi_s_row,
                         const Eigen::ArrayXd& phi_ss_row, int source, Vector& riem_grad,
                         Matrix& riem_hess) {
  const int m = params.n_views();
  const auto n = unmixed[0].cols();
  const int j = source;
  const double sig2 = sq(params.noise_level[j]);

  const Eigen::ArrayXd lam = params.precision.col(j).array();  // m
  const Eigen::ArrayXd eta = (lam - params.precision_floor).max(0.0).sqrt();
  const Eigen::ArrayXd st = s_tilde.row(j).transpose().array();  // n

  // Residual moments and phi-coupled moments per view on this source.
  Vector mean_res2(m), mean_y_phi(m);
  Matrix u(m, n), w(m, n);  // rows: eta_i (s~ - y_i), eta_i y_i
  for (int i = 0; i < m; ++i) {
    const Eigen::ArrayXd yi = unmixed[i].row(j).transpose().array();
    mean_res2[i] = (yi - st).square().mean();
    mean_y_phi[i] = (yi * phi_s_row).mean();
    u.row(i) = (eta[i] * (st - yi)).matrix().transpose();
    w.row(i) = (eta[i] * yi).matrix().transpose();
  }

  const Vector g = (-eta / lam + (m / sig2) * eta * mean_res2.array() +
                    2.0 * eta * mean_y_phi.array())
                       .matrix();

  Matrix hess = (4.0 * m / sig2) * (u * w.transpose() + w * u.transpose()) /
                static_cast<double>(n);
  const Matrix w_scaled =
      (w.array().rowwise() * (4.0 * m / sig2 + 4.0 * phi_ss_row).transpose()).matrix();
  hess.noalias() += w_scaled * w.transpose() / static_cast<double>(n);
  hess.diagonal() += (2.0 * eta.square() / lam.square() - 1.0 / lam +
                      2.0 * mean_y_phi.array() + (m / sig2) * mean_res2.array())
                         .matrix();

  // Project onto the tangent space of the sphere and add the curvature term
  // from the radial component of the Euclidean gradient.
  const Vector eta_v = eta.matrix();
  const double r2 = eta_v.squaredNorm();
  const double radial = eta_v.dot(g) / r2;
  riem_grad = g - eta_v * radial;
  const Matrix proj = Matrix::Identity(m, m) - eta_v * eta_v.transpose() / r2;
  riem_hess = proj * hess * proj - radial * proj;
}

void noise_grad_hess(const ModelParams& params, const std::vector<Matrix>& unmixed,
                     const Matrix& s_tilde, int source, double& grad, double& hess) {
  const int m = params.n_views();
  const int j = source;
  const double sigma = params.noise_level[j];
  const double sig2 = sigma * sigma;

  double q = 0.0;  // sum_i lam_ij mean_t (y^i_j - s~_j)^2
  for (int i = 0; i < m; ++i)
    q += params.precision(i, j) * (unmixed[i].row(j) - s_tilde.row(j)).array().square().mean();

  Eigen::ArrayXd ds, dss;
  double mean_dsig, mean_d2sig;
  phi_derivative_rows(s_tilde.row(j).transpose().array(), sigma, m, ds, dss, mean_dsig,
                      mean_d2sig);

  grad = (m - 1.0) / sigma - (m / (sig2 * sigma)) * q + mean_dsig;
  hess = -(m - 1.0) / sig2 + (3.0 * m / (sig2 * sig2)) * q + mean_d2sig;
}

GradientBundle loss_gradients_from_unmixed(const ModelParams& params,
                                           const std::vector<Matrix>& unmixed) {
  const Matrix s_tilde = weighted_mean_sources(unmixed, params.precision);
  const int m = params.n_views();
  const int k = params.n_components();

  Matrix phi_s, phi_ss;
  phi_tables(s_tilde, params.noise_level, m, phi_s, phi_ss);

  GradientBundle g;
  g.unmixing_grad.resize(m);
  g.unmixing_hess.resize(m);
  for (int i = 0; i < m; ++i)
    unmixing_grad_hess(params, unmixed, s_tilde, phi_s, phi_ss, i, g.unmixing_grad[i],
                       g.unmixing_hess[i]);

  g.precision_grad.resize(k);
  g.precision_hess.resize(k);
  g.noise_grad.resize(k);
  g.noise_hess.resize(k);
  for (int j = 0; j < k; ++j) {
    precision_grad_hess(params, unmixed, s_tilde, phi_s.row(j).transpose().array(),
                        phi_ss.row(j).transpose().array(), j, g.precision_grad[j],
                        g.precision_hess[j]);
    noise_grad_hess(params, unmixed, s_tilde, j, g.noise_grad[j], g.noise_hess[j]);
  }
  return g;
}

GradientBundle loss_gradients(const ModelParams& params, const MultiViewDataset& data) {
  return loss_gradients_from_unmixed(params, unmix(params, data));
}

}  // namespace avica
