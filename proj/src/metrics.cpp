#include "avica/metrics.hpp"

#include <cmath>
#include <limits>

namespace avica {

std::vector<int> hungarian_assign(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw std::invalid_argument("hungarian: non-square cost");
  if (!cost.allFinite()) throw std::invalid_argument("hungarian: non-finite entries");
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();

  // Potentials u, v and the column->row assignment p (1-based sentinels).
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

Eigen::RowVectorXd normalize_row(const Eigen::RowVectorXd& row) {
  const double mean = row.mean();
  Eigen::RowVectorXd centered = row.array() - mean;
  const double var = centered.array().square().mean();
  if (var <= 1e-30) throw DegenerateDataError("zero-variance row");
  return centered / std::sqrt(var);
}

double row_correlation(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("correlation: length mismatch");
  return (normalize_row(a).array() * normalize_row(b).array()).mean();
}

Alignment align_sources(const Matrix& truth, const Matrix& estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols())
    throw std::invalid_argument("align_sources: shape mismatch");
  const int k = static_cast<int>(truth.rows());

  Matrix t_norm(k, truth.cols()), e_norm(k, truth.cols());
  for (int j = 0; j < k; ++j) {
    t_norm.row(j) = normalize_row(truth.row(j));
    e_norm.row(j) = normalize_row(estimate.row(j));
  }
  const Matrix corr = t_norm * e_norm.transpose() / static_cast<double>(truth.cols());

  Alignment al;
  al.permutation = hungarian_assign(-corr.cwiseAbs());
  al.signs.resize(k);
  al.correlations.resize(k);
  for (int j = 0; j < k; ++j) {
    const double c = corr(j, al.permutation[j]);
    al.signs[j] = c < 0.0 ? -1 : 1;
    al.correlations[j] = al.signs[j] * c;
  }
  return al;
}

double reconstruction_error(const Matrix& truth, const Matrix& estimate) {
  const Alignment al = align_sources(truth, estimate);
  return (1.0 - al.correlations.array()).mean();
}

double precision_error(const Matrix& truth_precision, const Matrix& est_precision,
                       const Alignment& alignment) {
  if (truth_precision.rows() != est_precision.rows() ||
      truth_precision.cols() != est_precision.cols())
    throw std::invalid_argument("precision_error: shape mismatch");
  double err = 0.0;
  for (int j = 0; j < truth_precision.cols(); ++j)
    err += (truth_precision.col(j) - est_precision.col(alignment.permutation[j])).squaredNorm();
  return err;
}

double unmixing_recovery_score(const std::vector<Matrix>& unmixing,
                               const std::vector<Matrix>& mixing_true) {
  if (unmixing.size() != mixing_true.size())
    throw std::invalid_argument("unmixing_recovery_score: view count mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < unmixing.size(); ++i) {
    Matrix c = (unmixing[i] * mixing_true[i]).cwiseAbs();
    for (int a = 0; a < c.rows(); ++a) {
      const double peak = c.row(a).maxCoeff();
      if (!(peak > 0.0)) throw SingularMatrixError("unmixing_recovery_score: zero row");
      c.row(a) /= peak;
    }
    const std::vector<int> assign = hungarian_assign(-c);
    double off_mass = c.sum();
    for (int a = 0; a < c.rows(); ++a) off_mass -= c(a, assign[a]);
    worst = std::max(worst, off_mass);
  }
  return worst;
}

double r2_score(const Vector& truth, const Vector& prediction) {
  if (truth.size() != prediction.size()) throw std::invalid_argument("r2: length mismatch");
  if (truth.size() < 2) throw std::invalid_argument("r2: need at least two samples");
  const double mean = truth.mean();
  const double ss_tot = (truth.array() - mean).square().sum();
  if (ss_tot <= 0.0) throw std::invalid_argument("r2: constant truth");
  const double ss_res = (truth - prediction).squaredNorm();
  return 1.0 - ss_res / ss_tot;
}

}  // namespace avica
