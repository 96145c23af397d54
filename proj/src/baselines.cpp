#include "avica/baselines.hpp"

#include <cmath>

#include "avica/metrics.hpp"
#include "avica/model.hpp"
#include "avica/rng.hpp"

namespace avica {

namespace {

// Leading eigenpairs of a symmetric matrix, eigenvalues descending, signs
// fixed so each vector's largest-magnitude entry is positive.
void leading_eigs(const Matrix& sym, int k_out, Matrix& vectors, Vector& values) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const int k_in = static_cast<int>(sym.rows());
  vectors.resize(k_in, k_out);
  values.resize(k_out);
  for (int c = 0; c < k_out; ++c) {
    const int src = k_in - 1 - c;  // Eigen sorts ascending
    Vector v = es.eigenvectors().col(src);
    int peak = 0;
    v.cwiseAbs().maxCoeff(&peak);
    if (v[peak] < 0.0) v = -v;
    vectors.col(c) = v;
    values[c] = es.eigenvalues()[src];
  }
}

Matrix normalize_rows_unit_variance(const Matrix& s) {
  Matrix out(s.rows(), s.cols());
  for (int j = 0; j < s.rows(); ++j) {
    const double var = (s.row(j).array() - s.row(j).mean()).square().mean();
    if (var <= 1e-30) throw DegenerateDataError("constant source row");
    out.row(j) = s.row(j) / std::sqrt(var);
  }
  return out;
}

}  // namespace

std::pair<MultiViewDataset, ReductionOperator> pca_reduce_per_view(const MultiViewDataset& data,
                                                                   int k_out) {
  data.validate();
  if (k_out < 1 || k_out > data.n_components())
    throw std::invalid_argument("pca_reduce_per_view: need 1 <= k_out <= k_in");

  MultiViewDataset reduced;
  ReductionOperator op;
  for (const auto& x : data.views) {
    const Vector mean = x.rowwise().mean();
    const Matrix centered = x.colwise() - mean;
    const Matrix cov = centered * centered.transpose() / static_cast<double>(x.cols());
    Matrix vectors;
    Vector values;
    leading_eigs(cov, k_out, vectors, values);
    op.projection.push_back(vectors.transpose());
    op.back_projection.push_back(vectors);
    op.means.push_back(mean);
    reduced.views.push_back(vectors.transpose() * centered);
  }
  return {std::move(reduced), std::move(op)};
}

IcaResult single_view_ica(const Matrix& x, const OptimizerConfig& config) {
  const int k = static_cast<int>(x.rows());
  const auto n = x.cols();
  if (n < 2) throw std::invalid_argument("single_view_ica: need at least two samples");

  // PCA whitener from the second-moment matrix; rank deficiency is an error.
  const Matrix second = x * x.transpose() / static_cast<double>(n);
  Matrix vectors;
  Vector values;
  leading_eigs(second, k, vectors, values);
  if (!(values[k - 1] > 1e-12 * values[0]))
    throw SingularMatrixError("single_view_ica: rank-deficient data");
  const Matrix whitener =
      values.array().rsqrt().matrix().asDiagonal() * vectors.transpose();

  // Seeded random rotation on top of the whitener (QR sign-fixed).
  SplitMix64 rng(config.seed);
  Matrix gauss(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) gauss(a, b) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(gauss);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int c = 0; c < k; ++c)
    if (r(c, c) < 0.0) q.col(c) = -q.col(c);

  ModelParams init;
  init.unmixing = {q * whitener};
  init.precision = Matrix::Ones(1, k);
  init.noise_level = Vector::Ones(k);

  MultiViewDataset single;
  single.views = {x};
  FitResult fit = fit_mle(single, config, init);

  IcaResult out;
  out.sources = fit.params.unmixing[0] * x;
  out.unmixing = std::move(fit.params.unmixing[0]);
  out.trace = std::move(fit.trace);
  out.terminated = fit.terminated;
  return out;
}

GroupIcaResult concat_ica(const MultiViewDataset& data, int k, const OptimizerConfig& config) {
  data.validate();
  const int m = data.n_views();
  const auto n = data.n_samples();

  // Stack views along the component axis, reduce back to k with PCA.
  Matrix stacked(m * data.n_components(), n);
  for (int i = 0; i < m; ++i)
    stacked.middleRows(i * data.n_components(), data.n_components()) = data.views[i];
  MultiViewDataset stacked_set;
  stacked_set.views = {std::move(stacked)};
  auto [reduced, op] = pca_reduce_per_view(stacked_set, k);

  const IcaResult ica = single_view_ica(reduced.views[0], config);
  GroupIcaResult out;
  out.sources = normalize_rows_unit_variance(ica.sources);

  // Per-view unmixing by least squares onto the shared sources.
  for (int i = 0; i < m; ++i) {
    const Matrix& x = data.views[i];
    const Matrix gram = x * x.transpose() / static_cast<double>(n);
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw SingularMatrixError("concat_ica: singular per-view covariance");
    const Matrix cross = out.sources * x.transpose() / static_cast<double>(n);
    out.unmixing.push_back(ldlt.solve(cross.transpose()).transpose());
  }
  return out;
}

GroupIcaResult perm_ica(const MultiViewDataset& data, const OptimizerConfig& config) {
  data.validate();
  const int m = data.n_views();
  const int k = data.n_components();

  std::vector<IcaResult> runs;
  runs.reserve(m);
  for (int i = 0; i < m; ++i) runs.push_back(single_view_ica(data.views[i], config));

  GroupIcaResult out;
  const Matrix reference = normalize_rows_unit_variance(runs[0].sources);
  out.sources = reference;
  out.unmixing.push_back(runs[0].unmixing);
  for (int i = 1; i < m; ++i) {
    const Matrix normalized = normalize_rows_unit_variance(runs[i].sources);
    const Alignment al = align_sources(reference, normalized);
    Matrix aligned_sources(k, data.n_samples());
    Matrix aligned_unmixing(k, k);
    for (int j = 0; j < k; ++j) {
      aligned_sources.row(j) = al.signs[j] * normalized.row(al.permutation[j]);
      aligned_unmixing.row(j) = al.signs[j] * runs[i].unmixing.row(al.permutation[j]);
    }
    out.sources += aligned_sources;
    out.unmixing.push_back(std::move(aligned_unmixing));
  }
  out.sources /= static_cast<double>(m);
  return out;
}

FitResult mvica_fit(const MultiViewDataset& data, const OptimizerConfig& config,
                    const ModelParams& init) {
  return fit_mle_fixed_noise(data, config, init);
}

ModelParams params_from_unmixing(const std::vector<Matrix>& unmixing, double mu_sq) {
  ModelParams p;
  p.unmixing = unmixing;
  const int m = p.n_views();
  const int k = p.n_components();
  p.precision = Matrix::Constant(m, k, 1.0 / m);
  p.noise_level = Vector::Ones(k);
  p.precision_floor = mu_sq;
  return p;
}

}  // namespace avica
