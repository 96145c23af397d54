#include <doctest.h>

#include "avica/density.hpp"
#include "avica/model.hpp"
#include "oracle_helpers.hpp"
#include "test_instances.hpp"

using namespace avica;

TEST_CASE("unmix: identity unmixing returns the input") {
  SplitMix64 rng(1);
  test::Instance inst = test::random_instance(rng, 3, 4, 20);
  for (auto& w : inst.params.unmixing) w = Matrix::Identity(4, 4);
  const auto y = unmix(inst.params, inst.data);
  for (int i = 0; i < 3; ++i) CHECK((y[i] - inst.data.views[i]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unmix: scalar case") {
  ModelParams p;
  p.unmixing = {Matrix::Constant(1, 1, 2.0)};
  p.precision = Matrix::Ones(1, 1);
  p.noise_level = Vector::Ones(1);
  MultiViewDataset d;
  d.views = {Matrix::Constant(1, 1, 3.0)};
  CHECK(unmix(p, d)[0](0, 0) == 6.0);
}

TEST_CASE("unmix: matches a naive triple-loop product") {
  SplitMix64 rng(2);
  test::Instance inst = test::random_instance(rng, 3, 5, 17);
  const auto y = unmix(inst.params, inst.data);
  for (int i = 0; i < 3; ++i) {
    const Matrix naive = test::naive_matmul(inst.params.unmixing[i], inst.data.views[i]);
    CHECK((y[i] - naive).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("unmix: dimension mismatch throws") {
  SplitMix64 rng(3);
  test::Instance inst = test::random_instance(rng, 2, 3, 5);
  inst.data.views[1] = Matrix::Zero(4, 5);
  CHECK_THROWS_AS(unmix(inst.params, inst.data), std::invalid_argument);
}

TEST_CASE("weighted_mean_sources: two-view average and degenerate weights") {
  Matrix lam(2, 1);
  lam << 0.5, 0.5;
  std::vector<Matrix> y = {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 3.0)};
  CHECK(weighted_mean_sources(y, lam)(0, 0) == doctest::Approx(2.0));

  lam << 1.0, 0.0;
  y = {Matrix::Constant(1, 1, 5.0), Matrix::Constant(1, 1, 99.0)};
  CHECK(weighted_mean_sources(y, lam)(0, 0) == doctest::Approx(5.0));
}

TEST_CASE("weighted_mean_sources: matches direct summation") {
  SplitMix64 rng(4);
  test::Instance inst = test::random_instance(rng, 3, 4, 11);
  const auto y = unmix(inst.params, inst.data);
  const Matrix s = weighted_mean_sources(y, inst.params.precision);
  for (int j = 0; j < 4; ++j)
    for (int t = 0; t < 11; ++t) {
      double direct = 0.0;
      for (int i = 0; i < 3; ++i) direct += inst.params.precision(i, j) * y[i](j, t);
      CHECK(s(j, t) == doctest::Approx(direct).epsilon(1e-13));
    }
}

TEST_CASE("nll: worked single-view value, only the density term survives") {
  ModelParams p;
  p.unmixing = {Matrix::Identity(1, 1)};
  p.precision = Matrix::Ones(1, 1);
  p.noise_level = Vector::Ones(1);
  MultiViewDataset d;
  d.views = {Matrix::Zero(1, 1)};
  CHECK(neg_log_likelihood(p, d) == doctest::Approx(0.5480979187480522).epsilon(1e-12));
}

TEST_CASE("nll: duplicating sample columns leaves the value unchanged") {
  SplitMix64 rng(5);
  test::Instance inst = test::random_instance(rng, 2, 3, 7);
  const double base = neg_log_likelihood(inst.params, inst.data);
  MultiViewDataset doubled;
  for (const auto& v : inst.data.views) {
    Matrix d(v.rows(), 2 * v.cols());
    d << v, v;
    doubled.views.push_back(std::move(d));
  }
  CHECK(neg_log_likelihood(inst.params, doubled) == doctest::Approx(base).epsilon(1e-13));
}

TEST_CASE("nll: singular unmixing throws") {
  SplitMix64 rng(6);
  test::Instance inst = test::random_instance(rng, 2, 3, 7);
  inst.params.unmixing[0].row(1) = inst.params.unmixing[0].row(0);
  CHECK_THROWS_AS(neg_log_likelihood(inst.params, inst.data), SingularMatrixError);
}

TEST_CASE("nll: differences match the numerically integrated marginal") {
  // Per-source marginal integration of the model density; constants cancel in
  // differences of settings on the same data.
  SplitMix64 rng(7);
  const int m = 2, k = 2, n = 5;
  test::Instance inst = test::random_instance(rng, m, k, n);

  auto integrated_nll = [&](const ModelParams& p) {
    const auto y = unmix(p, inst.data);
    double total = 0.0;
    for (const auto& w : p.unmixing) total -= log_abs_det(w);
    for (int j = 0; j < k; ++j) {
      std::vector<double> noise_var(m);
      for (int i = 0; i < m; ++i)
        noise_var[i] = avica::sq(p.noise_level[j]) / (m * p.precision(i, j));
      double acc = 0.0;
      for (int t = 0; t < n; ++t) {
        std::vector<double> obs(m);
        for (int i = 0; i < m; ++i) obs[i] = y[i](j, t);
        acc += test::neg_log_marginal_1d(obs, noise_var);
      }
      total += acc / n;
    }
    return total;
  };

  SplitMix64 rng2(8);
  for (int pair = 0; pair < 3; ++pair) {
    const ModelParams a = test::random_instance(rng2, m, k, n).params;
    const ModelParams b = test::random_instance(rng2, m, k, n).params;
    const double lhs = neg_log_likelihood(a, inst.data) - neg_log_likelihood(b, inst.data);
    const double rhs = integrated_nll(a) - integrated_nll(b);
    CHECK(std::abs(lhs - rhs) < 1e-6);
  }
}

TEST_CASE("gradients: single view at the origin gives minus identity") {
  ModelParams p;
  p.unmixing = {Matrix::Identity(2, 2)};
  p.precision = Matrix::Ones(1, 2);
  p.noise_level = Vector::Ones(2);
  MultiViewDataset d;
  d.views = {Matrix::Zero(2, 1)};
  const GradientBundle g = loss_gradients(p, d);
  CHECK((g.unmixing_grad[0] + Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("gradients: identical views at equal weights have zero precision gradient") {
  SplitMix64 rng(9);
  test::Instance inst = test::random_instance(rng, 1, 3, 40);
  MultiViewDataset twin;
  twin.views = {inst.data.views[0], inst.data.views[0]};
  ModelParams p;
  p.unmixing = {inst.params.unmixing[0], inst.params.unmixing[0]};
  p.precision = Matrix::Constant(2, 3, 0.5);
  p.noise_level = inst.params.noise_level;
  const GradientBundle g = loss_gradients(p, twin);
  for (int j = 0; j < 3; ++j) CHECK(g.precision_grad[j].cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gradients: worked noise-gradient value at the origin") {
  ModelParams p;
  p.unmixing = {Matrix::Identity(1, 1)};
  p.precision = Matrix::Ones(1, 1);
  p.noise_level = Vector::Ones(1);
  MultiViewDataset d;
  d.views = {Matrix::Zero(1, 1)};
  const GradientBundle g = loss_gradients(p, d);
  // equals the sigma-derivative of the smoothed density at the origin
  CHECK(g.noise_grad[0] == doctest::Approx(0.5502688871224906).epsilon(1e-9));
  CHECK(g.noise_grad[0] ==
        doctest::Approx(smoothed_neg_log_density(0.0, 1.0, 1).d_sigma).epsilon(1e-14));
}

TEST_CASE("gradients: tangent-space membership of the precision gradients") {
  SplitMix64 rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const double mu2 = trial % 2 ? 1e-3 : 0.0;
    test::Instance inst = test::random_instance(rng, 4, 3, 30, mu2);
    const GradientBundle g = loss_gradients(inst.params, inst.data);
    for (int j = 0; j < 3; ++j) {
      const Vector eta =
          (inst.params.precision.col(j).array() - mu2).sqrt().matrix();
      CHECK(std::abs(eta.dot(g.precision_grad[j])) < 1e-10);
    }
  }
}

TEST_CASE("gradients: every gradient block matches central finite differences") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 6; ++trial) {
    const int m = 1 + static_cast<int>(rng.uniform01() * 4);
    const int k = 1 + static_cast<int>(rng.uniform01() * 4);
    const int n = 20 + static_cast<int>(rng.uniform01() * 80);
    const double mu2 = trial % 2 ? 1e-3 : 0.0;
    test::Instance inst = test::random_instance(rng, m, k, n, mu2);
    const GradientBundle g = loss_gradients(inst.params, inst.data);
    const double h = 1e-6;

    for (int i = 0; i < m; ++i)
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
          auto f = [&](double t) {
            ModelParams p = inst.params;
            Matrix eps = Matrix::Zero(k, k);
            eps(a, b) = t;
            p.unmixing[i] = (Matrix::Identity(k, k) + eps) * p.unmixing[i];
            return neg_log_likelihood(p, inst.data);
          };
          const double fd = test::central_diff(f, 0.0, h);
          CHECK(g.unmixing_grad[i](a, b) ==
                doctest::Approx(fd).epsilon(1e-5).scale(std::max(1.0, std::abs(fd))));
        }

    if (m > 1) {
      for (int j = 0; j < k; ++j) {
        const Vector eta = (inst.params.precision.col(j).array() - mu2).sqrt().matrix();
        const Vector xi = test::random_tangent(rng, eta);
        auto f = [&](double t) {
          ModelParams p = inst.params;
          p.precision.col(j) = test::retracted_column(eta, xi, t, mu2, m);
          return neg_log_likelihood(p, inst.data);
        };
        const double fd = test::central_diff(f, 0.0, h);
        const double analytic = xi.dot(g.precision_grad[j]);
        CHECK(analytic == doctest::Approx(fd).epsilon(1e-5).scale(std::max(1.0, std::abs(fd))));

        // exact Riemannian Hessian: second difference along the retracted path
        const double h2 = 1e-4;
        const double f0 = neg_log_likelihood(inst.params, inst.data);
        const double quad = (f(h2) - 2.0 * f0 + f(-h2)) / (h2 * h2);
        CHECK(xi.dot(g.precision_hess[j] * xi) ==
              doctest::Approx(quad).epsilon(2e-3).scale(std::max(1.0, std::abs(quad))));
      }
    }

    for (int j = 0; j < k; ++j) {
      auto f = [&](double t) {
        ModelParams p = inst.params;
        p.noise_level[j] += t;
        return neg_log_likelihood(p, inst.data);
      };
      const double fd = test::central_diff(f, 0.0, h);
      CHECK(g.noise_grad[j] == doctest::Approx(fd).epsilon(1e-5).scale(std::max(1.0, std::abs(fd))));

      const double h2 = 1e-4;
      const double f0 = neg_log_likelihood(inst.params, inst.data);
      const double quad = (f(h2) - 2.0 * f0 + f(-h2)) / (h2 * h2);
      CHECK(g.noise_hess[j] ==
            doctest::Approx(quad).epsilon(2e-3).scale(std::max(1.0, std::abs(quad))));
    }
  }
}

TEST_CASE("uniform precision and unit noise reduce to the fixed-noise multiview loss") {
  // With precision 1/m and sigma 1 the loss must equal an independently coded
  // fixed-noise multiview objective up to a W-independent constant; gradients
  // must agree exactly.
  SplitMix64 rng(12);
  const int m = 3, k = 3, n = 50;
  test::Instance inst = test::random_instance(rng, m, k, n);
  inst.params.precision = Matrix::Constant(m, k, 1.0 / m);
  inst.params.noise_level = Vector::Ones(k);

  auto mv_loss = [&](const std::vector<Matrix>& unmixing) {
    // sum_i -log|W^i| + mean_t [ 1/2 sum_{ij} (y^i_j - ybar_j)^2 + sum_j phi(ybar_j, 1) ]
    double loss = 0.0;
    std::vector<Matrix> y(m);
    for (int i = 0; i < m; ++i) {
      loss -= std::log(std::abs(unmixing[i].determinant()));
      y[i] = unmixing[i] * inst.data.views[i];
    }
    Matrix ybar = Matrix::Zero(k, n);
    for (int i = 0; i < m; ++i) ybar += y[i];
    ybar /= static_cast<double>(m);
    double acc = 0.0;
    for (int t = 0; t < n; ++t) {
      for (int j = 0; j < k; ++j) {
        for (int i = 0; i < m; ++i) acc += 0.5 * avica::sq(y[i](j, t) - ybar(j, t));
        acc += smoothed_neg_log_density(ybar(j, t), 1.0, m).value;
      }
    }
    return loss + acc / n;
  };

  auto mv_grad = [&](int view) {
    // G = mean_t[ ((y^i - ybar) + phi'(ybar)/m) y^i^T ] - I, coded directly
    std::vector<Matrix> y(m);
    for (int i = 0; i < m; ++i) y[i] = inst.params.unmixing[i] * inst.data.views[i];
    Matrix ybar = Matrix::Zero(k, n);
    for (int i = 0; i < m; ++i) ybar += y[i];
    ybar /= static_cast<double>(m);
    Matrix grad = Matrix::Zero(k, k);
    for (int t = 0; t < n; ++t)
      for (int a = 0; a < k; ++a) {
        const double c = (y[view](a, t) - ybar(a, t)) +
                         smoothed_neg_log_density(ybar(a, t), 1.0, m).d_s / m;
        for (int b = 0; b < k; ++b) grad(a, b) += c * y[view](b, t);
      }
    grad /= static_cast<double>(n);
    grad -= Matrix::Identity(k, k);
    return grad;
  };

  SplitMix64 rng2(13);
  const std::vector<Matrix> w_a = test::random_instance(rng2, m, k, n).params.unmixing;
  const std::vector<Matrix> w_b = test::random_instance(rng2, m, k, n).params.unmixing;
  ModelParams pa = inst.params, pb = inst.params;
  pa.unmixing = w_a;
  pb.unmixing = w_b;
  const double lhs = neg_log_likelihood(pa, inst.data) - neg_log_likelihood(pb, inst.data);
  const double rhs = mv_loss(w_a) - mv_loss(w_b);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));

  const GradientBundle g = loss_gradients(inst.params, inst.data);
  for (int i = 0; i < m; ++i)
    CHECK((g.unmixing_grad[i] - mv_grad(i)).cwiseAbs().maxCoeff() < 1e-10);
}
