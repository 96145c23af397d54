#include <doctest.h>
#include "avica/density.hpp"
#include "avica/rng.hpp"
#include "oracle_helpers.hpp"

using namespace avica;

TEST_CASE("value at the origin matches direct evaluation of the two pdfs") {
  // -log(N(0;0,3/2) + N(0;0,5/2)) for sigma = 1, m = 1
  const double expect = -std::log(test::gaussian_pdf(0.0, 1.5) + test::gaussian_pdf(0.0, 2.5));
  const DensityDerivs d = smoothed_neg_log_density(0.0, 1.0, 1);
  CHECK(d.value == doctest::Approx(expect).epsilon(1e-12));
  CHECK(d.value == doctest::Approx(0.5480979187480522).epsilon(1e-10));
}

TEST_CASE("even in s: slope vanishes at the origin") {
  for (double sigma : {0.2, 1.0, 3.7})
    for (int m : {1, 2, 10}) {
      CHECK(smoothed_neg_log_density(0.0, sigma, m).d_s == doctest::Approx(0.0).epsilon(1e-14));
      const double left = smoothed_neg_log_density(-1.3, sigma, m).value;
      const double right = smoothed_neg_log_density(1.3, sigma, m).value;
      CHECK(left == doctest::Approx(right).epsilon(1e-14));
    }
}

TEST_CASE("all five outputs match central finite differences") {
  SplitMix64 rng(42);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    const double s = 6.0 * (rng.uniform01() - 0.5);
    const double sigma = 0.05 + 4.0 * rng.uniform01();
    const int m = 1 + static_cast<int>(rng.uniform01() * 10);

    const DensityDerivs d = smoothed_neg_log_density(s, sigma, m);
    auto f_s = [&](double x) { return smoothed_neg_log_density(x, sigma, m).value; };
    auto f_sig = [&](double x) { return smoothed_neg_log_density(s, x, m).value; };

    const double fd_s = (f_s(s + h) - f_s(s - h)) / (2 * h);
    const double fd_ss = (f_s(s + h) - 2 * d.value + f_s(s - h)) / (h * h);
    const double fd_sig = (f_sig(sigma + h) - f_sig(sigma - h)) / (2 * h);
    const double fd_sigsig = (f_sig(sigma + h) - 2 * d.value + f_sig(sigma - h)) / (h * h);

    CHECK(d.d_s == doctest::Approx(fd_s).epsilon(1e-5));
    CHECK(d.d2_s == doctest::Approx(fd_ss).epsilon(1e-4));
    CHECK(d.d_sigma == doctest::Approx(fd_sig).epsilon(1e-5));
    CHECK(d.d2_sigma == doctest::Approx(fd_sigsig).epsilon(1e-4));
  }
}

TEST_CASE("quadratic growth: phi minus the wide-component parabola stays bounded") {
  const double sigma = 0.8;
  const int m = 3;
  const double v_wide = 1.5 + sigma * sigma / m;
  double prev = 0.0;
  for (double s : {10.0, 30.0, 100.0, 300.0}) {
    const double gap =
        smoothed_neg_log_density(s, sigma, m).value - s * s / (2.0 * v_wide);
    CHECK(std::isfinite(gap));
    if (prev != 0.0) CHECK(std::abs(gap - prev) < 0.5);  // settles toward a constant
    prev = gap;
  }
}

TEST_CASE("row helpers agree with the scalar path") {
  SplitMix64 rng(7);
  Eigen::ArrayXd s(25);
  for (int i = 0; i < s.size(); ++i) s[i] = 8.0 * (rng.uniform01() - 0.5);
  const double sigma = 1.3;
  const int m = 4;

  double mean_phi = 0.0;
  for (int i = 0; i < s.size(); ++i) mean_phi += smoothed_neg_log_density(s[i], sigma, m).value;
  mean_phi /= static_cast<double>(s.size());
  CHECK(mean_phi_row(s, sigma, m) == doctest::Approx(mean_phi).epsilon(1e-13));

  Eigen::ArrayXd ds, dss;
  double mdsig, md2sig;
  phi_derivative_rows(s, sigma, m, ds, dss, mdsig, md2sig);
  double acc_dsig = 0.0, acc_d2sig = 0.0;
  for (int i = 0; i < s.size(); ++i) {
    const DensityDerivs d = smoothed_neg_log_density(s[i], sigma, m);
    CHECK(ds[i] == doctest::Approx(d.d_s).epsilon(1e-12));
    CHECK(dss[i] == doctest::Approx(d.d2_s).epsilon(1e-12));
    acc_dsig += d.d_sigma;
    acc_d2sig += d.d2_sigma;
  }
  CHECK(mdsig == doctest::Approx(acc_dsig / s.size()).epsilon(1e-12));
  CHECK(md2sig == doctest::Approx(acc_d2sig / s.size()).epsilon(1e-12));
}

TEST_CASE("rejects invalid arguments") {
  CHECK_THROWS_AS(smoothed_neg_log_density(0.0, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(smoothed_neg_log_density(0.0, -1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(smoothed_neg_log_density(0.0, 1.0, 0), std::invalid_argument);
}
