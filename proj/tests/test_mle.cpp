#include <cmath>

#include "doctest.h"
#include "skewinfo/errors.hpp"
#include "skewinfo/fisher.hpp"
#include "skewinfo/mle.hpp"

using namespace skewinfo;

namespace {

ThetaPoint theta1(double mu, double sigma, double delta) {
  ThetaPoint t = ThetaPoint::standard(1);
  t.mu[0] = mu;
  t.sigma_half(0, 0) = sigma;
  t.delta[0] = delta;
  return t;
}

}  // namespace

TEST_CASE("fit recovers skew-normal skewness") {
  const auto k = kernels::gaussian();
  const auto s = SkewingFunction::linear(1);
  const auto x = SkewModel(k, s, theta1(0, 1, 1)).sample(2000, 11);
  const auto f = fit(k, s, x);
  CHECK(f.converged);
  CHECK(std::abs(f.theta_hat.delta[0] - 1.0) < 0.25);
  CHECK(f.theta_hat.sigma_half(0, 0) > 0.0);
  CHECK_FALSE(f.curvature_singular);
  CHECK(f.stderr_proxy.size() == 3);
}

TEST_CASE("fit at symmetry for a nonsingular pair") {
  const auto k = kernels::gaussian();
  const auto s = SkewingFunction::sine(1);
  const auto x = SkewModel(k, s, theta1(0, 1, 0)).sample(2000, 12);
  const auto f = fit(k, s, x);
  CHECK(f.converged);
  CHECK(std::abs(f.theta_hat.delta[0]) < 0.2);
}

TEST_CASE("fit is a local maximum") {
  const auto k = kernels::logistic();
  const auto s = SkewingFunction::sine(1);
  const auto x = SkewModel(k, s, theta1(0.5, 2, 0.8)).sample(1000, 13);
  const auto f = fit(k, s, x);
  const SkewModel base(k, s, f.theta_hat);
  for (int c = 0; c < 3; ++c) {
    for (double h : {1e-4, -1e-4}) {
      ThetaPoint t = f.theta_hat;
      if (c == 0) t.mu[0] += h;
      if (c == 1) t.sigma_half(0, 0) += h;
      if (c == 2) t.delta[0] += h;
      CHECK(f.loglik >= log_likelihood(base.with_theta(t), x));
    }
  }
}

TEST_CASE("fit equivariance and reproducibility") {
  const auto k = kernels::gaussian(2);
  const auto s = SkewingFunction::linear(2);
  ThetaPoint t = ThetaPoint::standard(2);
  t.delta << 1.0, -0.5;
  t.sigma_half << 1.2, 0.3, 0.3, 0.8;
  const auto x = SkewModel(k, s, t).sample(800, 14);
  auto shifted = x;
  for (std::size_t i = 0; i < shifted.size(); i += 2) {
    shifted[i] += 3.0;
    shifted[i + 1] -= 1.5;
  }
  const auto a = fit(k, s, x);
  const auto b = fit(k, s, shifted);
  CHECK(b.theta_hat.mu[0] - a.theta_hat.mu[0] == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(b.theta_hat.mu[1] - a.theta_hat.mu[1] == doctest::Approx(-1.5).epsilon(1e-6));
  CHECK((b.theta_hat.delta - a.theta_hat.delta).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((b.theta_hat.sigma_half - a.theta_hat.sigma_half).cwiseAbs().maxCoeff() < 1e-6);

  const auto again = fit(k, s, x);
  CHECK(again.loglik == a.loglik);
  CHECK(again.iterations == a.iterations);
  CHECK(again.theta_hat.delta == a.theta_hat.delta);
}

TEST_CASE("average score vanishes at the fit") {
  const auto k = kernels::gaussian();
  const auto s = SkewingFunction::sine(1);
  const SkewModel m(k, s, theta1(0, 1, 0));
  const auto x = m.sample(100000, 15);
  const auto f = fit(k, s, x);
  const SkewModel at = m.with_theta(f.theta_hat);
  // finite-difference score of the log-likelihood, scaled by the Monte Carlo spread
  const double h = 1e-5;
  for (int c = 0; c < 3; ++c) {
    auto bump = [&](double d) {
      ThetaPoint t = f.theta_hat;
      if (c == 0) t.mu[0] += d;
      if (c == 1) t.sigma_half(0, 0) += d;
      if (c == 2) t.delta[0] += d;
      return at.with_theta(t);
    };
    const SkewModel up = bump(h), dn = bump(-h);
    double sum = 0.0, sum2 = 0.0;
    for (double v : x) {
      const double g = (up.log_pdf(std::span<const double>(&v, 1)) -
                        dn.log_pdf(std::span<const double>(&v, 1))) / (2 * h);
      sum += g;
      sum2 += g * g;
    }
    const double n = static_cast<double>(x.size());
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    CHECK(std::abs(mean) < 4.0 * se);
  }
}

TEST_CASE("fit input errors") {
  const auto k = kernels::gaussian();
  const auto s = SkewingFunction::linear(1);
  std::vector<double> few{0.1, 0.2, 0.3, 0.4, 0.5};
  CHECK_THROWS_AS(fit(k, s, few), InputError);
  std::vector<double> flat(100, 2.0);
  CHECK_THROWS_AS(fit(k, s, flat), InputError);
  std::vector<double> bad(100, 0.0);
  for (std::size_t i = 0; i < bad.size(); ++i) bad[i] = static_cast<double>(i);
  bad[7] = std::nan("");
  CHECK_THROWS_AS(fit(k, s, bad), InputError);
}

TEST_CASE("bimodality coefficient") {
  std::vector<double> two(1000);
  for (std::size_t i = 0; i < two.size(); ++i) two[i] = i % 2 ? 1.0 : -1.0;
  CHECK(bimodality_coefficient(two) == doctest::Approx(1.0));
  std::vector<double> uni(100001);
  for (std::size_t i = 0; i < uni.size(); ++i) uni[i] = static_cast<double>(i) / 100000.0;
  CHECK(bimodality_coefficient(uni) == doctest::Approx(5.0 / 9.0).epsilon(1e-4));
}

TEST_CASE("symmetry experiment preconditions and determinism") {
  const auto k = kernels::gaussian();
  const auto s = SkewingFunction::sine(1);
  CHECK_THROWS_AS(symmetry_experiment(k, s, theta1(0, 1, 0), 200, 1, 1), InputError);
  CHECK_THROWS_AS(symmetry_experiment(k, s, theta1(0, 1, 0.3), 200, 100, 1), ContractError);
  const auto a = symmetry_experiment(k, s, theta1(0, 1, 0), 100, 100, 5);
  const auto b = symmetry_experiment(k, s, theta1(0, 1, 0), 100, 100, 5);
  CHECK(a.delta_hats.size() == 100);
  CHECK(a.failed.size() == 100);
  CHECK(a.delta_hats == b.delta_hats);
  CHECK(a.bimodality_coefficient == b.bimodality_coefficient);
  CHECK(a.sign_split >= 0.0);
  CHECK(a.sign_split <= 1.0);
}
