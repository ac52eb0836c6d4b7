#include <cmath>
#include <numbers>

#include "doctest.h"
#include "skewinfo/density.hpp"
#include "skewinfo/errors.hpp"
#include "skewinfo/quad.hpp"

using namespace skewinfo;

namespace {

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

SkewModel skew_normal(double delta, double mu = 0.0, double sigma = 1.0) {
  ThetaPoint t = ThetaPoint::standard(1);
  t.mu[0] = mu;
  t.sigma_half(0, 0) = sigma;
  t.delta[0] = delta;
  return SkewModel(kernels::gaussian(), SkewingFunction::linear(1), t);
}

double mass(const SkewModel& m) {
  return quad::integrate(quad::scalar_1d([&m](double x) { return m.pdf(std::span<const double>(&x, 1)); }),
                         quad::Adaptive1D{})
      .scalar();
}

}  // namespace

TEST_CASE("skew-normal pdf values") {
  const double x0 = 0.0, x1 = 1.0;
  CHECK(skew_normal(1.0).pdf(std::span<const double>(&x0, 1)) == doctest::Approx(phi(0.0)).epsilon(1e-14));
  CHECK(skew_normal(2.0).pdf(std::span<const double>(&x1, 1)) ==
        doctest::Approx(2.0 * phi(1.0) * Phi(2.0)).epsilon(1e-13));
  CHECK(2.0 * phi(1.0) * Phi(2.0) == doctest::Approx(0.47293).epsilon(1e-5));
  CHECK(mass(skew_normal(2.0)) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(mass(skew_normal(-3.0, 1.5, 0.4)) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("delta zero gives the symmetric kernel and mirror identity holds") {
  const auto k = kernels::logistic();
  ThetaPoint t = ThetaPoint::standard(1);
  t.sigma_half(0, 0) = 2.0;
  const SkewModel m0(k, SkewingFunction::sine(1), t);
  t.delta[0] = 2.5;
  const SkewModel m(k, SkewingFunction::sine(1), t);
  for (double z : {-2.0, -0.3, 0.7, 3.1}) {
    const double xp = 2.0 * z, xm = -2.0 * z;
    CHECK(m0.pdf(std::span<const double>(&xp, 1)) ==
          doctest::Approx(0.5 * k.density(std::span<const double>(&z, 1))).epsilon(1e-14));
    CHECK(m.pdf(std::span<const double>(&xp, 1)) + m.pdf(std::span<const double>(&xm, 1)) ==
          doctest::Approx(k.density(std::span<const double>(&z, 1))).epsilon(1e-14));
  }
}

TEST_CASE("two-dimensional normalization") {
  ThetaPoint t = ThetaPoint::standard(2);
  t.sigma_half << 1.2, 0.3, 0.3, 0.8;
  t.delta << 2.0, -1.0;
  const SkewModel m(kernels::student(5.0, 2), SkewingFunction::t_type(2, 5.0), t);
  quad::Integrand in;
  in.dim = 2;
  in.eval = [&m](std::span<const double> x, std::span<double> out) { out[0] = m.pdf(x); };
  const auto r = quad::integrate(in, quad::TensorProduct{6});
  CHECK(r.scalar() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("sampler: reproducible, parallel equals serial, KS against quadrature cdf") {
  const SkewModel m = skew_normal(1.0);
  const std::size_t n = 100000;
  auto a = m.sample(n, 42);
  const auto b = m.sample_serial(n, 42);
  CHECK(a == b);
  std::sort(a.begin(), a.end());
  // cdf of SN(δ=1): Φ(x) - 2 T(x, 1) = Φ(x)^2 for δ = 1.
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double F = Phi(a[i]) * Phi(a[i]);
    d = std::max({d, std::abs(F - double(i) / n), std::abs(F - double(i + 1) / n)});
  }
  CHECK(d < 1.95 / std::sqrt(double(n)));
}

TEST_CASE("sampler mean at delta zero") {
  ThetaPoint t = ThetaPoint::standard(2);
  t.mu << 1.0, -2.0;
  const SkewModel m(kernels::product({UnivariateShape::gaussian(), UnivariateShape::logistic()}),
                    SkewingFunction::linear(2), t);
  const std::size_t n = 100000;
  const auto x = m.sample(n, 3);
  for (int j = 0; j < 2; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i * 2 + j];
    CHECK(std::abs(s / n - t.mu[j]) < 4.0 / std::sqrt(double(n)));
  }
}

TEST_CASE("curve") {
  ThetaPoint t = ThetaPoint::standard(1);
  t.delta[0] = 0.5;
  const SkewModel m(kernels::gaussian(), SkewingFunction::sine(1), t);
  const auto c = curve(m, 0, -4.0, 4.0, 9);
  CHECK(c.x.size() == 9);
  CHECK(c.x[4] == 0.0);
  CHECK(c.pdf[4] == doctest::Approx(phi(0.0)).epsilon(1e-14));
  CHECK_THROWS_AS(curve(m, 0, -4.0, 4.0, 0), InputError);
}

TEST_CASE("theta validation") {
  ThetaPoint t = ThetaPoint::standard(2);
  t.sigma_half << 1.0, 0.5, 0.4, 1.0;
  CHECK_THROWS_AS(t.validate(), InputError);
  t.sigma_half << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(t.validate(), InputError);
  const Eigen::MatrixXd sig = (Eigen::MatrixXd(2, 2) << 2.0, 0.5, 0.5, 1.0).finished();
  const Eigen::MatrixXd h = sqrt_spd(sig);
  CHECK((h * h - sig).norm() < 1e-14);
}
