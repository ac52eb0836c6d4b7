#include <cmath>
#include <numbers>

#include "doctest.h"
#include "skewinfo/errors.hpp"
#include "skewinfo/models.hpp"
#include "skewinfo/quad.hpp"

using namespace skewinfo;

namespace {

double variance(const SymmetricKernel& f) {
  return quad::integrate(quad::scalar_1d([&f](double x) {
                           return x * x * f.density(std::span<const double>(&x, 1));
                         }),
                         quad::Adaptive1D{})
      .scalar();
}

double mass(const SymmetricKernel& f) {
  auto in = quad::scalar_1d([&f](double x) { return f.density(std::span<const double>(&x, 1)); });
  in.breakpoints = f.breakpoints();
  return quad::integrate(in, quad::Adaptive1D{}).scalar();
}

}  // namespace

TEST_CASE("gaussian kernel values") {
  const auto f = kernels::gaussian();
  const double z0 = 0.0;
  const auto e = kernel_eval(f, std::span<const double>(&z0, 1));
  CHECK(e.density == doctest::Approx(0.3989422804014327).epsilon(1e-12));
  CHECK(f.scales()[0] == doctest::Approx(1.0).epsilon(1e-12));
  const auto m = kernels::gaussian(1, StandardizationRule::median_of_squares);
  // Median of |Z| for the standard normal is 0.6744897501960817.
  CHECK(m.scales()[0] == doctest::Approx(1.0 / 0.6744897501960817).epsilon(1e-10));
}

TEST_CASE("laplace unit variance score") {
  const auto f = kernels::laplace();
  CHECK(f.scales()[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-10));
  const double z = 0.5;
  const auto e = kernel_eval(f, std::span<const double>(&z, 1));
  CHECK(e.score[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));
}

TEST_CASE("standardized kernels integrate to one with unit variance") {
  for (const auto& f : {kernels::student(5.0), kernels::logistic(), kernels::exponential_power(3.0),
                        kernels::exponential_power(1.5)}) {
    CHECK(mass(f) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(variance(f) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("student(2) has no unit-variance scale") {
  CHECK_THROWS_AS(kernels::student(2.0), StandardizationInfeasible);
  CHECK_THROWS_AS(kernels::bumped_cauchy(0.5, StandardizationRule::unit_variance),
                  StandardizationInfeasible);
}

TEST_CASE("bumped cauchy normalizer and median rule") {
  const auto f = kernels::bumped_cauchy(0.5);
  CHECK(mass(f) == doctest::Approx(1.0).epsilon(1e-9));
  auto fn = [&f](double x, std::span<double> out) {
    out[0] = f.density(std::span<const double>(&x, 1));
  };
  CHECK(quad::integrate_interval(fn, 1, -1.0, 1.0).value[0] == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("standardization is idempotent") {
  const auto f = kernels::logistic();
  const auto g = standardize(f.free_scale(), f.rule());
  CHECK(g.calibration()[0] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("spherical kernels have identity marginal variance") {
  const auto f = kernels::student(6.0, 2);
  const double s = f.scales()[0];
  CHECK(s * s * 6.0 / 4.0 == doctest::Approx(1.0).epsilon(1e-9));
  const auto g = kernels::gaussian(3);
  const double z[3] = {0.0, 0.0, 0.0};
  CHECK(g.density(z) == doctest::Approx(std::pow(2.0 * std::numbers::pi, -1.5)).epsilon(1e-12));
}

TEST_CASE("score matches finite differences") {
  const std::vector<SymmetricKernel> ks = {kernels::student(5.0), kernels::logistic(),
                                           kernels::exponential_power(3.0), kernels::bumped_cauchy(0.5),
                                           kernels::student(5.0, 2),
                                           kernels::product({UnivariateShape::gaussian(), UnivariateShape::logistic()})};
  for (const auto& f : ks) {
    std::vector<double> z(f.dim(), 0.7), g(f.dim());
    for (int i = 1; i < f.dim(); ++i) z[i] = -0.3 * i;
    f.score(z, g);
    for (int i = 0; i < f.dim(); ++i) {
      auto zp = z, zm = z;
      zp[i] += 1e-6;
      zm[i] -= 1e-6;
      const double fd = -(f.log_density(zp) - f.log_density(zm)) / 2e-6;
      CHECK(g[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("skewers are odd and their primitives integrate psi") {
  const auto f = kernels::student(5.0);
  const std::vector<SkewingFunction> sk = {
      SkewingFunction::linear(1), SkewingFunction::power(3.0), SkewingFunction::t_type(1, 4.0),
      SkewingFunction::sine(1, OuterCdf::logistic()), SkewingFunction::score_composed(f, OuterCdf::student(3.0))};
  for (const auto& s : sk) {
    const double z = 0.8, mz = -0.8, d = 1.3;
    CHECK(s.value(std::span<const double>(&z, 1), std::span<const double>(&d, 1)) +
              s.value(std::span<const double>(&mz, 1), std::span<const double>(&d, 1)) ==
          doctest::Approx(1.0).epsilon(1e-14));
    double psi = 0.0;
    s.delta_gradient(std::span<const double>(&z, 1), std::span<double>(&psi, 1));
    const double zp = z + 1e-6, zm = z - 1e-6;
    const double fd = (s.primitive(std::span<const double>(&zp, 1)) - s.primitive(std::span<const double>(&zm, 1))) / 2e-6;
    CHECK(psi == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("exp_of_neg_psi kernels") {
  const auto lin = kernels::exp_of_neg_psi(2.0, SkewingFunction::linear(1));
  // exp(-a Π̇ z²/2) is Gaussian; unit variance gives the standard normal.
  const double z0 = 0.0;
  CHECK(lin.density(std::span<const double>(&z0, 1)) == doctest::Approx(0.3989422804014327).epsilon(1e-10));
  CHECK_THROWS_AS(kernels::exp_of_neg_psi(-1.0, SkewingFunction::linear(1)), CapabilityError);
  CHECK_THROWS_AS(kernels::exp_of_neg_psi(1.0, SkewingFunction::sine(1)), CapabilityError);
}

TEST_CASE("input validation") {
  const auto f = kernels::gaussian(2);
  const double z[1] = {0.0};
  CHECK_THROWS_AS(kernel_eval(f, z), InputError);
  const double bad[2] = {0.0, std::nan("")};
  CHECK_THROWS_AS(kernel_eval(f, bad), InputError);
}

TEST_CASE("bumped cauchy: finite score information, divergent J") {
  const auto f = kernels::bumped_cauchy(1.0);
  auto make = [&f](bool with_z) {
    auto in = quad::scalar_1d([&f, with_z](double z) {
      const auto e = kernel_eval(f, std::span<const double>(&z, 1));
      const double v = with_z ? z * e.score[0] - 1.0 : e.score[0];
      return v * v * e.density;
    });
    in.breakpoints = f.breakpoints();
    return in;
  };
  CHECK(quad::probe_divergence(make(false)).convergent);
  CHECK_FALSE(quad::probe_divergence(make(true)).convergent);
}
