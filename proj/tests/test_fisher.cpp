#include <cmath>
#include <numbers>

#include "doctest.h"
#include "skewinfo/errors.hpp"
#include "skewinfo/fisher.hpp"

using namespace skewinfo;

namespace {

const double kSqrt2Pi = std::sqrt(2.0 * std::numbers::pi);

SkewModel model1(SymmetricKernel k, SkewingFunction s, double mu = 0.0, double sigma = 1.0) {
  ThetaPoint t = ThetaPoint::standard(1);
  t.mu[0] = mu;
  t.sigma_half(0, 0) = sigma;
  return SkewModel(std::move(k), std::move(s), t);
}

}  // namespace

TEST_CASE("score at symmetry, univariate") {
  const auto m = model1(kernels::gaussian(), SkewingFunction::linear(1));
  const double x = 1.0;
  const auto s = score_at_symmetry(m, std::span<const double>(&x, 1), InfoKind::full);
  CHECK(s.loc[0] == doctest::Approx(1.0));
  CHECK(s.scatter[0] == doctest::Approx(0.0));
  CHECK(s.skew[0] == doctest::Approx(2.0 / kSqrt2Pi).epsilon(1e-14));
  ThetaPoint t = m.theta();
  t.delta[0] = 0.1;
  CHECK_THROWS_AS(score_at_symmetry(m.with_theta(t), std::span<const double>(&x, 1), InfoKind::full),
                  ContractError);
}

TEST_CASE("score at symmetry, bivariate scatter block") {
  const SkewModel m(kernels::gaussian(2), SkewingFunction::linear(2), ThetaPoint::standard(2));
  const double x[2] = {1.0, 0.0};
  const auto s = score_at_symmetry(m, x, InfoKind::full);
  REQUIRE(s.scatter.size() == 3);
  CHECK(s.scatter[0] == doctest::Approx(0.0));
  CHECK(s.scatter[1] == doctest::Approx(0.0));
  CHECK(s.scatter[2] == doctest::Approx(-1.0));
}

TEST_CASE("scatter score matches finite differences of the log-likelihood") {
  ThetaPoint t = ThetaPoint::standard(2);
  t.mu << 0.3, -0.2;
  t.sigma_half << 1.3, 0.4, 0.4, 0.9;
  const SkewModel m(kernels::product({UnivariateShape::logistic(), UnivariateShape::student(5.0)}),
                    SkewingFunction::t_type(2, 4.0), t);
  const double x[2] = {0.8, 1.1};
  const auto s = score_at_symmetry(m, x, InfoKind::full).stacked();
  const double h = 1e-6;
  auto ll = [&](const ThetaPoint& th) { return m.with_theta(th).log_pdf(x); };
  int r = 0;
  for (int i = 0; i < 2; ++i, ++r) {
    ThetaPoint p = t, q = t;
    p.mu[i] += h;
    q.mu[i] -= h;
    CHECK(s[r] == doctest::Approx((ll(p) - ll(q)) / (2 * h)).epsilon(1e-6));
  }
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i <= j; ++i, ++r) {
      ThetaPoint p = t, q = t;
      p.sigma_half(i, j) += h;
      q.sigma_half(i, j) -= h;
      if (i != j) {
        p.sigma_half(j, i) += h;
        q.sigma_half(j, i) -= h;
      }
      CHECK(s[r] == doctest::Approx((ll(p) - ll(q)) / (2 * h)).epsilon(1e-6));
    }
  }
  for (int i = 0; i < 2; ++i, ++r) {
    ThetaPoint p = t, q = t;
    p.delta[i] += h;
    q.delta[i] -= h;
    CHECK(s[r] == doctest::Approx((ll(p) - ll(q)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("duplication matrix") {
  CHECK(duplication_matrix(1)(0, 0) == 1.0);
  const auto p2 = duplication_matrix(2);
  Eigen::MatrixXd expected(3, 4);
  expected << 1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 1;
  CHECK((p2 - expected).norm() == 0.0);
  Eigen::MatrixXd m = Eigen::MatrixXd::Random(3, 3);
  m = (m + m.transpose()).eval();
  CHECK((duplication_matrix(3).transpose() * vech(m) - vec(m)).norm() == 0.0);
}

TEST_CASE("skew-normal information") {
  const auto m = model1(kernels::gaussian(), SkewingFunction::linear(1));
  const auto full = information(m, InfoKind::full);
  CHECK(full.gamma(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(full.gamma(1, 1) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(std::abs(full.gamma(0, 1)) < 1e-12);
  CHECK(std::abs(full.gamma(1, 2)) < 1e-12);
  CHECK(full.gamma(0, 2) == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-10));
  CHECK(full.gamma(2, 2) == doctest::Approx(2.0 / std::numbers::pi).epsilon(1e-10));
  const auto rf = rank_diagnosis(full);
  CHECK(rf.rank == 2);
  const auto red = information(m, InfoKind::reduced);
  CHECK((red.gamma - full.reduced().gamma).cwiseAbs().maxCoeff() <= 2.0 * full.err.maxCoeff() + 1e-15);
  const auto rr = rank_diagnosis(red);
  CHECK(rr.rank == 1);
  CHECK(rr.nullity == 1);
  CHECK_FALSE(rr.indeterminate);
  CHECK(rr.W(0, 0) / rr.V(0, 0) == doctest::Approx(-std::sqrt(std::numbers::pi / 2.0)).epsilon(1e-8));
  const auto rel = null_relation(rr, red.theta0.sigma_half);
  CHECK(rel.W(0, 0) / rel.V(0, 0) == doctest::Approx(kSqrt2Pi).epsilon(1e-8));
  CHECK(null_relation_residual(m.kernel(), m.skewer(), rel) <= 10.0 * rr.tolerance * rr.tolerance);
}

TEST_CASE("location-scale equivariance") {
  const auto k = kernels::logistic();
  const auto s = SkewingFunction::t_type(1, 3.0);
  const auto g1 = information(model1(k, s), InfoKind::reduced).gamma;
  const auto g2 = information(model1(k, s, 1.7, 2.5), InfoKind::reduced).gamma;
  CHECK(g2(0, 0) == doctest::Approx(g1(0, 0) / 6.25).epsilon(1e-10));
  CHECK(g2(0, 1) == doctest::Approx(g1(0, 1) / 2.5).epsilon(1e-10));
  CHECK(g2(1, 1) == doctest::Approx(g1(1, 1)).epsilon(1e-10));
}

TEST_CASE("sine-skewed gaussian information") {
  const auto g = information(model1(kernels::gaussian(), SkewingFunction::sine(1)), InfoKind::reduced);
  CHECK(g.gamma(0, 1) == doctest::Approx(2.0 / kSqrt2Pi * std::exp(-0.5)).epsilon(1e-10));
  CHECK(g.gamma(1, 1) == doctest::Approx((1.0 - std::exp(-2.0)) / std::numbers::pi).epsilon(1e-10));
  CHECK(rank_diagnosis(g).rank == 2);
}

TEST_CASE("product kernel partial deficiency") {
  const SkewModel m(kernels::product({UnivariateShape::gaussian(), UnivariateShape::logistic()}),
                    SkewingFunction::linear(2), ThetaPoint::standard(2));
  const auto g = information(m, InfoKind::reduced);
  const auto r = rank_diagnosis(g);
  CHECK(r.rank == 3);
  CHECK(r.nullity == 1);
  CHECK(std::abs(r.V(1, 0)) < 1e-6 * std::abs(r.V(0, 0)));
}

TEST_CASE("J_f divergence is reported as an assumption violation") {
  const auto m = model1(kernels::bumped_cauchy(1.0), SkewingFunction::t_type(1, 1.0));
  CHECK_NOTHROW(information(m, InfoKind::reduced));
  try {
    information(m, InfoKind::full);
    FAIL("expected AssumptionViolation");
  } catch (const AssumptionViolation& e) {
    CHECK(e.assumption() == "(A1⁺)");
  }
}

TEST_CASE("identity is full rank") {
  const auto r = rank_diagnosis(Eigen::MatrixXd::Identity(4, 4), 0.0, 2, true);
  CHECK(r.rank == 4);
  CHECK(r.nullity == 0);
}

TEST_CASE("empirical information agrees with quadrature; parallel equals serial") {
  const auto m = model1(kernels::logistic(), SkewingFunction::sine(1, OuterCdf::logistic()));
  const auto q = information(m, InfoKind::full);
  const auto e = empirical_information(m, InfoKind::full, 20000, 9);
  const auto es = empirical_information_serial(m, InfoKind::full, 20000, 9);
  CHECK((e.gamma - es.gamma).norm() == 0.0);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(std::abs(e.gamma(i, j) - q.gamma(i, j)) <= 4.0 * e.std_error(i, j) + 1e-12);
  }
}
