#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "skewinfo/cli.hpp"
#include "skewinfo/errors.hpp"
#include "skewinfo/expmatch.hpp"
#include "skewinfo/fisher.hpp"
#include "skewinfo/mle.hpp"

using namespace skewinfo;

namespace {

const double kPi = std::numbers::pi;
const double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail += (detail.empty() ? "" : "; ") + std::string(ok ? "" : "FAILED ") + what;
  }
};

struct Criterion {
  int id;
  const char* title;
  double budget_s;
  std::function<Outcome()> run;
};

// Independent oracle: Gauss-Kronrod on the real line.
double oracle(const std::function<double(double)>& f) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -kInf, kInf, 15, 1e-14);
}

double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }

ThetaPoint standard(int k) { return ThetaPoint::standard(k); }

InfoMatrix reduced(const SymmetricKernel& k, const SkewingFunction& s) {
  return information(SkewModel(k, s, standard(k.dim())), InfoKind::reduced);
}

Outcome c1() {
  Outcome o;
  const auto k = kernels::gaussian();
  const auto s = SkewingFunction::linear(1);
  const InfoMatrix full = information(SkewModel(k, s, standard(1)), InfoKind::full);
  const RankReport r = rank_diagnosis(full);
  o.require(r.rank == 2 && !r.indeterminate, fmt::format("full rank {} (want 2)", r.rank));
  // φ_f(z) = z, ℓ³ = 2 Π̇(0) z with Π̇(0) = φ(0).
  const double e11 = oracle([](double z) { return z * z * phi(z); });
  const double e12 = oracle([](double z) { return z * 2.0 * phi(0.0) * z * phi(z); });
  const double e22 = oracle([](double z) { return std::pow(2.0 * phi(0.0) * z, 2) * phi(z); });
  const Eigen::MatrixXd g = full.reduced().gamma;
  const double dev = std::max({std::abs(g(0, 0) - e11), std::abs(g(0, 1) - e12), std::abs(g(1, 1) - e22)});
  o.require(dev < 1e-6, fmt::format("max |Γ⁰ - oracle| = {:.2e}", dev));
  const double closed = std::max({std::abs(e11 - 1.0), std::abs(e12 - std::sqrt(2.0 / kPi)),
                                  std::abs(e22 - 2.0 / kPi)});
  o.require(closed < 1e-10, fmt::format("oracle vs closed form {:.1e}", closed));
  return o;
}

Outcome c2() {
  Outcome o;
  const auto a = solve_a(SkewingFunction::linear(1), StandardizationRule::unit_variance);
  o.require(a.has_value(), "root found");
  if (a) {
    const double dev = std::abs(*a - std::sqrt(2.0 * kPi));
    o.require(dev < 1e-8, fmt::format("a = {:.12f}, |a - √(2π)| = {:.2e}", *a, dev));
  }
  return o;
}

Outcome c3() {
  Outcome o;
  const auto skewer = SkewingFunction::power(3.0);
  const InfoMatrix ep = reduced(kernels::exponential_power(3.0), skewer);
  const RankReport er = rank_diagnosis(ep);
  const double smin = er.singular_values.back();
  o.require(smin > 0.01 && er.rank == 2, fmt::format("EP(3) smallest singular value {:.4f}", smin));

  const SymmetricKernel g = construct_degenerate(skewer, StandardizationRule::unit_variance);
  const InfoMatrix gi = reduced(g, skewer);
  const RankReport gr = rank_diagnosis(gi);
  o.require(gr.nullity == 1, fmt::format("constructed nullity {}", gr.nullity));
  if (gr.nullity == 1) {
    const double res = null_relation_residual(g, skewer, null_relation(gr, gi.theta0.sigma_half));
    o.require(res < 1e-8, fmt::format("relation residual {:.2e}", res));
  }
  // log g(z) - log g(0) = -c |z|^{5/2}
  const double z0 = 0.0;
  const double l0 = g.log_density(std::span<const double>(&z0, 1));
  double lo = kInf, hi = -kInf;
  for (double z : {0.25, 0.5, 1.0, 2.0, 3.0}) {
    const double c = (l0 - g.log_density(std::span<const double>(&z, 1))) / std::pow(z, 2.5);
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  o.require((hi - lo) < 1e-8 * hi, fmt::format("exponent 5/2, c = {:.10f} (spread {:.1e})", hi, hi - lo));
  return o;
}

Outcome c4() {
  Outcome o;
  const auto sine = SkewingFunction::sine(1);
  const NaturalSpace ns = natural_space(sine);
  o.require(ns.points.size() == 50 && ns.divergent_count() == 50,
            fmt::format("{} of {} divergent", ns.divergent_count(), ns.points.size()));
  bool capability = false;
  try {
    construct_degenerate(sine, StandardizationRule::unit_variance);
  } catch (const CapabilityError&) {
    capability = true;
  }
  o.require(capability, "construct_degenerate capability error");
  const double det = reduced(kernels::gaussian(), sine).gamma.determinant();
  // E[z sin z] = e^{-1/2}, E[sin² z] = (1 - e^{-2}) / 2 under the standard normal.
  const double g12 = 2.0 * phi(0.0) * std::exp(-0.5);
  const double g22 = 4.0 * phi(0.0) * phi(0.0) * 0.5 * (1.0 - std::exp(-2.0));
  const double closed = g22 - g12 * g12;
  o.require(std::abs(det - closed) < 1e-10, fmt::format("det matches closed form {:.10f}", closed));
  o.require(det > 0.1, fmt::format("det Γ⁰ = {:.6f} (want > 0.1)", det));
  return o;
}

Outcome c5() {
  Outcome o;
  const auto k = kernels::product({UnivariateShape::gaussian(), UnivariateShape::logistic()});
  const auto s = SkewingFunction::linear(2);
  const InfoMatrix info = reduced(k, s);
  const RankReport r = rank_diagnosis(info);
  o.require(r.rank == 3 && !r.indeterminate, fmt::format("rank {} (want 3)", r.rank));
  const SingularityPrediction p = predict_singularity(k, s);
  o.require(p.m == 1, fmt::format("m = {}", p.m));
  if (r.nullity == 1) {
    const Eigen::VectorXd v = r.V.col(0);
    const double angle = std::acos(std::min(1.0, std::abs(v[0]) / v.norm()));
    o.require(angle < 1e-3, fmt::format("angle(V, e1) = {:.1e}", angle));
  }
  const VerificationRecord vr = verify_proposition(k, s, r, info.theta0.sigma_half);
  o.require(vr.passed, "verify_proposition " + vr.message);
  o.require(vr.max_fit_residual < 1e-5, fmt::format("fit residual {:.1e}", vr.max_fit_residual));
  o.require(vr.a_spread < 1e-4, fmt::format("a spread {:.1e} over {} contexts", vr.a_spread, vr.fits.size()));
  return o;
}

Outcome c6() {
  Outcome o;
  for (int k : {1, 2}) {
    for (double nu : {3.0, 5.0, 10.0}) {
      const auto s = SkewingFunction::t_type(k, nu, OuterCdf::student(nu + k));
      const RankReport r = rank_diagnosis(reduced(kernels::student(nu, k), s));
      const double smin = r.singular_values.back();
      o.require(smin > 0.005 && r.nullity == 0, fmt::format("k={} nu={:g}: {:.4f}", k, nu, smin));
    }
  }
  return o;
}

Outcome c7() {
  Outcome o;
  struct Named {
    std::string name;
    std::function<SymmetricKernel(StandardizationRule)> make;
  };
  const std::vector<Named> kernels_ = {
      {"gaussian", [](StandardizationRule r) { return kernels::gaussian(1, r); }},
      {"student(5)", [](StandardizationRule r) { return kernels::student(5.0, 1, r); }},
      {"laplace", [](StandardizationRule r) { return kernels::laplace(r); }},
      {"logistic", [](StandardizationRule r) { return kernels::logistic(r); }},
      {"ep(1.5)", [](StandardizationRule r) { return kernels::exponential_power(1.5, r); }},
      {"ep(3)", [](StandardizationRule r) { return kernels::exponential_power(3.0, r); }},
  };
  const std::vector<SkewingFunction> skewers = {SkewingFunction::linear(1), SkewingFunction::power(3.0),
                                                SkewingFunction::t_type(1, 3.0, OuterCdf::student(4.0)),
                                                SkewingFunction::sine(1)};
  int cases = 0, agree = 0, indeterminate = 0, violated = 0, singular = 0;
  std::string bad;
  auto check = [&](const SymmetricKernel& k, const SkewingFunction& s) {
    ++cases;
    try {
      const SingularityPrediction p = predict_singularity(k, s);
      const RankReport r = rank_diagnosis(reduced(k, s));
      if (p.indeterminate || r.indeterminate) {
        ++indeterminate;
      } else if (p.m == r.nullity) {
        ++agree;
        singular += p.m > 0 ? 1 : 0;
      } else {
        bad += fmt::format(" [{} / {}: predicted {}, numeric {}]", k.description(), s.description(), p.m,
                           r.nullity);
      }
    } catch (const AssumptionViolation&) {
      ++violated;
    }
  };
  for (auto rule : {StandardizationRule::unit_variance, StandardizationRule::median_of_squares}) {
    for (const auto& kn : kernels_) {
      const SymmetricKernel k = kn.make(rule);
      for (const auto& s : skewers) check(k, s);
    }
    for (const auto& s : skewers) {
      try {
        check(construct_degenerate(s, rule), s);
      } catch (const CapabilityError&) {
      }
    }
  }
  const int disagree = cases - agree - indeterminate - violated;
  o.require(disagree == 0, fmt::format("{} cases: {} agree ({} singular), {} indeterminate, {} assumption "
                                       "violations, {} disagree{}",
                                       cases, agree, singular, indeterminate, violated, disagree, bad));
  o.require(cases >= 5 * 3 * 2, "registry coverage");
  o.require(singular > 0, "at least one singular pair in the sweep");
  return o;
}

Outcome c8() {
  Outcome o;
  struct Model {
    std::string name;
    SkewModel model;
  };
  const std::vector<Model> models = {
      {"skew-normal", SkewModel(kernels::gaussian(), SkewingFunction::linear(1), standard(1))},
      {"logistic/sine", SkewModel(kernels::logistic(), SkewingFunction::sine(1), standard(1))},
      {"gaussian-logistic/linear(2)",
       SkewModel(kernels::product({UnivariateShape::gaussian(), UnivariateShape::logistic()}),
                 SkewingFunction::linear(2), standard(2))},
  };
  for (const auto& m : models) {
    const InfoMatrix q = information(m.model, InfoKind::full);
    const EmpiricalInfo e = empirical_information(m.model, InfoKind::full, 100000, 20240611);
    double worst = 0.0;
    for (int i = 0; i < q.size(); ++i) {
      for (int j = 0; j < q.size(); ++j) {
        const double z = std::abs(e.gamma(i, j) - q.gamma(i, j)) / std::max(e.std_error(i, j), 1e-300);
        if (e.std_error(i, j) > 0.0 || e.gamma(i, j) != q.gamma(i, j)) worst = std::max(worst, z);
      }
    }
    o.require(worst <= 4.0, fmt::format("{}: max |z| = {:.2f}", m.name, worst));
  }
  return o;
}

Outcome c9() {
  Outcome o;
  const auto dir = std::filesystem::temp_directory_path() / "skewinfo_acceptance";
  std::filesystem::create_directories(dir);
  const auto csv = dir / "figure1.csv";
  std::ostringstream out, err;
  const int code =
      cli::run({"plot", std::string(SKEWINFO_SPEC_DIR) + "/sine_skew.toml", "--deltas", "0,0.5,2,6", "--out",
                csv.string(), "--svg", (dir / "figure1.svg").string()},
               out, err);
  o.require(code == 0, fmt::format("exit {}", code));
  std::ifstream in(csv);
  std::string line;
  std::vector<std::vector<double>> rows;
  std::string header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header.empty()) {
      header = line;
      continue;
    }
    std::vector<double> v;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) v.push_back(std::stod(f));
    rows.push_back(v);
  }
  o.require(header == "x,pdf_delta=0,pdf_delta=0.5,pdf_delta=2,pdf_delta=6", "four delta columns");
  o.require(rows.size() == 401, fmt::format("{} grid points", rows.size()));
  if (rows.size() != 401 || rows[0].size() != 5) return o;
  double dev0 = 0.0, minv = kInf;
  std::vector<double> mass(4, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    dev0 = std::max(dev0, std::abs(rows[i][1] - phi(rows[i][0])));
    for (int c = 0; c < 4; ++c) {
      minv = std::min(minv, rows[i][c + 1]);
      if (i > 0) {
        mass[c] += 0.5 * (rows[i][0] - rows[i - 1][0]) * (rows[i][c + 1] + rows[i - 1][c + 1]);
      }
    }
  }
  o.require(dev0 < 1e-12, fmt::format("|δ=0 column - φ| = {:.1e}", dev0));
  o.require(minv >= 0.0, "nonnegative");
  double worst = 0.0;
  for (double m : mass) worst = std::max(worst, std::abs(m - 1.0));
  o.require(worst < 1e-3, fmt::format("trapezoid masses within {:.2e} of 1", worst));
  return o;
}

// Frozen from the pilot run (n = 200, R = 500, seed 2024).
constexpr double kGoldenSkewNormal = 0.5697;
constexpr double kGoldenSine = 0.1730;

Outcome c10() {
  Outcome o;
  const double ref = 5.0 / 9.0;
  const auto sn = symmetry_experiment(kernels::gaussian(), SkewingFunction::linear(1), standard(1), 200, 500, 2024);
  const auto si = symmetry_experiment(kernels::gaussian(), SkewingFunction::sine(1), standard(1), 200, 500, 2024);
  const auto fails = [](const ExperimentSummary& s) { return std::count(s.failed.begin(), s.failed.end(), true); };
  o.require(sn.bimodality_coefficient > ref,
            fmt::format("skew-normal BC {:.4f} > 5/9 ({} failed fits)", sn.bimodality_coefficient, fails(sn)));
  o.require(sn.sign_split >= 0.35 && sn.sign_split <= 0.65, fmt::format("sign split {:.3f}", sn.sign_split));
  o.require(si.bimodality_coefficient < ref,
            fmt::format("sine BC {:.4f} < 5/9 ({} failed fits)", si.bimodality_coefficient, fails(si)));
  o.require(std::abs(sn.bimodality_coefficient - kGoldenSkewNormal) <= 0.05, "skew-normal golden ±0.05");
  o.require(std::abs(si.bimodality_coefficient - kGoldenSine) <= 0.05, "sine golden ±0.05");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "skew-normal singularity", 5, c1},
      {2, "matching constant", 1, c2},
      {3, "exponential-power escape", 10, c3},
      {4, "sine skewer immunity", 5, c4},
      {5, "multivariate partial deficiency", 60, c5},
      {6, "skew-t non-degeneracy", 120, c6},
      {7, "oracle equivalence sweep", 300, c7},
      {8, "Monte Carlo consistency", 120, c8},
      {9, "curve family plot", 1, c9},
      {10, "near-symmetry pathology", 600, c10},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  bool ok = true;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < c.budget_s, fmt::format("runtime {:.2f} s < {:g} s", secs, c.budget_s));
    std::printf("%s c%d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str());
    std::fflush(stdout);
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
