#include "skewinfo/expmatch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include "skewinfo/errors.hpp"
#include "skewinfo/quad.hpp"

namespace skewinfo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double psi_shift(const SkewingFunction& skewer) {
  const std::vector<double> zero(static_cast<std::size_t>(skewer.dim()), 0.0);
  return skewer.primitive(zero);
}

quad::Integrand exp_neg_psi(const SkewingFunction& skewer, double a, double shift,
                            int power = 0) {
  quad::Integrand in;
  in.dim = skewer.dim();
  in.eval = [skewer, a, shift, power](std::span<const double> z, std::span<double> out) {
    const double e = std::exp(-a * (skewer.primitive(z) - shift));
    double w = 1.0;
    if (power > 0) {
      double r2 = 0.0;
      for (double v : z) r2 += v * v;
      w = std::pow(r2, 0.5 * power);
    }
    out[0] = e == 0.0 ? 0.0 : w * e;
  };
  return in;
}

bool probe_convergent(const SkewingFunction& skewer, double a, double shift, double* value) {
  const quad::ProbeResult r = quad::probe_divergence(exp_neg_psi(skewer, a, shift));
  if (value) *value = r.value;
  return r.convergent;
}

}  // namespace

std::vector<double> default_a_grid() {
  constexpr int kPerSign = 25;
  std::vector<double> pos(kPerSign);
  for (int i = 0; i < kPerSign; ++i) pos[i] = std::pow(10.0, -2.0 + 4.0 * i / (kPerSign - 1));
  std::vector<double> grid;
  for (auto it = pos.rbegin(); it != pos.rend(); ++it) grid.push_back(-*it);
  grid.insert(grid.end(), pos.begin(), pos.end());
  return grid;
}

bool NaturalSpace::empty() const {
  return std::none_of(points.begin(), points.end(), [](const auto& p) { return p.convergent; });
}

std::size_t NaturalSpace::divergent_count() const {
  return static_cast<std::size_t>(
      std::count_if(points.begin(), points.end(), [](const auto& p) { return !p.convergent; }));
}

std::string NaturalSpace::pattern() const {
  bool pos_all = true, neg_all = true, pos_any = false, neg_any = false;
  for (const auto& p : points) {
    if (p.a > 0.0) {
      pos_all = pos_all && p.convergent;
      pos_any = pos_any || p.convergent;
    } else {
      neg_all = neg_all && p.convergent;
      neg_any = neg_any || p.convergent;
    }
  }
  if (!pos_any && !neg_any) return "empty";
  if (pos_all && !neg_any) return "positive";
  if (neg_all && !pos_any) return "negative";
  if (pos_all && neg_all) return "all";
  return "mixed";
}

NaturalSpace natural_space(const SkewingFunction& skewer, std::span<const double> a_grid) {
  std::vector<double> grid(a_grid.begin(), a_grid.end());
  if (grid.empty()) grid = default_a_grid();
  std::sort(grid.begin(), grid.end());
  const double shift = psi_shift(skewer);

  NaturalSpace ns;
  ns.points.resize(grid.size());
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto& p = ns.points[static_cast<std::size_t>(i)];
    p.a = grid[static_cast<std::size_t>(i)];
    double v = 0.0;
    p.convergent = probe_convergent(skewer, p.a, shift, &v);
    p.normalizer = p.convergent ? v : 0.0;
  }

  for (std::size_t i = 0; i + 1 < ns.points.size(); ++i) {
    const auto& lo = ns.points[i];
    const auto& hi = ns.points[i + 1];
    if (lo.convergent == hi.convergent) continue;
    double a = lo.a, b = hi.a;
    for (int it = 0; it < 20; ++it) {
      const double mid = 0.5 * (a + b);
      if (probe_convergent(skewer, mid, shift, nullptr) == lo.convergent) {
        a = mid;
      } else {
        b = mid;
      }
    }
    ns.boundaries.push_back(0.5 * (a + b));
  }
  return ns;
}

namespace {

// `known_convergent` skips the natural-space probe for a inside a bracket
// whose ends were already probed.
double constraint_impl(const SkewingFunction& skewer, StandardizationRule rule, double a,
                       bool known_convergent) {
  const double shift = psi_shift(skewer);
  if (!known_convergent && !probe_convergent(skewer, a, shift, nullptr)) return kNaN;
  quad::Adaptive1D opts;
  opts.rel_tol = 1e-13;
  try {
    const double mass = quad::integrate(exp_neg_psi(skewer, a, shift), opts).scalar();
    if (rule == StandardizationRule::unit_variance) {
      const auto second = exp_neg_psi(skewer, a, shift, 2);
      if (!known_convergent && !quad::probe_divergence(second).convergent) return kNaN;
      return quad::integrate(second, opts).scalar() / mass - 1.0;
    }
    auto fn = [&skewer, a, shift](double x, std::span<double> out) {
      out[0] = std::exp(-a * (skewer.primitive(std::span<const double>(&x, 1)) - shift));
    };
    quad::Adaptive1D o;
    o.abs_tol = 1e-15;
    o.rel_tol = 1e-14;
    const double centre = quad::integrate_interval(fn, 1, -1.0, 1.0, o).value[0];
    return 0.5 + 0.5 * centre / mass - 0.75;
  } catch (const QuadratureBudgetError&) {
    return kNaN;
  }
}

}  // namespace

double a_constraint(const SkewingFunction& skewer, StandardizationRule rule, double a) {
  if (skewer.dim() != 1) throw InputError("solve_a: one-dimensional skewer required");
  return constraint_impl(skewer, rule, a, false);
}

std::optional<double> solve_a(const SkewingFunction& skewer, StandardizationRule rule) {
  if (skewer.dim() != 1) throw InputError("solve_a: one-dimensional skewer required");
  const NaturalSpace ns = natural_space(skewer);
  if (ns.empty()) return std::nullopt;

  std::vector<std::pair<double, double>> values;  // (a, h(a)) on the convergent grid
  for (const auto& p : ns.points) {
    if (!p.convergent) continue;
    // The mass converges here; only the second moment still needs a probe.
    double h = kNaN;
    if (rule == StandardizationRule::unit_variance) {
      h = constraint_impl(skewer, rule, p.a, false);
    } else {
      h = constraint_impl(skewer, rule, p.a, true);
    }
    if (std::isfinite(h)) values.emplace_back(p.a, h);
  }
  std::vector<std::pair<double, double>> brackets;
  std::vector<double> exact;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].second == 0.0) exact.push_back(values[i].first);
    if (i + 1 < values.size() && values[i].second * values[i + 1].second < 0.0) {
      brackets.emplace_back(values[i].first, values[i + 1].first);
    }
  }
  std::vector<double> roots = exact;
  auto h = [&](double a) { return constraint_impl(skewer, rule, a, true); };
  for (const auto& [lo, hi] : brackets) {
    std::uintmax_t iters = 200;
    auto tol = [](double x, double y) { return std::abs(x - y) <= 1e-15 * std::abs(x); };
    const auto [x, y] = boost::math::tools::toms748_solve(h, lo, hi, tol, iters);
    roots.push_back(0.5 * (x + y));
  }
  if (roots.empty()) return std::nullopt;
  if (roots.size() > 1) {
    std::string list;
    for (double r : roots) list += fmt::format(" {:.12g}", r);
    throw AmbiguityError("solve_a: several roots of the " + std::string(rule_name(rule)) +
                             " constraint:" + list,
                         roots);
  }
  const double residual = h(roots[0]);
  if (!(std::abs(residual) < 1e-9)) {
    throw Error(fmt::format("solve_a: constraint residual {:.3g} at a = {:.17g} exceeds 1e-9",
                            residual, roots[0]));
  }
  return roots[0];
}

std::string SingularityPrediction::verdict() const {
  std::string v = m == 0 ? "nonsingular" : fmt::format("singular({})", m);
  if (indeterminate) v += " [indeterminate]";
  return v;
}

SingularityPrediction predict_singularity(const SymmetricKernel& kernel,
                                          const SkewingFunction& skewer) {
  if (kernel.dim() != skewer.dim()) throw InputError("predict_singularity: dimension mismatch");
  const int k = kernel.dim();
  SingularityPrediction p;
  check_assumptions(kernel, skewer, InfoKind::reduced);
  p.gram = score_gram(kernel, skewer, false);
  p.gram_rank = rank_diagnosis(p.gram.value, p.gram.err.maxCoeff(), k, true);
  p.m = p.gram_rank.nullity;
  p.indeterminate = p.gram_rank.indeterminate;
  if (p.m == 0) return p;

  p.V = p.gram_rank.V;
  p.W = -p.gram_rank.W;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.gram.value);
  p.residual = std::max(0.0, es.eigenvalues().head(p.m).sum());

  if (k == 1 && p.m == 1) {
    p.a = p.gram.value(0, 1) / p.gram.value(1, 1);
    try {
      SymmetricKernel g = kernels::exp_of_neg_psi(*p.a, skewer, kernel.rule());
      double sup = 0.0;
      for (int i = 0; i <= 80; ++i) {
        const double z = -4.0 + 0.1 * i;
        const std::span<const double> zs(&z, 1);
        sup = std::max(sup, std::abs(kernel.log_density(zs) - g.log_density(zs)));
      }
      p.log_match_sup = sup;
      p.matched = sup < 1e-6;
      p.matched_density = std::move(g);
    } catch (const Error&) {
      p.matched = false;
    }
  }
  return p;
}

namespace {

int free_points(int m) {
  switch (m) {
    case 1:
      return 25;
    case 2:
      return 13;
    default:
      return 7;
  }
}

ContextFit fit_context(const SymmetricKernel& kernel, const SkewingFunction& skewer,
                       const Eigen::MatrixXd& q, int m, const std::vector<double>& context) {
  const int k = kernel.dim();
  const int per = free_points(m);
  int total = 1;
  for (int i = 0; i < m; ++i) total *= per;
  Eigen::MatrixXd x(total, 2);
  Eigen::VectorXd yv(total);
  Eigen::VectorXd y(k);
  for (int j = 0; j < k - m; ++j) y[m + j] = context[static_cast<std::size_t>(j)];
  for (int r = 0; r < total; ++r) {
    int rem = r;
    for (int i = 0; i < m; ++i) {
      y[i] = -3.0 + 6.0 * (rem % per) / (per - 1);
      rem /= per;
    }
    const Eigen::VectorXd z = q * y;
    const std::span<const double> zs(z.data(), k);
    x(r, 0) = 1.0;
    x(r, 1) = -skewer.primitive(zs);
    yv[r] = kernel.log_density(zs);
  }
  const Eigen::Vector2d beta = x.colPivHouseholderQr().solve(yv);
  ContextFit fit;
  fit.context = context;
  fit.intercept = beta[0];
  fit.a = beta[1];
  fit.residual = (yv - x * beta).cwiseAbs().maxCoeff();
  return fit;
}

}  // namespace

VerificationRecord verify_proposition(const SymmetricKernel& kernel,
                                      const SkewingFunction& skewer, const RankReport& report,
                                      const Eigen::MatrixXd& sigma_half) {
  const int k = kernel.dim();
  VerificationRecord rec;
  const SingularityPrediction pred = predict_singularity(kernel, skewer);
  rec.m_numeric = report.nullity;
  rec.m_predicted = pred.m;
  rec.indeterminate = report.indeterminate || pred.indeterminate;
  rec.agree = rec.m_numeric == rec.m_predicted;

  const int m = rec.m_numeric;
  if (m >= 1 && report.V.cols() == m) {
    const Eigen::MatrixXd v = sigma_half.inverse() * report.V;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(k, k);
    rec.O = q.transpose();

    std::vector<std::vector<double>> contexts{{}};
    for (int j = 0; j < k - m; ++j) {
      std::vector<std::vector<double>> next;
      for (const auto& c : contexts) {
        for (int val = -2; val <= 2; ++val) {
          auto e = c;
          e.push_back(val);
          next.push_back(std::move(e));
        }
      }
      contexts = std::move(next);
    }
    rec.fits.resize(contexts.size());
    const auto nc = static_cast<std::ptrdiff_t>(contexts.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < nc; ++i) {
      const auto u = static_cast<std::size_t>(i);
      rec.fits[u] = fit_context(kernel, skewer, q, m, contexts[u]);
    }
    double amin = std::numeric_limits<double>::infinity();
    double amax = -amin;
    for (const auto& f : rec.fits) {
      rec.max_fit_residual = std::max(rec.max_fit_residual, f.residual);
      amin = std::min(amin, f.a);
      amax = std::max(amax, f.a);
    }
    rec.a_spread = amax - amin;
    rec.fits_ok = rec.max_fit_residual < 1e-5;
    const int per = free_points(m);
    rec.grid = fmt::format("free coordinates: {}^{} points on [-3, 3]; contexts: {{-2..2}}^{} ({})",
                           per, m, k - m, contexts.size());
  } else {
    rec.grid = "none (nonsingular)";
  }

  if (kernel.family() == KernelFamily::exp_of_neg_psi) rec.converse_ok = rec.m_numeric >= 1;

  rec.passed = (rec.agree || rec.indeterminate) && rec.fits_ok && rec.converse_ok;
  if (!rec.agree) {
    rec.message = fmt::format("numeric nullity {} disagrees with predicted {}{}", rec.m_numeric,
                              rec.m_predicted, rec.indeterminate ? " (indeterminate)" : "");
  } else if (!rec.fits_ok) {
    rec.message = fmt::format("conditional exponential-family fit residual {:.3g} >= 1e-5",
                              rec.max_fit_residual);
  } else if (!rec.converse_ok) {
    rec.message = "constructed exponential-family kernel shows full rank";
  } else {
    rec.message = m == 0 ? "nonsingular; nothing to fit" : "consistent";
  }
  return rec;
}

SymmetricKernel construct_degenerate(const SkewingFunction& skewer, StandardizationRule rule) {
  const int k = skewer.dim();
  const std::string none = "no degenerate kernel exists for this skewer";
  if (k > 1 && skewer.family() == SkewerFamily::score_composed &&
      skewer.composed_kernel()->rule() == rule) {
    // exp(-a Ψ) ∝ f^{a Π̇(0)}, so a = 1 / Π̇(0) gives back the composed kernel.
    return *skewer.composed_kernel();
  }
  if (k == 1) {
    const std::optional<double> a = solve_a(skewer, rule);
    if (!a) throw CapabilityError(none + " (" + skewer.description() + ")");
    return kernels::exp_of_neg_psi(*a, skewer, rule);
  }
  if (skewer.family() == SkewerFamily::linear) return kernels::gaussian(k, rule);
  if (skewer.family() == SkewerFamily::sine) {
    throw CapabilityError(none + " (" + skewer.description() + ")");
  }
  throw CapabilityError("construct_degenerate: " + skewer.description() +
                        " has no product-structured primitive in " + std::to_string(k) +
                        " dimensions");
}

}  // namespace skewinfo
