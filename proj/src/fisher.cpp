#include "skewinfo/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "skewinfo/errors.hpp"

namespace skewinfo {

namespace {

void require_symmetry_point(const ThetaPoint& theta) {
  if (!theta.symmetric_point()) {
    throw ContractError("information is only defined here at delta = 0");
  }
}

quad::DecayHint decay_of(const SymmetricKernel& kernel) {
  switch (kernel.family()) {
    case KernelFamily::student:
    case KernelFamily::bumped_cauchy:
      return quad::DecayHint::heavy_tail;
    case KernelFamily::laplace:
    case KernelFamily::logistic:
      return quad::DecayHint::exponential_like;
    default:
      return quad::DecayHint::gaussian_like;
  }
}

// A vector integrand over z in R^k weighted by f(z); `body` fills the
// unweighted values.
quad::Integrand weighted_by_kernel(
    const SymmetricKernel& kernel, int components,
    std::function<void(std::span<const double>, std::span<double>)> body) {
  quad::Integrand in;
  in.dim = kernel.dim();
  in.components = components;
  in.decay = decay_of(kernel);
  if (kernel.family() == KernelFamily::student) {
    in.tail_index = kernel.shape().components[0].parameter();
  }
  in.breakpoints = kernel.breakpoints();
  in.eval = [kernel, body = std::move(body)](std::span<const double> z, std::span<double> out) {
    const double f = kernel.density(z);
    if (f == 0.0) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    body(z, out);
    for (double& v : out) v *= f;
  };
  if (kernel.can_sample()) {
    in.envelope = quad::Envelope{
        [kernel](CounterRng& rng, std::span<double> out) { kernel.sample(rng, out); },
        [kernel](std::span<const double> z) { return kernel.log_density(z); }};
  }
  return in;
}

// u(z) = (φ, [vec(zφ' - I)], ψ).
int u_size(int k, bool with_scatter) { return with_scatter ? 2 * k + k * k : 2 * k; }

void fill_u(const SymmetricKernel& kernel, const SkewingFunction& skewer, bool with_scatter,
            std::span<const double> z, std::span<double> u) {
  const auto k = z.size();
  kernel.score(z, u.first(k));
  std::size_t off = k;
  if (with_scatter) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < k; ++i) {
        u[off + i + k * j] = z[i] * u[j] - (i == j ? 1.0 : 0.0);
      }
    }
    off += k * k;
  }
  skewer.delta_gradient(z, u.subspan(off, k));
}

quad::Scheme pick_scheme(int k, const std::optional<quad::Scheme>& scheme) {
  return scheme ? *scheme : quad::default_scheme(k);
}

quad::ProbeResult probe_norm(const SymmetricKernel& kernel, int components,
                             std::function<void(std::span<const double>, std::span<double>)> body) {
  auto scalar = weighted_by_kernel(
      kernel, 1, [components, body = std::move(body)](std::span<const double> z, std::span<double> out) {
        std::vector<double> v(static_cast<std::size_t>(components));
        body(z, v);
        double s = 0.0;
        for (double x : v) s += x * x;
        out[0] = s;
      });
  return quad::probe_divergence(scalar);
}

}  // namespace

Eigen::VectorXd ScoreVector::stacked() const {
  Eigen::VectorXd out(loc.size() + scatter.size() + skew.size());
  out << loc, scatter, skew;
  return out;
}

Eigen::VectorXd vec(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

Eigen::VectorXd vech(const Eigen::MatrixXd& m) {
  const auto k = static_cast<int>(m.rows());
  Eigen::VectorXd out(vech_size(k));
  int r = 0;
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i <= j; ++i) out[r++] = m(i, j);
  }
  return out;
}

Eigen::MatrixXd duplication_matrix(int k) {
  if (k < 1) throw InputError("duplication_matrix: k must be >= 1");
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(vech_size(k), k * k);
  int r = 0;
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i <= j; ++i) {
      p(r, i + k * j) = 1.0;
      p(r, j + k * i) = 1.0;
      ++r;
    }
  }
  return p;
}

ScoreVector score_at_symmetry(const SkewModel& model, std::span<const double> x,
                              InfoKind which) {
  require_symmetry_point(model.theta());
  const int k = model.dim();
  const Eigen::VectorXd z = model.standardized(x);
  const std::span<const double> zs(z.data(), k);
  Eigen::VectorXd phi(k);
  model.kernel().score(zs, std::span<double>(phi.data(), k));
  Eigen::VectorXd psi(k);
  model.skewer().delta_gradient(zs, std::span<double>(psi.data(), k));
  const Eigen::MatrixXd& s_inv = model.sigma_half_inverse();

  ScoreVector s;
  s.loc = s_inv * phi;
  s.skew = 2.0 * psi;
  if (which == InfoKind::full) {
    const Eigen::MatrixXd m = z * phi.transpose() - Eigen::MatrixXd::Identity(k, k);
    s.scatter = duplication_matrix(k) * vec(m * s_inv);
  }
  return s;
}

std::string assumption_location(int k) { return k == 1 ? "(A1)" : "(B1)"; }
std::string assumption_skewness(int k) { return k == 1 ? "(A2⁺)" : "(B2⁺)"; }
std::string assumption_scatter(int k) { return k == 1 ? "(A1⁺)" : "(B1⁺)"; }

std::vector<std::string> InfoMatrix::labels() const {
  std::vector<std::string> out;
  for (int i = 1; i <= k; ++i) out.push_back(fmt::format("loc{}", i));
  if (kind == InfoKind::full) {
    for (int j = 1; j <= k; ++j) {
      for (int i = 1; i <= j; ++i) out.push_back(fmt::format("scatter{}{}", i, j));
    }
  }
  for (int i = 1; i <= k; ++i) out.push_back(fmt::format("skew{}", i));
  return out;
}

std::string InfoMatrix::block_of(int row) const {
  if (row < k) return "1";
  if (row < skew_offset()) return "2";
  return "3";
}

InfoMatrix InfoMatrix::reduced() const {
  if (kind == InfoKind::reduced) return *this;
  InfoMatrix r = *this;
  r.kind = InfoKind::reduced;
  std::vector<int> keep;
  for (int i = 0; i < k; ++i) keep.push_back(i);
  for (int i = 0; i < k; ++i) keep.push_back(skew_offset() + i);
  const auto n = static_cast<Eigen::Index>(keep.size());
  r.gamma.resize(n, n);
  r.err.resize(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      r.gamma(a, b) = gamma(keep[a], keep[b]);
      r.err(a, b) = err(keep[a], keep[b]);
    }
  }
  std::erase_if(r.assumptions, [](const AssumptionCheck& c) { return c.quantity == "J_f"; });
  return r;
}

ScoreGram score_gram(const SymmetricKernel& kernel, const SkewingFunction& skewer,
                     bool with_scatter, const std::optional<quad::Scheme>& scheme) {
  if (kernel.dim() != skewer.dim()) throw InputError("score_gram: dimension mismatch");
  const int k = kernel.dim();
  const int p = u_size(k, with_scatter);
  const int pairs = p * (p + 1) / 2;
  auto in = weighted_by_kernel(
      kernel, pairs, [&kernel, &skewer, with_scatter, p](std::span<const double> z, std::span<double> out) {
        std::vector<double> u(static_cast<std::size_t>(p));
        fill_u(kernel, skewer, with_scatter, z, u);
        std::size_t r = 0;
        for (int j = 0; j < p; ++j) {
          for (int i = 0; i <= j; ++i) out[r++] = u[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(j)];
        }
      });
  const quad::Scheme sch = pick_scheme(k, scheme);
  const quad::QuadResult q = quad::integrate(in, sch);
  ScoreGram g;
  g.value.resize(p, p);
  g.err.resize(p, p);
  std::size_t r = 0;
  for (int j = 0; j < p; ++j) {
    for (int i = 0; i <= j; ++i, ++r) {
      g.value(i, j) = g.value(j, i) = q.value[r];
      g.err(i, j) = g.err(j, i) = q.abs_error[r];
    }
  }
  g.scheme = quad::scheme_name(sch);
  return g;
}

std::vector<AssumptionCheck> check_assumptions(const SymmetricKernel& kernel,
                                               const SkewingFunction& skewer,
                                               InfoKind which) {
  const int k = kernel.dim();
  std::vector<AssumptionCheck> out;
  auto record = [&](const std::string& name, const std::string& quantity,
                    const quad::ProbeResult& pr) {
    AssumptionCheck c{name, quantity, pr.convergent, pr.value, pr.last_relative_increment};
    out.push_back(c);
    if (!pr.convergent) {
      throw AssumptionViolation(
          name, fmt::format("{} divergent (relative increment {:.3g} between radii {:g} and {:g})",
                            quantity, pr.last_relative_increment,
                            pr.radii[pr.radii.size() - 2], pr.radii.back()));
    }
  };
  record(assumption_location(k), "I_f",
         probe_norm(kernel, k, [&kernel](std::span<const double> z, std::span<double> v) {
           kernel.score(z, v);
         }));
  record(assumption_skewness(k), "int psi psi' f",
         probe_norm(kernel, k, [&skewer](std::span<const double> z, std::span<double> v) {
           skewer.delta_gradient(z, v);
         }));
  if (which == InfoKind::full) {
    record(assumption_scatter(k), "J_f",
           probe_norm(kernel, k * k, [&kernel, k](std::span<const double> z, std::span<double> v) {
             std::vector<double> phi(static_cast<std::size_t>(k));
             kernel.score(z, phi);
             for (int j = 0; j < k; ++j) {
               for (int i = 0; i < k; ++i) {
                 v[static_cast<std::size_t>(i + k * j)] =
                     z[static_cast<std::size_t>(i)] * phi[static_cast<std::size_t>(j)] - (i == j ? 1.0 : 0.0);
               }
             }
           }));
  }
  return out;
}

InfoMatrix information(const SkewModel& model, InfoKind which,
                       const std::optional<quad::Scheme>& scheme) {
  require_symmetry_point(model.theta());
  const int k = model.dim();
  InfoMatrix info;
  info.kind = which;
  info.k = k;
  info.theta0 = model.theta();
  info.assumptions = check_assumptions(model.kernel(), model.skewer(), which);

  const bool full = which == InfoKind::full;
  const ScoreGram g = score_gram(model.kernel(), model.skewer(), full, scheme);
  info.scheme = g.scheme;

  const int n = info_size(k, which);
  const int p = u_size(k, full);
  const Eigen::MatrixXd& s_inv = model.sigma_half_inverse();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, p);
  a.topLeftCorner(k, k) = s_inv;
  if (full) {
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(k, k);
    Eigen::MatrixXd kron(k * k, k * k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) kron.block(i * k, j * k, k, k) = s_inv(i, j) * id;
    }
    a.block(k, k, vech_size(k), k * k) = duplication_matrix(k) * kron;
  }
  a.bottomRightCorner(k, k) = 2.0 * Eigen::MatrixXd::Identity(k, k);

  info.gamma = a * g.value * a.transpose();
  info.gamma = 0.5 * (info.gamma + info.gamma.transpose());
  const Eigen::MatrixXd abs_a = a.cwiseAbs();
  info.err = abs_a * g.err * abs_a.transpose();
  return info;
}

RankReport rank_diagnosis(const Eigen::MatrixXd& gamma, double max_err, int k, bool split) {
  if (gamma.rows() != gamma.cols() || gamma.rows() == 0) {
    throw InputError("rank_diagnosis: square non-empty matrix required");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gamma, Eigen::ComputeFullV);
  const Eigen::VectorXd s = svd.singularValues();
  RankReport r;
  r.dim = static_cast<int>(gamma.rows());
  r.singular_values.assign(s.data(), s.data() + s.size());
  const double s_max = s.size() ? s[0] : 0.0;
  r.tolerance = std::max(1e-7 * s_max, 10.0 * max_err);
  for (double v : r.singular_values) {
    if (v > r.tolerance) ++r.rank;
    if (v > r.tolerance / 10.0 && v < 10.0 * r.tolerance) r.indeterminate = true;
  }
  r.nullity = r.dim - r.rank;
  r.null_basis = svd.matrixV().rightCols(r.nullity);
  if (split && r.nullity > 0) {
    for (int c = 0; c < r.nullity; ++c) {
      auto col = r.null_basis.col(c);
      Eigen::Index idx = 0;
      col.head(k).cwiseAbs().maxCoeff(&idx);
      if (col[idx] < 0.0) col = -col;
    }
    r.V = r.null_basis.topRows(k);
    r.W = r.null_basis.bottomRows(k);
  }
  return r;
}

RankReport rank_diagnosis(const InfoMatrix& info) {
  return rank_diagnosis(info.gamma, info.err.maxCoeff(), info.k,
                        info.kind == InfoKind::reduced);
}

NullRelation null_relation(const RankReport& report, const Eigen::MatrixXd& sigma_half) {
  NullRelation rel;
  if (report.nullity == 0 || report.V.size() == 0) return rel;
  const Eigen::MatrixXd s_inv = sigma_half.inverse();
  rel.V = s_inv * report.V;
  rel.W = -2.0 * report.W;
  return rel;
}

double null_relation_residual(const SymmetricKernel& kernel, const SkewingFunction& skewer,
                              const NullRelation& rel, const std::optional<quad::Scheme>& scheme) {
  if (rel.V.cols() == 0) return 0.0;
  const int k = kernel.dim();
  auto in = weighted_by_kernel(kernel, 1, [&](std::span<const double> z, std::span<double> out) {
    Eigen::VectorXd phi(k), psi(k);
    kernel.score(z, std::span<double>(phi.data(), k));
    skewer.delta_gradient(z, std::span<double>(psi.data(), k));
    out[0] = (rel.V.transpose() * phi - rel.W.transpose() * psi).squaredNorm();
  });
  return quad::integrate(in, pick_scheme(k, scheme)).scalar();
}

namespace {

struct Moments {
  std::vector<double> sum;
  std::vector<double> sum_sq;
};

EmpiricalInfo empirical_impl(const SkewModel& model, InfoKind which, std::size_t n,
                             std::uint64_t seed, bool parallel) {
  require_symmetry_point(model.theta());
  if (n < 2) throw InputError("empirical_information: n must be >= 2");
  const std::vector<double> x = parallel ? model.sample(n, seed) : model.sample_serial(n, seed);
  const int k = model.dim();
  const int p = info_size(k, which);
  const auto pairs = static_cast<std::size_t>(p * (p + 1) / 2);
  constexpr std::size_t kChunk = 1024;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<Moments> partial(chunks, Moments{std::vector<double>(pairs, 0.0),
                                               std::vector<double>(pairs, 0.0)});
  auto do_chunk = [&](std::size_t c) {
    Moments& m = partial[c];
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const Eigen::VectorXd l =
          score_at_symmetry(model, std::span<const double>(x.data() + i * k, k), which).stacked();
      std::size_t r = 0;
      for (int b = 0; b < p; ++b) {
        for (int a = 0; a <= b; ++a, ++r) {
          const double v = l[a] * l[b];
          m.sum[r] += v;
          m.sum_sq[r] += v * v;
        }
      }
    }
  };
  if (parallel) {
    const auto cn = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t c = 0; c < cn; ++c) do_chunk(static_cast<std::size_t>(c));
  } else {
    for (std::size_t c = 0; c < chunks; ++c) do_chunk(c);
  }

  EmpiricalInfo e;
  e.n = n;
  e.gamma.resize(p, p);
  e.std_error.resize(p, p);
  std::vector<double> column(chunks);
  std::size_t r = 0;
  const double dn = static_cast<double>(n);
  for (int b = 0; b < p; ++b) {
    for (int a = 0; a <= b; ++a, ++r) {
      for (std::size_t c = 0; c < chunks; ++c) column[c] = partial[c].sum[r];
      const double mean = quad::pairwise_sum(column) / dn;
      for (std::size_t c = 0; c < chunks; ++c) column[c] = partial[c].sum_sq[r];
      const double mean_sq = quad::pairwise_sum(column) / dn;
      const double var = std::max(0.0, (mean_sq - mean * mean) * dn / (dn - 1.0));
      e.gamma(a, b) = e.gamma(b, a) = mean;
      e.std_error(a, b) = e.std_error(b, a) = std::sqrt(var / dn);
    }
  }
  return e;
}

}  // namespace

EmpiricalInfo empirical_information(const SkewModel& model, InfoKind which, std::size_t n,
                                    std::uint64_t seed) {
  return empirical_impl(model, which, n, seed, true);
}

EmpiricalInfo empirical_information_serial(const SkewModel& model, InfoKind which,
                                           std::size_t n, std::uint64_t seed) {
  return empirical_impl(model, which, n, seed, false);
}

}  // namespace skewinfo
