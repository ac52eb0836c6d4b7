#include "skewinfo/mle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "skewinfo/errors.hpp"
#include "skewinfo/fisher.hpp"

namespace skewinfo {

namespace {

constexpr double kBad = 1e300;

Eigen::MatrixXd sym_from_vech(const double* v, int k) {
  Eigen::MatrixXd m(k, k);
  int r = 0;
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i <= j; ++i, ++r) m(i, j) = m(j, i) = v[r];
  }
  return m;
}

Eigen::MatrixXd expm_sym(const Eigen::MatrixXd& l) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l);
  return es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() *
         es.eigenvectors().transpose();
}

Eigen::MatrixXd logm_spd(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  return es.eigenvectors() * es.eigenvalues().array().log().matrix().asDiagonal() *
         es.eigenvectors().transpose();
}

// Chart: (μ, vech L, δ) with Σ^{1/2} = expm(L).
ThetaPoint from_chart(const double* p, int k) {
  ThetaPoint t;
  t.mu = Eigen::Map<const Eigen::VectorXd>(p, k);
  t.sigma_half = expm_sym(sym_from_vech(p + k, k));
  t.delta = Eigen::Map<const Eigen::VectorXd>(p + k + vech_size(k), k);
  return t;
}

std::vector<double> to_chart(const ThetaPoint& t) {
  const int k = t.dim();
  std::vector<double> p;
  p.insert(p.end(), t.mu.data(), t.mu.data() + k);
  const Eigen::VectorXd l = vech(logm_spd(t.sigma_half));
  p.insert(p.end(), l.data(), l.data() + l.size());
  p.insert(p.end(), t.delta.data(), t.delta.data() + k);
  return p;
}

struct Problem {
  const SkewModel* base;
  std::span<const double> data;
  int k;
};

double neg_mean_loglik(const gsl_vector* v, void* params) {
  const auto* pr = static_cast<const Problem*>(params);
  try {
    const ThetaPoint t = from_chart(v->data, pr->k);
    const SkewModel m = pr->base->with_theta(t);
    const double ll = log_likelihood(m, pr->data);
    if (!std::isfinite(ll)) return kBad;
    return -ll / static_cast<double>(pr->data.size() / static_cast<std::size_t>(pr->k));
  } catch (const Error&) {
    return kBad;
  }
}

struct SimplexRun {
  std::vector<double> x;
  double value = kBad;
  int iterations = 0;
  bool converged = false;
};

SimplexRun run_simplex(Problem& pr, const std::vector<double>& start, const FitOptions& opts) {
  const auto n = start.size();
  gsl_multimin_function fn{&neg_mean_loglik, n, &pr};
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* step = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i) {
    gsl_vector_set(x, i, start[i]);
    gsl_vector_set(step, i, 0.1);
  }
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  SimplexRun run;
  int status = GSL_CONTINUE;
  while (status == GSL_CONTINUE && run.iterations < opts.max_iterations) {
    ++run.iterations;
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), opts.size_tol);
  }
  run.converged = status == GSL_SUCCESS;
  run.value = s->fval;
  run.x.assign(s->x->data, s->x->data + n);
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);
  return run;
}

// Parameters (μ, vech Σ^{1/2}, δ) for the curvature proxy.
std::vector<double> natural_params(const ThetaPoint& t) {
  std::vector<double> p(t.mu.data(), t.mu.data() + t.dim());
  const Eigen::VectorXd s = vech(t.sigma_half);
  p.insert(p.end(), s.data(), s.data() + s.size());
  p.insert(p.end(), t.delta.data(), t.delta.data() + t.dim());
  return p;
}

ThetaPoint from_natural(const std::vector<double>& p, int k) {
  ThetaPoint t;
  t.mu = Eigen::Map<const Eigen::VectorXd>(p.data(), k);
  t.sigma_half = sym_from_vech(p.data() + k, k);
  t.delta = Eigen::Map<const Eigen::VectorXd>(p.data() + k + vech_size(k), k);
  return t;
}

void curvature(const SkewModel& base, std::span<const double> data, FitResult& res) {
  const int k = base.dim();
  const std::vector<double> p0 = natural_params(res.theta_hat);
  const auto d = p0.size();
  auto nll = [&](const std::vector<double>& p) {
    try {
      return -log_likelihood(base.with_theta(from_natural(p, k)), data);
    } catch (const Error&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  const double f0 = nll(p0);
  Eigen::MatrixXd h(d, d);
  const double eps = 1e-4;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      auto shifted = [&](double si, double sj) {
        auto p = p0;
        p[i] += si * eps;
        p[j] += sj * eps;
        return nll(p);
      };
      double v;
      if (i == j) {
        v = (shifted(1, 0) - 2.0 * f0 + shifted(-1, 0)) / (eps * eps);
      } else {
        v = (shifted(1, 1) - shifted(1, -1) - shifted(-1, 1) + shifted(-1, -1)) / (4.0 * eps * eps);
      }
      h(i, j) = h(j, i) = v;
    }
  }
  if (!h.allFinite()) {
    res.curvature_singular = true;
    return;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  const Eigen::VectorXd ev = es.eigenvalues();
  if (!(ev.minCoeff() > 1e-6 * std::max(1.0, ev.maxCoeff()))) {
    res.curvature_singular = true;
    return;
  }
  const Eigen::MatrixXd inv = es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
                              es.eigenvectors().transpose();
  for (std::size_t i = 0; i < d; ++i) res.stderr_proxy.push_back(std::sqrt(inv(i, i)));
}

}  // namespace

int theta_dim(int k) { return k * (k + 5) / 2; }

double log_likelihood(const SkewModel& model, std::span<const double> data) {
  const auto k = static_cast<std::size_t>(model.dim());
  double s = 0.0;
  for (std::size_t i = 0; i + k <= data.size(); i += k) s += model.log_pdf(data.subspan(i, k));
  return s;
}

FitResult fit(const SymmetricKernel& kernel, const SkewingFunction& skewer,
              std::span<const double> data, const std::optional<ThetaPoint>& init,
              const FitOptions& opts) {
  const int k = kernel.dim();
  const auto ku = static_cast<std::size_t>(k);
  if (data.size() % ku != 0) throw InputError("fit: data size is not a multiple of the dimension");
  const std::size_t n = data.size() / ku;
  const auto need = static_cast<std::size_t>(10 * theta_dim(k));
  if (n < need) {
    throw InputError("fit: need at least " + std::to_string(need) + " observations, got " +
                     std::to_string(n));
  }
  for (double v : data) {
    if (!std::isfinite(v)) throw InputError("fit: non-finite data");
  }
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      data.data(), static_cast<Eigen::Index>(n), k);
  const Eigen::VectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centred = x.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(n - 1);
  for (int j = 0; j < k; ++j) {
    if (!(cov(j, j) > 0.0)) throw InputError("fit: coordinate " + std::to_string(j + 1) + " has zero variance");
  }

  ThetaPoint start;
  if (init) {
    start = *init;
  } else {
    start.mu.resize(k);
    for (int j = 0; j < k; ++j) {
      std::vector<double> col(n);
      for (std::size_t i = 0; i < n; ++i) col[i] = x(static_cast<Eigen::Index>(i), j);
      const auto mid = col.begin() + static_cast<std::ptrdiff_t>(n / 2);
      std::nth_element(col.begin(), mid, col.end());
      double med = *mid;
      if (n % 2 == 0) med = 0.5 * (med + *std::max_element(col.begin(), mid));
      start.mu[j] = med;
    }
    start.sigma_half = sqrt_spd(cov);
    start.delta = Eigen::VectorXd::Zero(k);
  }
  start.validate();

  const SkewModel base(kernel, skewer, start);
  Problem pr{&base, data, k};
  std::vector<ThetaPoint> starts{start};
  if (opts.restarts) {
    for (double d : {0.5, -0.5}) {
      ThetaPoint t = start;
      t.delta = Eigen::VectorXd::Constant(k, d);
      starts.push_back(t);
    }
  }

  SimplexRun best;
  int total_iterations = 0;
  for (const auto& s : starts) {
    SimplexRun run = run_simplex(pr, to_chart(s), opts);
    // A second pass from the optimum guards against premature collapse.
    SimplexRun polish = run_simplex(pr, run.x, opts);
    total_iterations += run.iterations + polish.iterations;
    const bool converged = run.converged || polish.converged;
    if (polish.value <= run.value) run = polish;
    run.converged = converged;
    if (run.value < best.value) best = run;
  }

  FitResult res;
  res.theta_hat = from_chart(best.x.data(), k);
  res.loglik = log_likelihood(base.with_theta(res.theta_hat), data);
  res.iterations = total_iterations;
  res.converged = best.converged && best.value < kBad;
  curvature(base, data, res);
  return res;
}

double bimodality_coefficient(std::span<const double> values) {
  const auto n = static_cast<double>(values.size());
  if (values.size() < 3) throw InputError("bimodality_coefficient: need at least 3 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double m2 = 0.0;
  for (double v : values) m2 += (v - mean) * (v - mean);
  m2 /= n;
  if (!(m2 > 0.0)) throw InputError("bimodality_coefficient: zero spread");
  const double sd = std::sqrt(m2);
  double m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double z = (v - mean) / sd;
    m3 += z * z * z;
    m4 += z * z * z * z;
  }
  m3 /= n;
  m4 /= n;
  return (m3 * m3 + 1.0) / m4;
}

ExperimentSummary symmetry_experiment(const SymmetricKernel& kernel,
                                      const SkewingFunction& skewer,
                                      const ThetaPoint& theta_true, std::size_t n,
                                      std::size_t replicates, std::uint64_t seed,
                                      const FitOptions& opts) {
  if (replicates < 100) throw InputError("symmetry_experiment: need R >= 100 replicates");
  if (!theta_true.symmetric_point()) {
    throw ContractError("symmetry_experiment: theta_true must have delta = 0");
  }
  const SkewModel model(kernel, skewer, theta_true);
  ExperimentSummary out;
  out.replicates = replicates;
  out.n_per_replicate = n;
  out.seed = seed;
  out.delta_hats.assign(replicates, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> failed(replicates, 0);

  const auto rn = static_cast<std::ptrdiff_t>(replicates);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t r = 0; r < rn; ++r) {
    const auto u = static_cast<std::size_t>(r);
    try {
      const std::vector<double> x = model.sample(n, derive_seed(seed, u));
      const FitResult f = fit(kernel, skewer, x, std::nullopt, opts);
      out.delta_hats[u] = f.theta_hat.delta[0];
      failed[u] = f.converged ? 0 : 1;
    } catch (const Error&) {
      failed[u] = 1;
    }
  }
  out.failed.assign(failed.begin(), failed.end());

  std::vector<double> ok;
  for (std::size_t r = 0; r < replicates; ++r) {
    if (!failed[r] && std::isfinite(out.delta_hats[r])) ok.push_back(out.delta_hats[r]);
  }
  if (ok.size() >= 3) {
    out.bimodality_coefficient = bimodality_coefficient(ok);
    out.sign_split = static_cast<double>(std::count_if(ok.begin(), ok.end(), [](double v) { return v < 0.0; })) /
                     static_cast<double>(ok.size());
  }
  return out;
}

}  // namespace skewinfo
