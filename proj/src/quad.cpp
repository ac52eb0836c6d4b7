#include "skewinfo/quad.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "skewinfo/errors.hpp"
#include "skewinfo/parallel.hpp"

namespace skewinfo::quad {

namespace {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 21>;
using Gauss10 = boost::math::quadrature::gauss<double, 10>;

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Panel {
  double a = 0.0;
  double b = 0.0;
  std::vector<double> value;
  std::vector<double> error;
  double max_err = 0.0;
  bool finite = true;
};

struct PanelOrder {
  bool operator()(const Panel& x, const Panel& y) const {
    return x.max_err < y.max_err;
  }
};

// 21-point Gauss-Kronrod with the embedded 10-point Gauss rule and the
// QUADPACK error rescaling, applied componentwise.
Panel gk21(const std::function<void(double, std::span<double>)>& fn,
           int components, double a, double b) {
  const auto& xk = Kronrod::abscissa();
  const auto& wk = Kronrod::weights();
  const auto& wg = Gauss10::weights();
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const auto d = static_cast<std::size_t>(components);

  std::vector<double> fvals(21 * d);
  fn(centre, std::span<double>(fvals.data(), d));
  for (std::size_t j = 1; j < xk.size(); ++j) {
    const double dx = half * xk[j];
    fn(centre - dx, std::span<double>(fvals.data() + (2 * j - 1) * d, d));
    fn(centre + dx, std::span<double>(fvals.data() + (2 * j) * d, d));
  }

  Panel p;
  p.a = a;
  p.b = b;
  p.value.assign(d, 0.0);
  p.error.assign(d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    const double fc = fvals[c];
    double resk = wk[0] * fc;
    double resg = 0.0;
    double resabs = wk[0] * std::abs(fc);
    for (std::size_t j = 1; j < xk.size(); ++j) {
      const double f1 = fvals[(2 * j - 1) * d + c];
      const double f2 = fvals[(2 * j) * d + c];
      resk += wk[j] * (f1 + f2);
      resabs += wk[j] * (std::abs(f1) + std::abs(f2));
      if (j % 2 == 1) resg += wg[j / 2] * (f1 + f2);
    }
    const double reskh = 0.5 * resk;
    double resasc = wk[0] * std::abs(fc - reskh);
    for (std::size_t j = 1; j < xk.size(); ++j) {
      resasc += wk[j] * (std::abs(fvals[(2 * j - 1) * d + c] - reskh) +
                         std::abs(fvals[(2 * j) * d + c] - reskh));
    }
    const double ah = std::abs(half);
    resabs *= ah;
    resasc *= ah;
    double err = std::abs((resk - resg) * half);
    if (resasc != 0.0 && err != 0.0) {
      err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    }
    if (resabs > std::numeric_limits<double>::min() / (50.0 * kEps)) {
      err = std::max(50.0 * kEps * resabs, err);
    }
    p.value[c] = resk * half;
    p.error[c] = err;
    if (!std::isfinite(p.value[c]) || !std::isfinite(err)) p.finite = false;
    p.max_err = std::max(p.max_err, err);
  }
  if (!p.finite) p.max_err = std::numeric_limits<double>::infinity();
  return p;
}

double rational_map(double t) { return t / (1.0 - t * t); }
double rational_jacobian(double t) {
  const double s = 1.0 - t * t;
  return (1.0 + t * t) / (s * s);
}

// Weighted product: a zero integrand value stays zero even where the
// Jacobian overflows.
inline double weighted(double value, double weight) {
  return value == 0.0 ? 0.0 : value * weight;
}

struct Rule1D {
  std::vector<double> z;
  std::vector<double> w;
};

// Composite 10-point Gauss-Legendre on 2^level equal panels of (-1, 1),
// pushed through the rational map.
Rule1D mapped_rule(int level) {
  const auto& xg = Gauss10::abscissa();
  const auto& wg = Gauss10::weights();
  const int panels = 1 << level;
  const double width = 2.0 / panels;
  Rule1D rule;
  rule.z.reserve(static_cast<std::size_t>(panels) * 10);
  rule.w.reserve(static_cast<std::size_t>(panels) * 10);
  for (int p = 0; p < panels; ++p) {
    const double centre = -1.0 + (p + 0.5) * width;
    const double half = 0.5 * width;
    for (std::size_t j = 0; j < xg.size(); ++j) {
      for (int s : {-1, 1}) {
        const double t = centre + s * half * xg[j];
        rule.z.push_back(rational_map(t));
        rule.w.push_back(half * wg[j] * rational_jacobian(t));
      }
    }
  }
  return rule;
}

// Composite Gauss-Legendre on [-u_max, u_max] under z = sinh(u).
Rule1D sinh_rule(int level, double u_max) {
  const auto& xg = Gauss10::abscissa();
  const auto& wg = Gauss10::weights();
  const int panels = 1 << level;
  const double width = 2.0 * u_max / panels;
  Rule1D rule;
  for (int p = 0; p < panels; ++p) {
    const double centre = -u_max + (p + 0.5) * width;
    const double half = 0.5 * width;
    for (std::size_t j = 0; j < xg.size(); ++j) {
      for (int s : {-1, 1}) {
        const double u = centre + s * half * xg[j];
        rule.z.push_back(std::sinh(u));
        rule.w.push_back(half * wg[j] * std::cosh(u));
      }
    }
  }
  return rule;
}

// Sum over the tensor grid of `rule`^dim. Rows (first coordinate) are
// independent work items; each row is summed in a fixed order, then rows are
// combined pairwise, so the result does not depend on the thread count.
std::vector<double> tensor_sum(const Integrand& fn, const Rule1D& rule,
                               bool parallel) {
  const int k = fn.dim;
  const auto d = static_cast<std::size_t>(fn.components);
  const std::size_t n = rule.z.size();
  std::size_t inner = 1;
  for (int i = 1; i < k; ++i) inner *= n;
  std::vector<double> rows(n * d, 0.0);

  auto do_row = [&](std::size_t r) {
    std::vector<double> z(static_cast<std::size_t>(k));
    std::vector<double> out(d);
    std::vector<std::size_t> idx(static_cast<std::size_t>(k), 0);
    double* acc = rows.data() + r * d;
    z[0] = rule.z[r];
    for (std::size_t m = 0; m < inner; ++m) {
      std::size_t rem = m;
      double w = rule.w[r];
      for (int i = k - 1; i >= 1; --i) {
        const std::size_t j = rem % n;
        rem /= n;
        z[static_cast<std::size_t>(i)] = rule.z[j];
        w *= rule.w[j];
      }
      fn.eval(z, out);
      for (std::size_t c = 0; c < d; ++c) acc[c] += weighted(out[c], w);
    }
  };

  if (parallel) {
    const auto rows_n = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t r = 0; r < rows_n; ++r) do_row(static_cast<std::size_t>(r));
  } else {
    for (std::size_t r = 0; r < n; ++r) do_row(r);
  }

  std::vector<double> total(d);
  std::vector<double> column(n);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t r = 0; r < n; ++r) column[r] = rows[r * d + c];
    total[c] = pairwise_sum(column);
  }
  return total;
}

QuadResult adaptive_infinite(const Integrand& fn, const Adaptive1D& opts) {
  auto mapped = [&fn](double t, std::span<double> out) {
    const double z = rational_map(t);
    const double jac = rational_jacobian(t);
    fn.eval(std::span<const double>(&z, 1), out);
    for (double& v : out) v = weighted(v, jac);
  };
  std::vector<double> breaks = {-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75};
  for (double z : fn.breakpoints) {
    if (z != 0.0 && std::isfinite(z)) {
      breaks.push_back((std::sqrt(1.0 + 4.0 * z * z) - 1.0) / (2.0 * z));
    }
  }
  Adaptive1D o = opts;
  o.max_intervals += 2 * static_cast<int>(fn.breakpoints.size());
  IntervalResult r =
      integrate_interval(mapped, fn.components, -1.0, 1.0, o, breaks);
  bool finite = true;
  for (double v : r.value) finite = finite && std::isfinite(v);
  if (!r.converged) {
    throw QuadratureBudgetError(
        finite ? "adaptive quadrature: node budget exhausted before reaching the error target"
               : "adaptive quadrature: integrand not finite on the domain",
        r.value, r.abs_error);
  }
  QuadResult q;
  q.value = std::move(r.value);
  q.abs_error = std::move(r.abs_error);
  q.nodes_used = r.nodes_used;
  q.scheme = "adaptive_1d";
  return q;
}

QuadResult tensor(const Integrand& fn, const TensorProduct& opts,
                  bool parallel) {
  if (opts.level < 1) throw InputError("tensor_product: level must be >= 1");
  if (fn.dim > 3) throw InputError("tensor_product: dimension must be <= 3");
  const Rule1D fine = mapped_rule(opts.level);
  const Rule1D coarse = mapped_rule(opts.level - 1);
  QuadResult q;
  q.value = tensor_sum(fn, fine, parallel);
  const std::vector<double> lower = tensor_sum(fn, coarse, parallel);
  q.abs_error.resize(q.value.size());
  for (std::size_t c = 0; c < q.value.size(); ++c) {
    q.abs_error[c] = std::max(std::abs(q.value[c] - lower[c]),
                              4.0 * kEps * std::abs(q.value[c]));
  }
  q.nodes_used = static_cast<std::size_t>(
      std::pow(static_cast<double>(fine.z.size()), fn.dim) +
      std::pow(static_cast<double>(coarse.z.size()), fn.dim));
  q.scheme = "tensor_product(" + std::to_string(opts.level) + ")";
  for (double v : q.value) {
    if (!std::isfinite(v)) q.divergent = true;
  }
  return q;
}

QuadResult monte_carlo(const Integrand& fn, const MonteCarlo& opts,
                       bool parallel) {
  if (!fn.envelope) {
    throw InputError("monte_carlo: integrand carries no sampling envelope");
  }
  if (opts.n < 2) throw InputError("monte_carlo: need at least two draws");
  const auto d = static_cast<std::size_t>(fn.components);
  const auto k = static_cast<std::size_t>(fn.dim);
  constexpr std::size_t kChunk = 1024;
  const std::size_t chunks = (opts.n + kChunk - 1) / kChunk;
  std::vector<double> sums(chunks * d, 0.0);
  std::vector<double> squares(chunks * d, 0.0);

  auto do_chunk = [&](std::size_t ch) {
    std::vector<double> z(k);
    std::vector<double> out(d);
    const std::size_t begin = ch * kChunk;
    const std::size_t end = std::min(opts.n, begin + kChunk);
    for (std::size_t i = begin; i < end; ++i) {
      CounterRng rng(opts.seed, i);
      fn.envelope->sample(rng, z);
      const double w = std::exp(-fn.envelope->log_density(z));
      fn.eval(z, out);
      for (std::size_t c = 0; c < d; ++c) {
        const double v = weighted(out[c], w);
        sums[ch * d + c] += v;
        squares[ch * d + c] += v * v;
      }
    }
  };
  if (parallel) {
    const auto n = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ch = 0; ch < n; ++ch) do_chunk(static_cast<std::size_t>(ch));
  } else {
    for (std::size_t ch = 0; ch < chunks; ++ch) do_chunk(ch);
  }

  QuadResult q;
  q.value.resize(d);
  q.abs_error.resize(d);
  std::vector<double> col(chunks);
  const auto n = static_cast<double>(opts.n);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t ch = 0; ch < chunks; ++ch) col[ch] = sums[ch * d + c];
    const double mean = pairwise_sum(col) / n;
    for (std::size_t ch = 0; ch < chunks; ++ch) col[ch] = squares[ch * d + c];
    const double second = pairwise_sum(col) / n;
    const double var = std::max(0.0, second - mean * mean) * n / (n - 1.0);
    q.value[c] = mean;
    q.abs_error[c] = std::sqrt(var / n);
  }
  q.nodes_used = opts.n;
  q.scheme = "monte_carlo(" + std::to_string(opts.n) + "," +
             std::to_string(opts.seed) + ")";
  return q;
}

QuadResult dispatch(const Integrand& fn, const Scheme& scheme, bool parallel) {
  if (fn.dim < 1 || fn.components < 1 || !fn.eval) {
    throw InputError("integrate: malformed integrand");
  }
  return std::visit(
      [&](const auto& s) -> QuadResult {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Adaptive1D>) {
          if (fn.dim != 1) {
            throw InputError("adaptive_1d requires a one-dimensional integrand");
          }
          return adaptive_infinite(fn, s);
        } else if constexpr (std::is_same_v<S, TensorProduct>) {
          return tensor(fn, s, parallel);
        } else {
          return monte_carlo(fn, s, parallel);
        }
      },
      scheme);
}

// Partial integral over [-R, R]^k.
double cube_integral(const Integrand& fn, double radius) {
  const double u_max = std::asinh(radius);
  if (fn.dim == 1) {
    auto mapped = [&fn](double u, std::span<double> out) {
      const double z = std::sinh(u);
      fn.eval(std::span<const double>(&z, 1), out.first(1));
      out[0] = weighted(out[0], std::cosh(u));
    };
    std::vector<double> breaks{0.0};
    for (double z : fn.breakpoints) breaks.push_back(std::asinh(z));
    Adaptive1D opts;
    opts.rel_tol = 1e-10;
    opts.max_intervals = 400 + 2 * static_cast<int>(breaks.size());
    return integrate_interval(mapped, 1, -u_max, u_max, opts, breaks).value[0];
  }
  if (fn.dim == 2) {
    Adaptive1D inner_opts;
    inner_opts.abs_tol = 1e-13;
    inner_opts.rel_tol = 1e-10;
    inner_opts.max_intervals = 200;
    Adaptive1D outer_opts;
    outer_opts.rel_tol = 1e-10;
    outer_opts.max_intervals = 200;
    const double zero = 0.0;
    auto outer = [&](double u1, std::span<double> out) {
      const double z1 = std::sinh(u1);
      const double w1 = std::cosh(u1);
      auto inner = [&](double u2, std::span<double> o) {
        const std::array<double, 2> z{z1, std::sinh(u2)};
        fn.eval(z, o.first(1));
        o[0] = weighted(o[0], std::cosh(u2));
      };
      const double v = integrate_interval(inner, 1, -u_max, u_max, inner_opts,
                                          std::span<const double>(&zero, 1))
                           .value[0];
      out[0] = weighted(v, w1);
    };
    return integrate_interval(outer, 1, -u_max, u_max, outer_opts,
                              std::span<const double>(&zero, 1))
        .value[0];
  }
  const int level = std::max(1, 6 - fn.dim);
  return tensor_sum(fn, sinh_rule(level, u_max), true)[0];
}

}  // namespace

Integrand scalar_1d(std::function<double(double)> fn, DecayHint decay) {
  Integrand in;
  in.dim = 1;
  in.components = 1;
  in.decay = decay;
  in.eval = [fn = std::move(fn)](std::span<const double> z, std::span<double> out) {
    out[0] = fn(z[0]);
  };
  return in;
}

std::string scheme_name(const Scheme& scheme) {
  return std::visit(
      [](const auto& s) -> std::string {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Adaptive1D>) {
          return "adaptive_1d";
        } else if constexpr (std::is_same_v<S, TensorProduct>) {
          return "tensor_product(" + std::to_string(s.level) + ")";
        } else {
          return "monte_carlo(" + std::to_string(s.n) + "," +
                 std::to_string(s.seed) + ")";
        }
      },
      scheme);
}

Scheme default_scheme(int dim) {
  if (dim == 1) return Adaptive1D{};
  if (dim == 2) return TensorProduct{6};
  if (dim == 3) return TensorProduct{4};
  return MonteCarlo{};
}

double QuadResult::max_error() const {
  double m = 0.0;
  for (double e : abs_error) m = std::max(m, e);
  return m;
}

IntervalResult integrate_interval(
    const std::function<void(double, std::span<double>)>& fn, int components,
    double a, double b, const Adaptive1D& opts,
    std::span<const double> breakpoints) {
  std::vector<double> cuts{a};
  for (double x : breakpoints) {
    if (x > a && x < b) cuts.push_back(x);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const auto d = static_cast<std::size_t>(components);
  std::priority_queue<Panel, std::vector<Panel>, PanelOrder> heap;
  std::vector<Panel> done;  // panels too narrow to split
  IntervalResult r;
  r.value.assign(d, 0.0);
  r.abs_error.assign(d, 0.0);

  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    heap.push(gk21(fn, components, cuts[i], cuts[i + 1]));
    r.nodes_used += 21;
  }

  auto totals = [&](std::vector<double>& value, std::vector<double>& err,
                    double& total_err, bool& finite) {
    std::fill(value.begin(), value.end(), 0.0);
    std::fill(err.begin(), err.end(), 0.0);
    total_err = 0.0;
    finite = true;
    auto add = [&](const Panel& p) {
      for (std::size_t c = 0; c < d; ++c) {
        value[c] += p.value[c];
        err[c] += p.error[c];
      }
      total_err += p.max_err;
      finite = finite && p.finite;
    };
    auto copy = heap;
    while (!copy.empty()) {
      add(copy.top());
      copy.pop();
    }
    for (const Panel& p : done) add(p);
  };

  double total_err = 0.0;
  bool finite = true;
  int panels = static_cast<int>(heap.size());
  // Running sums; recomputed exactly at exit.
  std::vector<double> running(d, 0.0);
  for (auto copy = heap; !copy.empty(); copy.pop()) {
    total_err += copy.top().max_err;
    for (std::size_t c = 0; c < d; ++c) running[c] += copy.top().value[c];
  }

  while (!heap.empty()) {
    double magnitude = 0.0;
    for (double v : running) magnitude = std::max(magnitude, std::abs(v));
    const double target = std::max(opts.abs_tol, opts.rel_tol * magnitude);
    if (std::isfinite(total_err) && total_err <= target) break;
    if (panels >= opts.max_intervals) break;
    Panel worst = heap.top();
    if (!worst.finite) break;
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const double width = worst.b - worst.a;
    if (width <= 1e-14 * (1.0 + std::abs(mid))) {
      total_err -= worst.max_err;
      done.push_back(std::move(worst));
      if (heap.empty()) break;
      continue;
    }
    Panel left = gk21(fn, components, worst.a, mid);
    Panel right = gk21(fn, components, mid, worst.b);
    r.nodes_used += 42;
    ++panels;
    total_err += left.max_err + right.max_err - worst.max_err;
    for (std::size_t c = 0; c < d; ++c) {
      running[c] += left.value[c] + right.value[c] - worst.value[c];
    }
    heap.push(std::move(left));
    heap.push(std::move(right));
  }

  totals(r.value, r.abs_error, total_err, finite);
  double magnitude = 0.0;
  for (double v : r.value) magnitude = std::max(magnitude, std::abs(v));
  const double target = std::max(opts.abs_tol, opts.rel_tol * magnitude);
  r.converged = finite && total_err <= target * (1.0 + 1e-9);
  if (!finite) {
    for (double& v : r.value) {
      if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
    }
  }
  return r;
}

QuadResult integrate(const Integrand& fn, const Scheme& scheme) {
  return dispatch(fn, scheme, true);
}

QuadResult integrate_serial(const Integrand& fn, const Scheme& scheme) {
  return dispatch(fn, scheme, false);
}

std::span<const double> default_probe_radii() {
  static constexpr std::array<double, 10> kRadii = {
      50.0, 100.0, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9, 1e10};
  return kRadii;
}

ProbeResult probe_divergence(const Integrand& fn, std::span<const double> radii) {
  if (radii.size() < 2) throw InputError("probe_divergence: need at least two radii");
  if (fn.components != 1) throw InputError("probe_divergence: scalar integrand required");
  ProbeResult res;
  res.radii.assign(radii.begin(), radii.end());
  for (double r : radii) {
    const double v = cube_integral(fn, r);
    res.partials.push_back(v);
    if (!std::isfinite(v)) {
      res.convergent = false;
      res.value = std::numeric_limits<double>::infinity();
      res.last_relative_increment = std::numeric_limits<double>::infinity();
      return res;
    }
  }
  const std::size_t n = res.partials.size();
  const double last = res.partials[n - 1];
  const double prev = res.partials[n - 2];
  res.value = last;
  const double scale = std::abs(last);
  res.last_relative_increment =
      scale > 0.0 ? std::abs(last - prev) / scale : std::abs(last - prev);
  res.convergent = radii[n - 2] >= kProbeMinRadius &&
                   res.last_relative_increment <= kProbeRelIncrement;
  return res;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace skewinfo::quad
