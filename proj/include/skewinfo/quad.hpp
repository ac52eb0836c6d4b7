#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "skewinfo/rng.hpp"

namespace skewinfo::quad {

enum class DecayHint { gaussian_like, heavy_tail, exponential_like };

/// Sampling envelope for importance-sampled Monte Carlo: `sample` draws a
/// point from a density whose log is `log_density`.
struct Envelope {
  std::function<void(CounterRng&, std::span<double>)> sample;
  std::function<double(std::span<const double>)> log_density;
};

/// A (possibly vector-valued) function on R^dim. `eval` writes `components`
/// values into its output span.
struct Integrand {
  int dim = 1;
  int components = 1;
  std::function<void(std::span<const double> z, std::span<double> out)> eval;
  DecayHint decay = DecayHint::gaussian_like;
  double tail_index = 0.0;  // ν for heavy_tail
  std::optional<Envelope> envelope;
  /// Known narrow features of a one-dimensional integrand (z coordinates);
  /// the adaptive rule and the divergence probe split their panels there.
  std::vector<double> breakpoints;
};

/// Wraps a scalar function of one variable.
Integrand scalar_1d(std::function<double(double)> fn,
                    DecayHint decay = DecayHint::gaussian_like);

struct Adaptive1D {
  double abs_tol = 1e-12;
  double rel_tol = 0.0;
  int max_intervals = 2000;
};

/// Composite Gauss-Legendre on 2^level panels per coordinate of the mapped
/// cube (-1, 1)^k. The error is |Q(level) - Q(level - 1)|.
struct TensorProduct {
  int level = 6;
};

struct MonteCarlo {
  std::size_t n = 200000;
  std::uint64_t seed = 1;
};

using Scheme = std::variant<Adaptive1D, TensorProduct, MonteCarlo>;

std::string scheme_name(const Scheme& scheme);

/// Adaptive for k = 1, tensor product for k <= 3, Monte Carlo above.
Scheme default_scheme(int dim);

struct QuadResult {
  std::vector<double> value;
  std::vector<double> abs_error;
  std::size_t nodes_used = 0;
  std::string scheme;
  bool divergent = false;

  double scalar() const { return value.at(0); }
  double scalar_error() const { return abs_error.at(0); }
  double max_error() const;
};

/// Integrates over R^dim. Infinite coordinates are mapped with
/// z = t / (1 - t^2), t in (-1, 1). Throws QuadratureBudgetError when the
/// adaptive budget is exhausted, InputError on a dimension mismatch.
QuadResult integrate(const Integrand& fn, const Scheme& scheme);

/// Same contract as `integrate`, single-threaded. Tensor product and Monte
/// Carlo results are bit-identical to the parallel path.
QuadResult integrate_serial(const Integrand& fn, const Scheme& scheme);

/// Adaptive Gauss-Kronrod on a finite interval [a, b]. Never throws on budget
/// exhaustion; `converged` reports whether the error target was met.
struct IntervalResult {
  std::vector<double> value;
  std::vector<double> abs_error;
  std::size_t nodes_used = 0;
  bool converged = true;
};
IntervalResult integrate_interval(
    const std::function<void(double, std::span<double>)>& fn, int components,
    double a, double b, const Adaptive1D& opts = {},
    std::span<const double> breakpoints = {});

struct ProbeResult {
  bool convergent = false;
  double value = 0.0;  // partial integral at the largest radius
  std::vector<double> radii;
  std::vector<double> partials;
  double last_relative_increment = 0.0;
};

/// Fixed probe constants, recorded in reports.
inline constexpr double kProbeMinRadius = 50.0;
inline constexpr double kProbeRelIncrement = 1e-6;
std::span<const double> default_probe_radii();

/// Partial integrals of a nonnegative scalar integrand over the cubes
/// [-R, R]^dim. Divergent when the relative increment between the last two
/// radii (both >= 50) exceeds 1e-6, or a partial integral is not finite.
ProbeResult probe_divergence(const Integrand& fn,
                             std::span<const double> radii = default_probe_radii());

/// Pairwise (cascade) summation; fixed association order.
double pairwise_sum(std::span<const double> values);

}  // namespace skewinfo::quad
