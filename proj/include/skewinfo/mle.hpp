#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "skewinfo/density.hpp"

namespace skewinfo {

struct FitOptions {
  int max_iterations = 4000;   // per simplex run
  double size_tol = 1e-7;      // simplex size at convergence
  bool restarts = true;        // extra starts at δ = ±0.5
};

struct FitResult {
  ThetaPoint theta_hat;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  /// sqrt(diag(H^{-1})) of the negative log-likelihood over
  /// (μ, vech Σ^{1/2}, δ); empty when the curvature is singular at the fit.
  std::vector<double> stderr_proxy;
  bool curvature_singular = false;
};

/// Number of free parameters k(k+5)/2.
int theta_dim(int k);

double log_likelihood(const SkewModel& model, std::span<const double> data);

/// Maximum likelihood over (μ, Σ^{1/2} = expm(L), δ) by Nelder-Mead.
/// `data` is row-major n × k. Throws InputError when n < 10 k(k+5)/2, the data
/// are not finite or a coordinate has zero variance.
FitResult fit(const SymmetricKernel& kernel, const SkewingFunction& skewer,
              std::span<const double> data, const std::optional<ThetaPoint>& init = {},
              const FitOptions& opts = {});

struct ExperimentSummary {
  std::size_t replicates = 0;
  std::size_t n_per_replicate = 0;
  std::uint64_t seed = 0;
  std::vector<double> delta_hats;  // first coordinate of δ̂ per replicate
  std::vector<bool> failed;        // replicate fit threw or did not converge
  /// Both statistics use the replicates that did not fail.
  double bimodality_coefficient = 0.0;
  double sign_split = 0.0;
};

/// (m3² + 1) / m4 of the standardized values.
double bimodality_coefficient(std::span<const double> values);

/// R fits on fresh samples drawn at `theta_true` (δ = 0). Replicate r uses
/// seed derive_seed(seed, r); results do not depend on the thread count.
ExperimentSummary symmetry_experiment(const SymmetricKernel& kernel,
                                      const SkewingFunction& skewer,
                                      const ThetaPoint& theta_true, std::size_t n,
                                      std::size_t replicates, std::uint64_t seed,
                                      const FitOptions& opts = {});

}  // namespace skewinfo
