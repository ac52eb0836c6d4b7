#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "skewinfo/fisher.hpp"
#include "skewinfo/models.hpp"

namespace skewinfo {

/// ±logspace(1e-2, 1e2), 25 points per sign, ascending.
std::vector<double> default_a_grid();

struct NaturalSpacePoint {
  double a = 0.0;
  bool convergent = false;
  double normalizer = 0.0;  // ∫ exp(-a (Ψ - Ψ(0))) when convergent
};

/// Convergence map of a -> ∫ exp(-a Ψ). Ψ is shifted by Ψ(0) before
/// exponentiation, which leaves convergence unchanged.
struct NaturalSpace {
  std::vector<NaturalSpacePoint> points;
  /// Points where convergence flips between neighbouring grid values,
  /// refined by bisection.
  std::vector<double> boundaries;

  bool empty() const;
  /// "empty", "positive", "negative", "all" or "mixed".
  std::string pattern() const;
  std::size_t divergent_count() const;
};

NaturalSpace natural_space(const SkewingFunction& skewer,
                           std::span<const double> a_grid = {});

/// a_Π: the natural parameter whose exp(-a Ψ) density already satisfies the
/// rule. None when the natural space is empty or the constraint has no root
/// on the grid; AmbiguityError when it has several. One-dimensional skewers
/// only.
std::optional<double> solve_a(const SkewingFunction& skewer, StandardizationRule rule);

/// Normalized constraint at a: variance - 1 (unit_variance) or
/// F_a(1) - 0.75 (median_of_squares). NaN outside the natural space.
double a_constraint(const SkewingFunction& skewer, StandardizationRule rule, double a);

struct SingularityPrediction {
  int m = 0;
  bool indeterminate = false;
  ScoreGram gram;
  RankReport gram_rank;
  /// Relation V' φ_f = W' ψ in standardized coordinates.
  Eigen::MatrixXd V;
  Eigen::MatrixXd W;
  /// Sum of the m smallest eigenvalues of the Gram matrix.
  double residual = 0.0;
  /// k = 1, m = 1: a = E[φψ] / E[ψ²] and the re-standardized exp(-a Ψ).
  std::optional<double> a;
  std::optional<SymmetricKernel> matched_density;
  std::optional<double> log_match_sup;  // sup over [-4, 4] of |log f - log g|
  bool matched = false;                 // log_match_sup < 1e-6

  bool singular() const { return m >= 1; }
  std::string verdict() const;
};

SingularityPrediction predict_singularity(const SymmetricKernel& kernel,
                                          const SkewingFunction& skewer);

struct ContextFit {
  std::vector<double> context;  // y_{m+1..k}
  double a = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // max |log f - (c - a Ψ)| over the free grid
};

struct VerificationRecord {
  int m_numeric = 0;
  int m_predicted = 0;
  bool indeterminate = false;
  bool agree = false;
  Eigen::MatrixXd O;  // rows: basis of y = O z
  std::vector<ContextFit> fits;
  double max_fit_residual = 0.0;
  double a_spread = 0.0;  // max - min of a over contexts
  bool fits_ok = true;
  /// Constructed exponential-family kernels must show nullity >= 1.
  bool converse_ok = true;
  std::string grid;
  bool passed = false;
  std::string message;
};

/// Checks the numeric rank of the reduced information against the analytic
/// prediction and, when singular, fits the conditional exponential-family
/// form in every conditioning context.
VerificationRecord verify_proposition(const SymmetricKernel& kernel,
                                      const SkewingFunction& skewer,
                                      const RankReport& report,
                                      const Eigen::MatrixXd& sigma_half);

/// The kernel g_{a_Π} whose pairing with `skewer` is singular, standardized
/// under `rule`. CapabilityError "no degenerate kernel exists for this
/// skewer" when none can be built.
SymmetricKernel construct_degenerate(const SkewingFunction& skewer, StandardizationRule rule);

}  // namespace skewinfo
