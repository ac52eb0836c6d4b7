#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "skewinfo/density.hpp"
#include "skewinfo/quad.hpp"

namespace skewinfo {

enum class InfoKind { reduced, full };

/// ℓ at δ = 0: location block ℓ¹ = Σ^{-1/2} φ_f(z), scatter block
/// ℓ² = P_k (Σ^{-1/2} ⊗ I_k) vec(z φ_f(z)' - I_k), skewness block ℓ³ = 2 ψ(z).
struct ScoreVector {
  Eigen::VectorXd loc;
  Eigen::VectorXd scatter;  // empty for InfoKind::reduced
  Eigen::VectorXd skew;

  Eigen::VectorXd stacked() const;
};

/// Throws ContractError unless δ = 0 exactly.
ScoreVector score_at_symmetry(const SkewModel& model, std::span<const double> x,
                              InfoKind which);

inline int vech_size(int k) { return k * (k + 1) / 2; }
inline int info_size(int k, InfoKind kind) {
  return kind == InfoKind::reduced ? 2 * k : k * (k + 5) / 2;
}

/// Column-stacked vec.
Eigen::VectorXd vec(const Eigen::MatrixXd& m);
/// Upper triangle stacked column-wise: (m11, m12, m22, m13, m23, m33, ...).
Eigen::VectorXd vech(const Eigen::MatrixXd& m);
/// P_k with P_k' vech(M) = vec(M) for symmetric M.
Eigen::MatrixXd duplication_matrix(int k);

/// A numerically checked integrability condition.
struct AssumptionCheck {
  std::string name;      // e.g. "(A1)", "(B2⁺)"
  std::string quantity;  // e.g. "I_f"
  bool finite = false;
  double value = 0.0;
  double last_relative_increment = 0.0;
};

/// Assumption labels: (A·) for k = 1, (B·) for k >= 2.
std::string assumption_location(int k);    // I_f finite
std::string assumption_skewness(int k);    // ∫ψψ'f finite
std::string assumption_scatter(int k);     // J_f finite

struct InfoMatrix {
  InfoKind kind = InfoKind::reduced;
  int k = 1;
  Eigen::MatrixXd gamma;
  Eigen::MatrixXd err;
  ThetaPoint theta0;
  std::string scheme;
  std::vector<AssumptionCheck> assumptions;

  int size() const { return static_cast<int>(gamma.rows()); }
  int loc_offset() const { return 0; }
  int scatter_offset() const { return k; }
  int skew_offset() const { return kind == InfoKind::reduced ? k : k + vech_size(k); }
  /// Row labels: "loc1", ..., "scatter11", "scatter12", ..., "skew1", ...
  std::vector<std::string> labels() const;
  /// Block name of a row: "1", "2" or "3".
  std::string block_of(int row) const;
  /// The (location, skewness) sub-matrix; identity for reduced matrices.
  InfoMatrix reduced() const;
};

/// Gram matrix G = ∫ u u' f of u = (φ_f, [vec(zφ_f' - I)], ψ) at standard
/// coordinates, with per-entry error estimates.
struct ScoreGram {
  Eigen::MatrixXd value;
  Eigen::MatrixXd err;
  std::string scheme;
};
ScoreGram score_gram(const SymmetricKernel& kernel, const SkewingFunction& skewer,
                     bool with_scatter, const std::optional<quad::Scheme>& scheme = {});

/// Probes each integral the requested information needs. Either returns the
/// checks (all finite) or throws AssumptionViolation for the first failure.
std::vector<AssumptionCheck> check_assumptions(const SymmetricKernel& kernel,
                                               const SkewingFunction& skewer,
                                               InfoKind which);

/// Fisher information at ϑ0 = (μ, Σ^{1/2}, 0). Throws ContractError when the
/// model's δ is not zero and AssumptionViolation when a required integral
/// diverges.
InfoMatrix information(const SkewModel& model, InfoKind which,
                       const std::optional<quad::Scheme>& scheme = {});

struct RankReport {
  int dim = 0;
  int rank = 0;
  int nullity = 0;
  std::vector<double> singular_values;  // descending
  double tolerance = 0.0;
  bool indeterminate = false;
  /// Orthonormal columns spanning the numerical null space.
  Eigen::MatrixXd null_basis;
  /// Split of null_basis over the location and skewness blocks (reduced only).
  Eigen::MatrixXd V;
  Eigen::MatrixXd W;
};

/// rank = #{s_i > τ}, τ = max(1e-7 s_max, 10 max err). Indeterminate when some
/// s_i lies within a factor 10 of τ.
RankReport rank_diagnosis(const InfoMatrix& info);
RankReport rank_diagnosis(const Eigen::MatrixXd& gamma, double max_err, int k,
                          bool split);

/// Coefficients of the a.e. relation V_rel' φ_f = W_rel' ψ implied by the
/// null vectors of the reduced information at Σ^{1/2}:
/// V_rel = Σ^{-1/2} V, W_rel = -2 W.
struct NullRelation {
  Eigen::MatrixXd V;
  Eigen::MatrixXd W;
};
NullRelation null_relation(const RankReport& report, const Eigen::MatrixXd& sigma_half);

/// ∫ ||V' φ_f - W' ψ||² f dz.
double null_relation_residual(const SymmetricKernel& kernel, const SkewingFunction& skewer,
                              const NullRelation& rel,
                              const std::optional<quad::Scheme>& scheme = {});

/// (1/n) Σ ℓ(x_i) ℓ(x_i)' over exact draws at the model's ϑ0, with entrywise
/// standard errors.
struct EmpiricalInfo {
  Eigen::MatrixXd gamma;
  Eigen::MatrixXd std_error;
  std::size_t n = 0;
};
EmpiricalInfo empirical_information(const SkewModel& model, InfoKind which, std::size_t n,
                                    std::uint64_t seed);
EmpiricalInfo empirical_information_serial(const SkewModel& model, InfoKind which,
                                           std::size_t n, std::uint64_t seed);

}  // namespace skewinfo
