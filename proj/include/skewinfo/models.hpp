#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skewinfo/rng.hpp"

namespace skewinfo {

enum class StandardizationRule { unit_variance, median_of_squares };

std::string_view rule_name(StandardizationRule rule);
StandardizationRule parse_rule(std::string_view name);

/// Univariate Π: R -> [0, 1] with Π(-y) + Π(y) = 1. The slope Π̇(0) is stored
/// explicitly so every skewer can use it without differentiating.
class OuterCdf {
 public:
  enum class Kind { normal, logistic, student };

  static OuterCdf normal();
  static OuterCdf logistic();
  static OuterCdf student(double nu);

  double operator()(double y) const;
  double slope_at_zero() const { return slope_; }
  Kind kind() const { return kind_; }
  double nu() const { return nu_; }
  std::string name() const;

 private:
  OuterCdf(Kind kind, double nu, double slope)
      : kind_(kind), nu_(nu), slope_(slope) {}
  Kind kind_;
  double nu_;
  double slope_;
};

enum class KernelFamily {
  gaussian,
  student,
  laplace,
  logistic,
  exponential_power,
  bumped_cauchy,
  product,
  exp_of_neg_psi,
};

std::string_view family_name(KernelFamily family);

class SkewingFunction;
class SymmetricKernel;

namespace detail {
class UnivariateShapeImpl;
class KernelImpl;
class SkewerImpl;
}  // namespace detail

/// A one-dimensional centrally symmetric density at its raw scale.
class UnivariateShape {
 public:
  static UnivariateShape gaussian();
  static UnivariateShape student(double nu);
  static UnivariateShape laplace();
  static UnivariateShape logistic();
  /// c exp(-|x|^alpha / alpha).
  static UnivariateShape exponential_power(double alpha);
  /// c exp(eps b(x)) / (1 + x^2) with b a sum of unit Gaussian bumps at
  /// ±2^n, n = 1..40. Cauchy tails whose score does not decay on the bumps.
  static UnivariateShape bumped_cauchy(double eps);
  /// exp(-a Psi(x)) / C for a one-dimensional skewer's primitive Psi.
  static UnivariateShape exp_of_neg_psi(double a, const SkewingFunction& skewer);

  KernelFamily family() const;
  double parameter() const;
  std::string name() const;
  double log_density(double x) const;
  /// -d/dx log f.
  double score(double x) const;
  bool can_sample() const;
  double sample(CounterRng& rng) const;
  /// The skewer whose primitive defines an exp_of_neg_psi shape, else null.
  const SkewingFunction* psi_source() const;
  /// Locations of narrow features, for quadrature panel splitting.
  std::vector<double> breakpoints() const;

 private:
  explicit UnivariateShape(std::shared_ptr<const detail::UnivariateShapeImpl> impl)
      : impl_(std::move(impl)) {}
  std::shared_ptr<const detail::UnivariateShapeImpl> impl_;
};

/// A kernel family with a free scale: the input of `standardize`.
struct KernelShape {
  enum class Layout { univariate, product, spherical };

  Layout layout = Layout::univariate;
  int dim = 1;
  /// univariate: one shape; product: one per coordinate; spherical: the
  /// one-dimensional marginal (gaussian or student).
  std::vector<UnivariateShape> components;
  /// Scale already applied before calibration, one per calibrated component.
  std::vector<double> base_scale;

  static KernelShape univariate(UnivariateShape shape);
  static KernelShape product(std::vector<UnivariateShape> shapes);
  static KernelShape spherical_gaussian(int dim);
  static KernelShape spherical_student(double nu, int dim);

  KernelFamily family() const;
};

/// Standardized symmetric kernel f with score φ_f = -∇f / f.
class SymmetricKernel {
 public:
  int dim() const;
  KernelFamily family() const;
  StandardizationRule rule() const;
  const KernelShape& shape() const;
  /// Final per-component scale (base scale times calibration).
  std::span<const double> scales() const;
  /// Multiplier found by standardize relative to the shape's base scale.
  std::span<const double> calibration() const;
  std::string description() const;

  double log_density(std::span<const double> z) const;
  double density(std::span<const double> z) const;
  void score(std::span<const double> z, std::span<double> out) const;
  /// Feature locations in z (one-dimensional kernels only).
  std::vector<double> breakpoints() const;

  bool can_sample() const;
  /// Throws CapabilityError when the family has no sampler.
  void sample(CounterRng& rng, std::span<double> out) const;

  /// The same family with the current scales as base: re-standardizing it
  /// under the same rule yields calibration 1.
  KernelShape free_scale() const;

 private:
  friend SymmetricKernel standardize(const KernelShape&, StandardizationRule);
  friend SymmetricKernel with_scales(const KernelShape&, StandardizationRule,
                                     std::vector<double>);
  explicit SymmetricKernel(std::shared_ptr<const detail::KernelImpl> impl)
      : impl_(std::move(impl)) {}
  std::shared_ptr<const detail::KernelImpl> impl_;
};

/// Calibrates the scale so that the rule's integral equation holds to 1e-10
/// (bracketing root finder over quadrature values). Throws
/// StandardizationInfeasible when the constraint cannot be met.
SymmetricKernel standardize(const KernelShape& shape, StandardizationRule rule);

/// Builds a kernel with explicitly given calibration multipliers (used when
/// reloading a previously standardized kernel).
SymmetricKernel with_scales(const KernelShape& shape, StandardizationRule rule,
                            std::vector<double> calibration);

struct KernelEval {
  double density = 0.0;
  double log_density = 0.0;
  std::vector<double> score;
};

/// Throws InputError on non-finite input or a dimension mismatch.
KernelEval kernel_eval(const SymmetricKernel& kernel, std::span<const double> z);

namespace kernels {
SymmetricKernel gaussian(int dim = 1,
                         StandardizationRule rule = StandardizationRule::unit_variance);
SymmetricKernel student(double nu, int dim = 1,
                        StandardizationRule rule = StandardizationRule::unit_variance);
SymmetricKernel laplace(StandardizationRule rule = StandardizationRule::unit_variance);
SymmetricKernel logistic(StandardizationRule rule = StandardizationRule::unit_variance);
SymmetricKernel exponential_power(
    double alpha, StandardizationRule rule = StandardizationRule::unit_variance);
SymmetricKernel bumped_cauchy(
    double eps, StandardizationRule rule = StandardizationRule::median_of_squares);
SymmetricKernel product(std::vector<UnivariateShape> shapes,
                        StandardizationRule rule = StandardizationRule::unit_variance);
SymmetricKernel exp_of_neg_psi(double a, const SkewingFunction& skewer,
                               StandardizationRule rule = StandardizationRule::unit_variance);
}  // namespace kernels

enum class SkewerFamily { linear, power, t_type, sine, score_composed };

std::string_view skewer_family_name(SkewerFamily family);

/// Skewing function of the form Π(z, δ) = outer(δ' h(z)) with odd index map
/// h. Its δ-gradient at 0 is ψ(z) = Π̇(0) h(z) and `primitive` is Ψ with
/// ∇Ψ = ψ.
///
/// Additive constants of Ψ: linear and power have Ψ(0) = 0; t_type keeps
/// Π̇(0) (ν + k)^{1/2} (z'z + ν)^{1/2}; sine keeps -Π̇(0) Σ cos z_i;
/// score_composed is shifted so that Ψ(0) = 0.
class SkewingFunction {
 public:
  static SkewingFunction linear(int dim, OuterCdf outer = OuterCdf::normal());
  /// One-dimensional, alpha > 1: h(z) = sign(z) |z|^{alpha/2} (2/alpha)^{1/2}.
  static SkewingFunction power(double alpha, OuterCdf outer = OuterCdf::normal());
  static SkewingFunction t_type(int dim, double nu, OuterCdf outer = OuterCdf::normal());
  static SkewingFunction sine(int dim, OuterCdf outer = OuterCdf::normal());
  /// h = φ_f, so that Π_f(z, δ) = outer(δ' φ_f(z)).
  static SkewingFunction score_composed(const SymmetricKernel& kernel,
                                        OuterCdf outer = OuterCdf::normal());

  int dim() const;
  SkewerFamily family() const;
  const OuterCdf& outer() const;
  /// alpha for power, ν for t_type, 0 otherwise.
  double parameter() const;
  std::string description() const;
  const SymmetricKernel* composed_kernel() const;

  double value(std::span<const double> z, std::span<const double> delta) const;
  void index(std::span<const double> z, std::span<double> out) const;
  void delta_gradient(std::span<const double> z, std::span<double> out) const;
  double primitive(std::span<const double> z) const;

 private:
  explicit SkewingFunction(std::shared_ptr<const detail::SkewerImpl> impl)
      : impl_(std::move(impl)) {}
  std::shared_ptr<const detail::SkewerImpl> impl_;
};

struct SkewerEval {
  double pi = 0.5;
  std::vector<double> psi;
  double primitive = 0.0;
};

/// Throws InputError on non-finite input or a dimension mismatch.
SkewerEval skewer_eval(const SkewingFunction& skewer, std::span<const double> z,
                       std::span<const double> delta);

}  // namespace skewinfo
