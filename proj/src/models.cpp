#include "skewinfo/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include "skewinfo/errors.hpp"
#include "skewinfo/quad.hpp"

namespace skewinfo {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void require_finite(std::span<const double> z, const char* what) {
  for (double v : z) {
    if (!std::isfinite(v)) throw InputError(std::string(what) + ": non-finite input");
  }
}

std::string num(double v) { return fmt::format("{:g}", v); }

}  // namespace

// ---------------------------------------------------------------------------
// Rules and outer cdfs

std::string_view rule_name(StandardizationRule rule) {
  switch (rule) {
    case StandardizationRule::unit_variance:
      return "unit_variance";
    case StandardizationRule::median_of_squares:
      return "median_of_squares";
  }
  return "?";
}

StandardizationRule parse_rule(std::string_view name) {
  if (name == "unit_variance") return StandardizationRule::unit_variance;
  if (name == "median_of_squares") return StandardizationRule::median_of_squares;
  throw InputError("unknown standardization rule '" + std::string(name) + "'");
}

OuterCdf OuterCdf::normal() {
  return OuterCdf(Kind::normal, 0.0, 1.0 / std::sqrt(2.0 * std::numbers::pi));
}

OuterCdf OuterCdf::logistic() { return OuterCdf(Kind::logistic, 0.0, 0.25); }

OuterCdf OuterCdf::student(double nu) {
  if (!(nu > 0.0)) throw InputError("student outer cdf: nu must be positive");
  const double slope = std::exp(std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                                0.5 * std::log(nu * std::numbers::pi));
  return OuterCdf(Kind::student, nu, slope);
}

double OuterCdf::operator()(double y) const {
  switch (kind_) {
    case Kind::normal:
      return 0.5 * std::erfc(-y * std::numbers::sqrt2 * 0.5);
    case Kind::logistic:
      if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
      return std::exp(y) / (1.0 + std::exp(y));
    case Kind::student: {
      const boost::math::students_t dist(nu_);
      if (y >= 0.0) return boost::math::cdf(dist, y);
      return boost::math::cdf(boost::math::complement(dist, -y));
    }
  }
  return 0.5;
}

std::string OuterCdf::name() const {
  switch (kind_) {
    case Kind::normal:
      return "normal";
    case Kind::logistic:
      return "logistic";
    case Kind::student:
      return "student(" + num(nu_) + ")";
  }
  return "?";
}

std::string_view family_name(KernelFamily family) {
  switch (family) {
    case KernelFamily::gaussian:
      return "gaussian";
    case KernelFamily::student:
      return "student";
    case KernelFamily::laplace:
      return "laplace";
    case KernelFamily::logistic:
      return "logistic";
    case KernelFamily::exponential_power:
      return "exponential_power";
    case KernelFamily::bumped_cauchy:
      return "bumped_cauchy";
    case KernelFamily::product:
      return "product";
    case KernelFamily::exp_of_neg_psi:
      return "exp_of_neg_psi";
  }
  return "?";
}

std::string_view skewer_family_name(SkewerFamily family) {
  switch (family) {
    case SkewerFamily::linear:
      return "linear";
    case SkewerFamily::power:
      return "power";
    case SkewerFamily::t_type:
      return "t_type";
    case SkewerFamily::sine:
      return "sine";
    case SkewerFamily::score_composed:
      return "score_composed";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Skewers

namespace detail {

class SkewerImpl {
 public:
  SkewerImpl(int dim, OuterCdf outer) : dim_(dim), outer_(outer) {}
  virtual ~SkewerImpl() = default;
  virtual SkewerFamily family() const = 0;
  virtual double parameter() const { return 0.0; }
  virtual void index(std::span<const double> z, std::span<double> out) const = 0;
  /// Ψ without the Π̇(0) factor.
  virtual double primitive_unit(std::span<const double> z) const = 0;
  virtual const SymmetricKernel* kernel() const { return nullptr; }

  int dim() const { return dim_; }
  const OuterCdf& outer() const { return outer_; }

 private:
  int dim_;
  OuterCdf outer_;
};

namespace {

class LinearSkewer final : public SkewerImpl {
 public:
  using SkewerImpl::SkewerImpl;
  SkewerFamily family() const override { return SkewerFamily::linear; }
  void index(std::span<const double> z, std::span<double> out) const override {
    std::copy(z.begin(), z.end(), out.begin());
  }
  double primitive_unit(std::span<const double> z) const override {
    double s = 0.0;
    for (double v : z) s += v * v;
    return 0.5 * s;
  }
};

class PowerSkewer final : public SkewerImpl {
 public:
  PowerSkewer(double alpha, OuterCdf outer)
      : SkewerImpl(1, outer), alpha_(alpha), coef_(std::sqrt(2.0 / alpha)) {}
  SkewerFamily family() const override { return SkewerFamily::power; }
  double parameter() const override { return alpha_; }
  void index(std::span<const double> z, std::span<double> out) const override {
    out[0] = sign(z[0]) * std::pow(std::abs(z[0]), 0.5 * alpha_) * coef_;
  }
  double primitive_unit(std::span<const double> z) const override {
    const double p = 0.5 * alpha_ + 1.0;
    return std::pow(std::abs(z[0]), p) * coef_ / p;
  }

 private:
  double alpha_;
  double coef_;
};

class TTypeSkewer final : public SkewerImpl {
 public:
  TTypeSkewer(int dim, double nu, OuterCdf outer)
      : SkewerImpl(dim, outer), nu_(nu), root_(std::sqrt(nu + dim)) {}
  SkewerFamily family() const override { return SkewerFamily::t_type; }
  double parameter() const override { return nu_; }
  void index(std::span<const double> z, std::span<double> out) const override {
    double r2 = 0.0;
    for (double v : z) r2 += v * v;
    const double f = root_ / std::sqrt(r2 + nu_);
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * f;
  }
  double primitive_unit(std::span<const double> z) const override {
    double r2 = 0.0;
    for (double v : z) r2 += v * v;
    return root_ * std::sqrt(r2 + nu_);
  }

 private:
  double nu_;
  double root_;
};

class SineSkewer final : public SkewerImpl {
 public:
  using SkewerImpl::SkewerImpl;
  SkewerFamily family() const override { return SkewerFamily::sine; }
  void index(std::span<const double> z, std::span<double> out) const override {
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::sin(z[i]);
  }
  double primitive_unit(std::span<const double> z) const override {
    double s = 0.0;
    for (double v : z) s -= std::cos(v);
    return s;
  }
};

class ScoreComposedSkewer final : public SkewerImpl {
 public:
  ScoreComposedSkewer(SymmetricKernel kernel, OuterCdf outer)
      : SkewerImpl(kernel.dim(), outer), kernel_(std::move(kernel)) {
    const std::vector<double> zero(static_cast<std::size_t>(dim()), 0.0);
    log_f0_ = kernel_.log_density(zero);
  }
  SkewerFamily family() const override { return SkewerFamily::score_composed; }
  void index(std::span<const double> z, std::span<double> out) const override {
    kernel_.score(z, out);
  }
  double primitive_unit(std::span<const double> z) const override {
    return log_f0_ - kernel_.log_density(z);
  }
  const SymmetricKernel* kernel() const override { return &kernel_; }

 private:
  SymmetricKernel kernel_;
  double log_f0_ = 0.0;
};

}  // namespace
}  // namespace detail

SkewingFunction SkewingFunction::linear(int dim, OuterCdf outer) {
  if (dim < 1) throw InputError("linear skewer: dimension must be >= 1");
  return SkewingFunction(std::make_shared<detail::LinearSkewer>(dim, outer));
}

SkewingFunction SkewingFunction::power(double alpha, OuterCdf outer) {
  if (!(alpha > 1.0)) throw InputError("power skewer: alpha must exceed 1");
  return SkewingFunction(std::make_shared<detail::PowerSkewer>(alpha, outer));
}

SkewingFunction SkewingFunction::t_type(int dim, double nu, OuterCdf outer) {
  if (dim < 1) throw InputError("t_type skewer: dimension must be >= 1");
  if (!(nu > 0.0)) throw InputError("t_type skewer: nu must be positive");
  return SkewingFunction(std::make_shared<detail::TTypeSkewer>(dim, nu, outer));
}

SkewingFunction SkewingFunction::sine(int dim, OuterCdf outer) {
  if (dim < 1) throw InputError("sine skewer: dimension must be >= 1");
  return SkewingFunction(std::make_shared<detail::SineSkewer>(dim, outer));
}

SkewingFunction SkewingFunction::score_composed(const SymmetricKernel& kernel,
                                                OuterCdf outer) {
  return SkewingFunction(std::make_shared<detail::ScoreComposedSkewer>(kernel, outer));
}

int SkewingFunction::dim() const { return impl_->dim(); }
SkewerFamily SkewingFunction::family() const { return impl_->family(); }
const OuterCdf& SkewingFunction::outer() const { return impl_->outer(); }
double SkewingFunction::parameter() const { return impl_->parameter(); }
const SymmetricKernel* SkewingFunction::composed_kernel() const {
  return impl_->kernel();
}

std::string SkewingFunction::description() const {
  std::string s(skewer_family_name(family()));
  switch (family()) {
    case SkewerFamily::power:
      s += "(alpha=" + num(parameter()) + ")";
      break;
    case SkewerFamily::t_type:
      s += "(nu=" + num(parameter()) + ")";
      break;
    case SkewerFamily::score_composed:
      s += "(" + impl_->kernel()->description() + ")";
      break;
    default:
      break;
  }
  if (dim() > 1) s += "^(" + std::to_string(dim()) + ")";
  return s + "[" + outer().name() + "]";
}

double SkewingFunction::value(std::span<const double> z,
                              std::span<const double> delta) const {
  const auto k = static_cast<std::size_t>(dim());
  double arg = 0.0;
  if (k == 1) {
    double h = 0.0;
    impl_->index(z, std::span<double>(&h, 1));
    arg = delta[0] * h;
  } else {
    std::vector<double> h(k);
    impl_->index(z, h);
    for (std::size_t i = 0; i < k; ++i) arg += delta[i] * h[i];
  }
  return impl_->outer()(arg);
}

void SkewingFunction::index(std::span<const double> z, std::span<double> out) const {
  impl_->index(z, out);
}

void SkewingFunction::delta_gradient(std::span<const double> z,
                                     std::span<double> out) const {
  impl_->index(z, out);
  const double slope = impl_->outer().slope_at_zero();
  for (double& v : out) v *= slope;
}

double SkewingFunction::primitive(std::span<const double> z) const {
  return impl_->outer().slope_at_zero() * impl_->primitive_unit(z);
}

SkewerEval skewer_eval(const SkewingFunction& skewer, std::span<const double> z,
                       std::span<const double> delta) {
  const auto k = static_cast<std::size_t>(skewer.dim());
  if (z.size() != k || delta.size() != k) {
    throw InputError("skewer_eval: dimension mismatch (skewer dim " +
                     std::to_string(k) + ")");
  }
  require_finite(z, "skewer_eval");
  require_finite(delta, "skewer_eval");
  SkewerEval e;
  e.pi = skewer.value(z, delta);
  e.psi.resize(k);
  skewer.delta_gradient(z, e.psi);
  e.primitive = skewer.primitive(z);
  return e;
}

// ---------------------------------------------------------------------------
// Univariate shapes

namespace detail {

class UnivariateShapeImpl {
 public:
  virtual ~UnivariateShapeImpl() = default;
  virtual KernelFamily family() const = 0;
  virtual double parameter() const { return 0.0; }
  virtual std::string name() const = 0;
  virtual double log_density(double x) const = 0;
  virtual double score(double x) const = 0;
  virtual bool can_sample() const { return true; }
  virtual double sample(CounterRng& rng) const = 0;
  virtual const SkewingFunction* psi_source() const { return nullptr; }
  virtual std::vector<double> breakpoints() const { return {}; }
};

namespace {

double random_sign(CounterRng& rng) { return rng.uniform() < 0.5 ? -1.0 : 1.0; }

class GaussianShape final : public UnivariateShapeImpl {
 public:
  KernelFamily family() const override { return KernelFamily::gaussian; }
  std::string name() const override { return "gaussian"; }
  double log_density(double x) const override { return -0.5 * x * x - kLogSqrt2Pi; }
  double score(double x) const override { return x; }
  double sample(CounterRng& rng) const override { return rng.normal(); }
};

class StudentShape final : public UnivariateShapeImpl {
 public:
  explicit StudentShape(double nu)
      : nu_(nu),
        log_norm_(std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                  0.5 * std::log(nu * std::numbers::pi)) {}
  KernelFamily family() const override { return KernelFamily::student; }
  double parameter() const override { return nu_; }
  std::string name() const override { return "student(" + num(nu_) + ")"; }
  double log_density(double x) const override {
    return log_norm_ - 0.5 * (nu_ + 1.0) * std::log1p(x * x / nu_);
  }
  double score(double x) const override { return (nu_ + 1.0) * x / (nu_ + x * x); }
  double sample(CounterRng& rng) const override {
    const double n = rng.normal();
    const double chi2 = 2.0 * rng.gamma(0.5 * nu_);
    return n / std::sqrt(chi2 / nu_);
  }

 private:
  double nu_;
  double log_norm_;
};

class LaplaceShape final : public UnivariateShapeImpl {
 public:
  KernelFamily family() const override { return KernelFamily::laplace; }
  std::string name() const override { return "laplace"; }
  double log_density(double x) const override { return -std::abs(x) - std::numbers::ln2; }
  double score(double x) const override { return sign(x); }
  double sample(CounterRng& rng) const override {
    const double e = -std::log(rng.uniform());
    return random_sign(rng) * e;
  }
};

class LogisticShape final : public UnivariateShapeImpl {
 public:
  KernelFamily family() const override { return KernelFamily::logistic; }
  std::string name() const override { return "logistic"; }
  double log_density(double x) const override {
    const double a = std::abs(x);
    return -a - 2.0 * std::log1p(std::exp(-a));
  }
  double score(double x) const override { return std::tanh(0.5 * x); }
  double sample(CounterRng& rng) const override {
    const double u = rng.uniform();
    return std::log(u / (1.0 - u));
  }
};

class ExponentialPowerShape final : public UnivariateShapeImpl {
 public:
  explicit ExponentialPowerShape(double alpha)
      : alpha_(alpha),
        log_norm_(-(std::numbers::ln2 + (1.0 / alpha - 1.0) * std::log(alpha) +
                    std::lgamma(1.0 / alpha))) {}
  KernelFamily family() const override { return KernelFamily::exponential_power; }
  double parameter() const override { return alpha_; }
  std::string name() const override { return "exponential_power(" + num(alpha_) + ")"; }
  double log_density(double x) const override {
    return log_norm_ - std::pow(std::abs(x), alpha_) / alpha_;
  }
  double score(double x) const override {
    return sign(x) * std::pow(std::abs(x), alpha_ - 1.0);
  }
  double sample(CounterRng& rng) const override {
    const double g = rng.gamma(1.0 / alpha_);
    return random_sign(rng) * std::pow(alpha_ * g, 1.0 / alpha_);
  }

 private:
  double alpha_;
  double log_norm_;
};

class BumpedCauchyShape final : public UnivariateShapeImpl {
 public:
  static constexpr int kBumps = 40;

  explicit BumpedCauchyShape(double eps) : eps_(eps) {
    log_norm_ = 0.0;
    quad::Integrand in = quad::scalar_1d([this](double x) { return std::exp(log_density(x)); });
    in.breakpoints = breakpoints();
    quad::Adaptive1D opts;
    opts.rel_tol = 1e-14;
    log_norm_ = -std::log(quad::integrate(in, opts).scalar());
  }
  KernelFamily family() const override { return KernelFamily::bumped_cauchy; }
  double parameter() const override { return eps_; }
  std::string name() const override { return "bumped_cauchy(" + num(eps_) + ")"; }
  double log_density(double x) const override {
    return log_norm_ + eps_ * bumps(x, nullptr) - std::log1p(x * x);
  }
  double score(double x) const override {
    double db = 0.0;
    bumps(x, &db);
    return 2.0 * x / (1.0 + x * x) - eps_ * db;
  }
  double sample(CounterRng& rng) const override {
    // Cauchy proposal; b stays below 1.1 because the bumps barely overlap.
    const double top = std::max(0.0, 1.1 * eps_);
    for (;;) {
      const double x = rng.cauchy();
      if (rng.uniform() < std::exp(eps_ * bumps(x, nullptr) - top)) return x;
    }
  }
  std::vector<double> breakpoints() const override {
    std::vector<double> out;
    for (int n = 1; n <= kBumps; ++n) {
      const double c = std::ldexp(1.0, n);
      for (double off : {-6.0, -3.0, 0.0, 3.0, 6.0}) {
        out.push_back(c + off);
        out.push_back(-(c + off));
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static double bumps(double x, double* derivative) {
    double b = 0.0;
    double db = 0.0;
    for (int n = 1; n <= kBumps; ++n) {
      const double c = std::ldexp(1.0, n);
      for (double d : {x - c, x + c}) {
        if (std::abs(d) > 40.0) continue;
        const double e = std::exp(-d * d);
        b += e;
        db -= 2.0 * d * e;
      }
    }
    if (derivative) *derivative = db;
    return b;
  }

  double eps_;
  double log_norm_ = 0.0;
};

class ExpOfNegPsiShape final : public UnivariateShapeImpl {
 public:
  ExpOfNegPsiShape(double a, SkewingFunction skewer)
      : a_(a), skewer_(std::move(skewer)) {
    if (skewer_.dim() != 1) {
      throw InputError("exp_of_neg_psi shape requires a one-dimensional skewer");
    }
    const double zero = 0.0;
    shift_ = skewer_.primitive(std::span<const double>(&zero, 1));
    auto unnormalized = [this](double x) {
      return std::exp(-a_ * (skewer_.primitive(std::span<const double>(&x, 1)) - shift_));
    };
    const quad::Integrand in = quad::scalar_1d(unnormalized);
    const quad::ProbeResult probe = quad::probe_divergence(in);
    if (!probe.convergent) {
      throw CapabilityError("exp_of_neg_psi: a = " + num(a) +
                            " lies outside the natural parameter space of " +
                            skewer_.description());
    }
    quad::Adaptive1D opts;
    opts.rel_tol = 1e-13;
    const double mass = quad::integrate(in, opts).scalar();
    log_norm_ = -std::log(mass);
  }
  KernelFamily family() const override { return KernelFamily::exp_of_neg_psi; }
  double parameter() const override { return a_; }
  std::string name() const override {
    return fmt::format("exp_of_neg_psi(a={:.17g}, {})", a_, skewer_.description());
  }
  double log_density(double x) const override {
    return log_norm_ - a_ * (skewer_.primitive(std::span<const double>(&x, 1)) - shift_);
  }
  double score(double x) const override {
    double g = 0.0;
    skewer_.delta_gradient(std::span<const double>(&x, 1), std::span<double>(&g, 1));
    return a_ * g;
  }
  bool can_sample() const override {
    switch (skewer_.family()) {
      case SkewerFamily::linear:
      case SkewerFamily::power:
      case SkewerFamily::t_type:
        return true;
      case SkewerFamily::score_composed: {
        const SymmetricKernel* k = skewer_.composed_kernel();
        return std::abs(a_ * skewer_.outer().slope_at_zero() - 1.0) < 1e-9 &&
               k->can_sample();
      }
      default:
        return false;
    }
  }
  double sample(CounterRng& rng) const override {
    const double slope = skewer_.outer().slope_at_zero();
    switch (skewer_.family()) {
      case SkewerFamily::linear:
        return rng.normal() / std::sqrt(a_ * slope);
      case SkewerFamily::power: {
        const double alpha = skewer_.parameter();
        const double p = 0.5 * alpha + 1.0;
        const double kappa = slope * std::sqrt(2.0 / alpha) / p;
        const double g = rng.gamma(1.0 / p);
        return random_sign(rng) * std::pow(g / (a_ * kappa), 1.0 / p);
      }
      case SkewerFamily::t_type: {
        const double nu = skewer_.parameter();
        const double b = a_ * slope * std::sqrt(nu + 1.0);
        for (;;) {
          const double x = random_sign(rng) * (-std::log(rng.uniform())) / b;
          const double ratio = std::exp(-b * (std::sqrt(x * x + nu) - std::abs(x)));
          if (rng.uniform() < ratio) return x;
        }
      }
      case SkewerFamily::score_composed:
        if (can_sample()) {
          double x = 0.0;
          skewer_.composed_kernel()->sample(rng, std::span<double>(&x, 1));
          return x;
        }
        break;
      default:
        break;
    }
    throw CapabilityError("no sampler for " + name());
  }
  const SkewingFunction* psi_source() const override { return &skewer_; }

 private:
  double a_;
  SkewingFunction skewer_;
  double shift_ = 0.0;
  double log_norm_ = 0.0;
};

}  // namespace
}  // namespace detail

UnivariateShape UnivariateShape::gaussian() {
  static const auto impl = std::make_shared<detail::GaussianShape>();
  return UnivariateShape(impl);
}
UnivariateShape UnivariateShape::student(double nu) {
  if (!(nu > 0.0)) throw InputError("student kernel: nu must be positive");
  return UnivariateShape(std::make_shared<detail::StudentShape>(nu));
}
UnivariateShape UnivariateShape::laplace() {
  static const auto impl = std::make_shared<detail::LaplaceShape>();
  return UnivariateShape(impl);
}
UnivariateShape UnivariateShape::logistic() {
  static const auto impl = std::make_shared<detail::LogisticShape>();
  return UnivariateShape(impl);
}
UnivariateShape UnivariateShape::exponential_power(double alpha) {
  if (!(alpha > 0.0)) throw InputError("exponential_power kernel: alpha must be positive");
  return UnivariateShape(std::make_shared<detail::ExponentialPowerShape>(alpha));
}
UnivariateShape UnivariateShape::bumped_cauchy(double eps) {
  if (!std::isfinite(eps)) throw InputError("bumped_cauchy kernel: eps must be finite");
  return UnivariateShape(std::make_shared<detail::BumpedCauchyShape>(eps));
}
UnivariateShape UnivariateShape::exp_of_neg_psi(double a, const SkewingFunction& skewer) {
  if (!std::isfinite(a)) throw InputError("exp_of_neg_psi kernel: a must be finite");
  return UnivariateShape(std::make_shared<detail::ExpOfNegPsiShape>(a, skewer));
}

KernelFamily UnivariateShape::family() const { return impl_->family(); }
double UnivariateShape::parameter() const { return impl_->parameter(); }
std::string UnivariateShape::name() const { return impl_->name(); }
double UnivariateShape::log_density(double x) const { return impl_->log_density(x); }
double UnivariateShape::score(double x) const { return impl_->score(x); }
bool UnivariateShape::can_sample() const { return impl_->can_sample(); }
double UnivariateShape::sample(CounterRng& rng) const { return impl_->sample(rng); }
const SkewingFunction* UnivariateShape::psi_source() const {
  return impl_->psi_source();
}
std::vector<double> UnivariateShape::breakpoints() const { return impl_->breakpoints(); }

// ---------------------------------------------------------------------------
// Kernel shapes and standardized kernels

KernelShape KernelShape::univariate(UnivariateShape shape) {
  KernelShape s;
  s.layout = Layout::univariate;
  s.dim = 1;
  s.components = {std::move(shape)};
  s.base_scale = {1.0};
  return s;
}

KernelShape KernelShape::product(std::vector<UnivariateShape> shapes) {
  if (shapes.empty()) throw InputError("product kernel: no components");
  KernelShape s;
  s.layout = Layout::product;
  s.dim = static_cast<int>(shapes.size());
  s.base_scale.assign(shapes.size(), 1.0);
  s.components = std::move(shapes);
  return s;
}

KernelShape KernelShape::spherical_gaussian(int dim) {
  if (dim < 1) throw InputError("gaussian kernel: dimension must be >= 1");
  if (dim == 1) return univariate(UnivariateShape::gaussian());
  KernelShape s;
  s.layout = Layout::spherical;
  s.dim = dim;
  s.components = {UnivariateShape::gaussian()};
  s.base_scale = {1.0};
  return s;
}

KernelShape KernelShape::spherical_student(double nu, int dim) {
  if (dim < 1) throw InputError("student kernel: dimension must be >= 1");
  if (dim == 1) return univariate(UnivariateShape::student(nu));
  KernelShape s;
  s.layout = Layout::spherical;
  s.dim = dim;
  s.components = {UnivariateShape::student(nu)};
  s.base_scale = {1.0};
  return s;
}

KernelFamily KernelShape::family() const {
  if (layout == Layout::product) return KernelFamily::product;
  return components.front().family();
}

namespace detail {

class KernelImpl {
 public:
  KernelImpl(KernelShape shape, StandardizationRule rule, std::vector<double> calibration)
      : shape_(std::move(shape)), rule_(rule), calibration_(std::move(calibration)) {
    scales_.resize(calibration_.size());
    log_scale_sum_ = 0.0;
    for (std::size_t i = 0; i < scales_.size(); ++i) {
      scales_[i] = shape_.base_scale[i] * calibration_[i];
      log_scale_sum_ += std::log(scales_[i]);
    }
    if (shape_.layout == KernelShape::Layout::spherical) {
      log_scale_sum_ *= shape_.dim;
      const double k = shape_.dim;
      if (shape_.components[0].family() == KernelFamily::student) {
        nu_ = shape_.components[0].parameter();
        log_norm_ = std::lgamma(0.5 * (nu_ + k)) - std::lgamma(0.5 * nu_) -
                    0.5 * k * std::log(nu_ * std::numbers::pi);
      } else {
        log_norm_ = -k * kLogSqrt2Pi;
      }
    }
  }

  const KernelShape& shape() const { return shape_; }
  StandardizationRule rule() const { return rule_; }
  const std::vector<double>& calibration() const { return calibration_; }
  const std::vector<double>& scales() const { return scales_; }

  double log_density(std::span<const double> z) const {
    switch (shape_.layout) {
      case KernelShape::Layout::univariate:
        return shape_.components[0].log_density(z[0] / scales_[0]) - log_scale_sum_;
      case KernelShape::Layout::product: {
        double s = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
          s += shape_.components[i].log_density(z[i] / scales_[i]);
        }
        return s - log_scale_sum_;
      }
      case KernelShape::Layout::spherical: {
        double r2 = 0.0;
        for (double v : z) r2 += v * v;
        r2 /= scales_[0] * scales_[0];
        if (nu_ > 0.0) {
          return log_norm_ - 0.5 * (nu_ + shape_.dim) * std::log1p(r2 / nu_) -
                 log_scale_sum_;
        }
        return log_norm_ - 0.5 * r2 - log_scale_sum_;
      }
    }
    return 0.0;
  }

  void score(std::span<const double> z, std::span<double> out) const {
    switch (shape_.layout) {
      case KernelShape::Layout::univariate:
        out[0] = shape_.components[0].score(z[0] / scales_[0]) / scales_[0];
        return;
      case KernelShape::Layout::product:
        for (std::size_t i = 0; i < z.size(); ++i) {
          out[i] = shape_.components[i].score(z[i] / scales_[i]) / scales_[i];
        }
        return;
      case KernelShape::Layout::spherical: {
        const double s = scales_[0];
        double r2 = 0.0;
        for (double v : z) r2 += v * v;
        r2 /= s * s;
        const double factor =
            nu_ > 0.0 ? (nu_ + shape_.dim) / (nu_ + r2) / (s * s) : 1.0 / (s * s);
        for (std::size_t i = 0; i < z.size(); ++i) out[i] = factor * z[i];
        return;
      }
    }
  }

  bool can_sample() const {
    for (const auto& c : shape_.components) {
      if (!c.can_sample()) return false;
    }
    return true;
  }

  void sample(CounterRng& rng, std::span<double> out) const {
    switch (shape_.layout) {
      case KernelShape::Layout::univariate:
        out[0] = scales_[0] * shape_.components[0].sample(rng);
        return;
      case KernelShape::Layout::product:
        for (std::size_t i = 0; i < out.size(); ++i) {
          out[i] = scales_[i] * shape_.components[i].sample(rng);
        }
        return;
      case KernelShape::Layout::spherical: {
        double mix = 1.0;
        if (nu_ > 0.0) mix = std::sqrt(nu_ / (2.0 * rng.gamma(0.5 * nu_)));
        for (double& v : out) v = scales_[0] * mix * rng.normal();
        return;
      }
    }
  }

 private:
  KernelShape shape_;
  StandardizationRule rule_;
  std::vector<double> calibration_;
  std::vector<double> scales_;
  double log_scale_sum_ = 0.0;
  double log_norm_ = 0.0;
  double nu_ = 0.0;
};

}  // namespace detail

int SymmetricKernel::dim() const { return impl_->shape().dim; }
KernelFamily SymmetricKernel::family() const { return impl_->shape().family(); }
StandardizationRule SymmetricKernel::rule() const { return impl_->rule(); }
const KernelShape& SymmetricKernel::shape() const { return impl_->shape(); }
std::span<const double> SymmetricKernel::scales() const { return impl_->scales(); }
std::span<const double> SymmetricKernel::calibration() const {
  return impl_->calibration();
}

std::string SymmetricKernel::description() const {
  const KernelShape& s = impl_->shape();
  switch (s.layout) {
    case KernelShape::Layout::univariate:
      return s.components[0].name();
    case KernelShape::Layout::spherical:
      return s.components[0].name() + "^" + std::to_string(s.dim);
    case KernelShape::Layout::product: {
      std::string out = "product[";
      for (std::size_t i = 0; i < s.components.size(); ++i) {
        if (i) out += ",";
        out += s.components[i].name();
      }
      return out + "]";
    }
  }
  return "?";
}

double SymmetricKernel::log_density(std::span<const double> z) const {
  return impl_->log_density(z);
}

double SymmetricKernel::density(std::span<const double> z) const {
  return std::exp(impl_->log_density(z));
}

void SymmetricKernel::score(std::span<const double> z, std::span<double> out) const {
  impl_->score(z, out);
}

std::vector<double> SymmetricKernel::breakpoints() const {
  const KernelShape& s = impl_->shape();
  if (s.layout != KernelShape::Layout::univariate) return {};
  std::vector<double> out = s.components[0].breakpoints();
  for (double& v : out) v *= impl_->scales()[0];
  return out;
}

bool SymmetricKernel::can_sample() const { return impl_->can_sample(); }

void SymmetricKernel::sample(CounterRng& rng, std::span<double> out) const {
  if (!can_sample()) throw CapabilityError("no sampler for kernel " + description());
  impl_->sample(rng, out);
}

KernelShape SymmetricKernel::free_scale() const {
  KernelShape s = impl_->shape();
  s.base_scale = impl_->scales();
  return s;
}

namespace {

// Scale multiplier c for the density x -> g(x / (b c)) / (b c) meeting the
// rule's integral constraint.
double calibrate(const UnivariateShape& g, double base, StandardizationRule rule) {
  quad::Adaptive1D opts;
  opts.abs_tol = 1e-13;
  opts.rel_tol = 1e-13;

  std::function<double(double)> constraint;
  bool increasing = true;
  if (rule == StandardizationRule::unit_variance) {
    auto second_moment_integrand = [&g](double s) {
      quad::Integrand in = quad::scalar_1d([&g, s](double x) {
        const double u = x / s;
        return x * x * std::exp(g.log_density(u)) / s;
      });
      in.breakpoints = g.breakpoints();
      for (double& b : in.breakpoints) b *= s;
      return in;
    };
    const quad::ProbeResult probe = quad::probe_divergence(second_moment_integrand(base));
    if (!probe.convergent) {
      throw StandardizationInfeasible(std::string(rule_name(rule)),
                                      g.name() + " has no finite second moment");
    }
    constraint = [=](double c) {
      return quad::integrate(second_moment_integrand(base * c), opts).scalar() - 1.0;
    };
  } else {
    increasing = false;
    constraint = [&g, base](double c) {
      const double s = base * c;
      auto fn = [&g, s](double x, std::span<double> out) {
        out[0] = std::exp(g.log_density(x / s)) / s;
      };
      std::vector<double> breaks = g.breakpoints();
      for (double& b : breaks) b *= s;
      quad::Adaptive1D o;
      o.abs_tol = 1e-14;
      return 0.5 + quad::integrate_interval(fn, 1, 0.0, 1.0, o, breaks).value[0] - 0.75;
    };
  }

  double lo = 0.5;
  double hi = 2.0;
  double flo = constraint(lo);
  double fhi = constraint(hi);
  for (int i = 0; i < 60 && flo * fhi > 0.0; ++i) {
    // Move the bracket towards the root.
    const bool go_up = increasing ? (fhi < 0.0) : (fhi > 0.0);
    if (go_up) {
      lo = hi;
      flo = fhi;
      hi *= 4.0;
      fhi = constraint(hi);
    } else {
      hi = lo;
      fhi = flo;
      lo *= 0.25;
      flo = constraint(lo);
    }
  }
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (flo * fhi > 0.0) {
    throw StandardizationInfeasible(std::string(rule_name(rule)),
                                    "could not bracket the scale for " + g.name());
  }
  std::uintmax_t iters = 200;
  auto tol = [](double a, double b) { return std::abs(b - a) <= 4e-16 * std::abs(a); };
  const auto [a, b] = boost::math::tools::toms748_solve(constraint, lo, hi, flo, fhi, tol, iters);
  const double c = 0.5 * (a + b);
  const double residual = constraint(c);
  if (!(std::abs(residual) < 1e-10)) {
    throw StandardizationInfeasible(std::string(rule_name(rule)),
                                    "constraint residual " + num(residual) +
                                        " above 1e-10 for " + g.name());
  }
  return c;
}

}  // namespace

SymmetricKernel standardize(const KernelShape& shape, StandardizationRule rule) {
  if (shape.components.empty() || shape.base_scale.size() != shape.components.size()) {
    throw InputError("standardize: malformed kernel shape");
  }
  std::vector<double> calibration(shape.components.size());
  for (std::size_t i = 0; i < shape.components.size(); ++i) {
    calibration[i] = calibrate(shape.components[i], shape.base_scale[i], rule);
  }
  return SymmetricKernel(
      std::make_shared<detail::KernelImpl>(shape, rule, std::move(calibration)));
}

SymmetricKernel with_scales(const KernelShape& shape, StandardizationRule rule,
                            std::vector<double> calibration) {
  if (calibration.size() != shape.components.size()) {
    throw InputError("with_scales: calibration size mismatch");
  }
  for (double c : calibration) {
    if (!(c > 0.0) || !std::isfinite(c)) throw InputError("with_scales: scale must be positive");
  }
  return SymmetricKernel(
      std::make_shared<detail::KernelImpl>(shape, rule, std::move(calibration)));
}

KernelEval kernel_eval(const SymmetricKernel& kernel, std::span<const double> z) {
  if (static_cast<int>(z.size()) != kernel.dim()) {
    throw InputError("kernel_eval: dimension mismatch (kernel dim " +
                     std::to_string(kernel.dim()) + ")");
  }
  require_finite(z, "kernel_eval");
  KernelEval e;
  e.log_density = kernel.log_density(z);
  e.density = std::exp(e.log_density);
  e.score.resize(z.size());
  kernel.score(z, e.score);
  return e;
}

namespace kernels {

SymmetricKernel gaussian(int dim, StandardizationRule rule) {
  return standardize(KernelShape::spherical_gaussian(dim), rule);
}
SymmetricKernel student(double nu, int dim, StandardizationRule rule) {
  return standardize(KernelShape::spherical_student(nu, dim), rule);
}
SymmetricKernel laplace(StandardizationRule rule) {
  return standardize(KernelShape::univariate(UnivariateShape::laplace()), rule);
}
SymmetricKernel logistic(StandardizationRule rule) {
  return standardize(KernelShape::univariate(UnivariateShape::logistic()), rule);
}
SymmetricKernel exponential_power(double alpha, StandardizationRule rule) {
  return standardize(KernelShape::univariate(UnivariateShape::exponential_power(alpha)),
                     rule);
}
SymmetricKernel bumped_cauchy(double eps, StandardizationRule rule) {
  return standardize(KernelShape::univariate(UnivariateShape::bumped_cauchy(eps)),
                     rule);
}
SymmetricKernel product(std::vector<UnivariateShape> shapes, StandardizationRule rule) {
  return standardize(KernelShape::product(std::move(shapes)), rule);
}
SymmetricKernel exp_of_neg_psi(double a, const SkewingFunction& skewer,
                               StandardizationRule rule) {
  return standardize(KernelShape::univariate(UnivariateShape::exp_of_neg_psi(a, skewer)),
                     rule);
}

}  // namespace kernels

}  // namespace skewinfo
