#include "skewinfo/density.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "skewinfo/errors.hpp"

namespace skewinfo {

ThetaPoint ThetaPoint::standard(int k) {
  if (k < 1) throw InputError("theta: dimension must be >= 1");
  ThetaPoint t;
  t.mu = Eigen::VectorXd::Zero(k);
  t.sigma_half = Eigen::MatrixXd::Identity(k, k);
  t.delta = Eigen::VectorXd::Zero(k);
  return t;
}

void ThetaPoint::validate() const {
  const Eigen::Index k = mu.size();
  if (k < 1) throw InputError("theta: empty location");
  if (sigma_half.rows() != k || sigma_half.cols() != k || delta.size() != k) {
    throw InputError("theta: mu, sigma_half and delta sizes disagree");
  }
  if (!mu.allFinite() || !sigma_half.allFinite() || !delta.allFinite()) {
    throw InputError("theta: non-finite entry");
  }
  const double scale = sigma_half.cwiseAbs().maxCoeff();
  if ((sigma_half - sigma_half.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InputError("theta: sigma_half is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_half);
  if (!(es.eigenvalues().minCoeff() > 0.0)) {
    throw InputError("theta: sigma_half is not positive definite");
  }
}

Eigen::MatrixXd sqrt_spd(const Eigen::MatrixXd& sigma) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sigma + sigma.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(1e-12).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

SkewModel::SkewModel(SymmetricKernel kernel, SkewingFunction skewer, ThetaPoint theta)
    : kernel_(std::move(kernel)), skewer_(std::move(skewer)), theta_(std::move(theta)) {
  if (kernel_.dim() != skewer_.dim()) {
    throw InputError("model: kernel dimension " + std::to_string(kernel_.dim()) +
                     " differs from skewer dimension " + std::to_string(skewer_.dim()));
  }
  if (theta_.dim() != kernel_.dim()) {
    throw InputError("model: theta dimension differs from kernel dimension");
  }
  theta_.validate();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(theta_.sigma_half);
  const Eigen::VectorXd ev = es.eigenvalues();
  s_inv_ = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  log_det_ = ev.array().log().sum();
}

SkewModel SkewModel::with_theta(ThetaPoint theta) const {
  return SkewModel(kernel_, skewer_, std::move(theta));
}

Eigen::VectorXd SkewModel::standardized(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim()) throw InputError("pdf: dimension mismatch");
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), dim());
  return s_inv_ * (xv - theta_.mu);
}

double SkewModel::log_pdf(std::span<const double> x) const {
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("pdf: non-finite input");
  }
  const Eigen::VectorXd z = standardized(x);
  const std::span<const double> zs(z.data(), z.size());
  const double pi =
      skewer_.value(zs, std::span<const double>(theta_.delta.data(), theta_.delta.size()));
  return std::numbers::ln2 - log_det_ + kernel_.log_density(zs) + std::log(pi);
}

double SkewModel::pdf(std::span<const double> x) const { return std::exp(log_pdf(x)); }

void SkewModel::draw(std::uint64_t seed, std::size_t i, std::span<double> out) const {
  const int k = dim();
  CounterRng rng(seed, i);
  Eigen::VectorXd z(k);
  kernel_.sample(rng, std::span<double>(z.data(), k));
  const double pi = skewer_.value(std::span<const double>(z.data(), k),
                                  std::span<const double>(theta_.delta.data(), k));
  if (!(rng.uniform() < pi)) z = -z;
  const Eigen::VectorXd x = theta_.mu + theta_.sigma_half * z;
  for (int j = 0; j < k; ++j) out[static_cast<std::size_t>(j)] = x[j];
}

std::vector<double> SkewModel::sample(std::size_t n, std::uint64_t seed) const {
  if (n < 1) throw InputError("sample: n must be >= 1");
  if (!kernel_.can_sample()) {
    throw CapabilityError("sample: no sampler for kernel " + kernel_.description());
  }
  const auto k = static_cast<std::size_t>(dim());
  std::vector<double> out(n * k);
  const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < nn; ++i) {
    const auto u = static_cast<std::size_t>(i);
    draw(seed, u, std::span<double>(out.data() + u * k, k));
  }
  return out;
}

std::vector<double> SkewModel::sample_serial(std::size_t n, std::uint64_t seed) const {
  if (n < 1) throw InputError("sample: n must be >= 1");
  if (!kernel_.can_sample()) {
    throw CapabilityError("sample: no sampler for kernel " + kernel_.description());
  }
  const auto k = static_cast<std::size_t>(dim());
  std::vector<double> out(n * k);
  for (std::size_t i = 0; i < n; ++i) draw(seed, i, std::span<double>(out.data() + i * k, k));
  return out;
}

CurveTable curve(const SkewModel& model, int axis, double lo, double hi, int n_points) {
  if (n_points < 1) throw InputError("curve: empty grid");
  if (axis < 0 || axis >= model.dim()) throw InputError("curve: axis out of range");
  if (!(std::isfinite(lo) && std::isfinite(hi)) || (n_points > 1 && !(hi > lo))) {
    throw InputError("curve: grid bounds must be finite with lo < hi");
  }
  CurveTable t;
  t.x.resize(static_cast<std::size_t>(n_points));
  t.pdf.resize(t.x.size());
  Eigen::VectorXd x = model.theta().mu;
  const double step = n_points > 1 ? (hi - lo) / (n_points - 1) : 0.0;
  for (int i = 0; i < n_points; ++i) {
    const double xi = i + 1 == n_points && n_points > 1 ? hi : lo + i * step;
    x[axis] = xi;
    t.x[static_cast<std::size_t>(i)] = xi;
    t.pdf[static_cast<std::size_t>(i)] = model.pdf(std::span<const double>(x.data(), x.size()));
  }
  return t;
}

}  // namespace skewinfo
