#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "skewinfo/models.hpp"

namespace skewinfo {

/// ϑ = (μ, Σ^{1/2}, δ). Σ^{1/2} is the stored parameter.
struct ThetaPoint {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma_half;
  Eigen::VectorXd delta;

  /// μ = 0, Σ^{1/2} = I, δ = 0.
  static ThetaPoint standard(int k);

  int dim() const { return static_cast<int>(mu.size()); }
  bool symmetric_point() const { return delta.isZero(0.0); }
  /// Throws InputError unless the sizes agree and Σ^{1/2} is symmetric
  /// positive definite.
  void validate() const;
};

/// Symmetric square root by eigendecomposition, eigenvalues floored at 1e-12.
Eigen::MatrixXd sqrt_spd(const Eigen::MatrixXd& sigma);

/// 2 |Σ|^{-1/2} f(z) Π(z, δ), z = Σ^{-1/2}(x - μ).
class SkewModel {
 public:
  SkewModel(SymmetricKernel kernel, SkewingFunction skewer, ThetaPoint theta);

  int dim() const { return kernel_.dim(); }
  const SymmetricKernel& kernel() const { return kernel_; }
  const SkewingFunction& skewer() const { return skewer_; }
  const ThetaPoint& theta() const { return theta_; }
  SkewModel with_theta(ThetaPoint theta) const;

  const Eigen::MatrixXd& sigma_half_inverse() const { return s_inv_; }
  double log_det_sigma_half() const { return log_det_; }

  /// z = Σ^{-1/2}(x - μ).
  Eigen::VectorXd standardized(std::span<const double> x) const;

  double pdf(std::span<const double> x) const;
  double log_pdf(std::span<const double> x) const;

  /// n draws, row-major n × k. Draw i uses generator stream i of `seed`, so
  /// the parallel and serial versions agree bit for bit.
  std::vector<double> sample(std::size_t n, std::uint64_t seed) const;
  std::vector<double> sample_serial(std::size_t n, std::uint64_t seed) const;

 private:
  void draw(std::uint64_t seed, std::size_t i, std::span<double> out) const;

  SymmetricKernel kernel_;
  SkewingFunction skewer_;
  ThetaPoint theta_;
  Eigen::MatrixXd s_inv_;
  double log_det_ = 0.0;
};

struct CurveTable {
  std::vector<double> x;
  std::vector<double> pdf;
};

/// pdf along coordinate `axis` on an equispaced grid; the other coordinates
/// are held at μ.
CurveTable curve(const SkewModel& model, int axis, double lo, double hi,
                 int n_points);

}  // namespace skewinfo
