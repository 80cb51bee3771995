#pragma once

#include "rodlim/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rodlim {

/// Isotropic Lame moduli. mu > 0, lambda >= 0.
struct IsotropicModuli {
  double mu = 1.0;
  double lambda = 1.0;

  /// Throws InputError if the moduli are inadmissible.
  void validate() const;
};

enum class EnergyFamily { CompressibleNeoHookean, StVenantKirchhoffLogDet };

std::string to_string(EnergyFamily family);
EnergyFamily energy_family_from_string(const std::string& name);

/// Linearized elasticity tensor L = D^2 W(Id), acting as
/// L H = 2 mu sym H + lambda tr(H) Id.
class ElasticTensor {
 public:
  ElasticTensor() = default;
  explicit ElasticTensor(IsotropicModuli moduli);

  Mat3 apply(const Mat3& h) const;
  /// Q3(H) = L H : H
  double quadratic(const Mat3& h) const;
  double bilinear(const Mat3& a, const Mat3& b) const;

  const IsotropicModuli& moduli() const { return moduli_; }
  ElasticTensor scaled(double s) const;

 private:
  IsotropicModuli moduli_;
};

/// Hyperelastic stored-energy density W with W = +inf for det F <= 0.
///
/// Families:
///   CompressibleNeoHookean:   W = mu/2 (|F|^2 - 3) - mu log J + lambda/2 (log J)^2
///   StVenantKirchhoffLogDet:  W = mu |E|^2 + lambda/2 (log J)^2,  E = (F^T F - Id)/2
///
/// Both vanish on SO(3) and linearize to the same isotropic tensor. The
/// *_from_displacement variants take H = F - Id and avoid cancellation for
/// small strains; the solvers use them exclusively.
class StoredEnergy {
 public:
  StoredEnergy(EnergyFamily family, IsotropicModuli moduli);

  EnergyFamily family() const { return family_; }
  const IsotropicModuli& moduli() const { return moduli_; }

  ExtendedReal energy(const Mat3& f) const;
  /// DW(F). Throws DomainError if det F <= 0.
  Mat3 stress(const Mat3& f) const;

  ExtendedReal energy_from_displacement(const Mat3& h) const;
  Mat3 stress_from_displacement(const Mat3& h) const;
  /// Directional second derivative D^2 W(Id + H)[dH].
  Mat3 stress_increment(const Mat3& h, const Mat3& dh) const;
  /// D^2 W(Id + H) as a 9x9 matrix on row-major vec(F) (index 3*i + j).
  Eigen::Matrix<double, 9, 9> tangent(const Mat3& h) const;

  ElasticTensor linearized() const { return ElasticTensor(moduli_); }

 private:
  EnergyFamily family_;
  IsotropicModuli moduli_;
};

/// Finite-difference Hessian of W at Id applied to H (central differences on
/// the energy). Independent of ElasticTensor; used to cross-check it.
Mat3 finite_difference_hessian_at_identity(const StoredEnergy& w, const Mat3& h, double step = 1e-4);

/// Distance from F to SO(3) in the Frobenius norm.
double distance_to_so3(const Mat3& f);
/// Nearest rotation (polar factor with determinant correction).
Mat3 nearest_rotation(const Mat3& f);
/// Rotation about unit axis by angle (Rodrigues).
Mat3 axis_angle_rotation(const Vec3& axis, double angle);

struct ProbeRecord {
  std::string hypothesis;
  double max_violation = 0.0;
  double fitted_constant = 0.0;
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
};

/// Sampled checks of the growth and invariance hypotheses on W.
///
/// Records, in order:
///   H2  blow-up along diag(1/n,1,1) (violation = count of non-increasing steps)
///       and sentinel on det <= 0 samples
///   H3  max |W(RF) - W(F)| / (1 + |W(F)|)
///   H4  max W on sampled rotations
///   H5  fitted C = min W / dist^2(F, SO(3)); violation = max(0, -C)
///   H7  fitted k = max |DW F^T| / (W + 1)
///   kirchhoff_symmetry  max |DW F^T - F DW^T| / (1 + |DW F^T|)
std::vector<ProbeRecord> probe_hypotheses(const StoredEnergy& w, std::int64_t sample_count,
                                          std::uint64_t seed);

}  // namespace rodlim
