#include "rodlim/material.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace rodlim {

double ExtendedReal::as_double() const {
  return infinite_ ? std::numeric_limits<double>::infinity() : value_;
}

void require_finite(const Mat3& m, const char* what) {
  if (!m.allFinite()) throw InputError(std::string(what) + ": non-finite matrix entry");
}

void IsotropicModuli::validate() const {
  if (!(std::isfinite(mu) && mu > 0.0)) throw InputError("material: mu must be finite and > 0");
  if (!(std::isfinite(lambda) && lambda >= 0.0))
    throw InputError("material: lambda must be finite and >= 0");
}

std::string to_string(EnergyFamily family) {
  switch (family) {
    case EnergyFamily::CompressibleNeoHookean:
      return "neo_hookean";
    case EnergyFamily::StVenantKirchhoffLogDet:
      return "svk_logdet";
  }
  return "unknown";
}

EnergyFamily energy_family_from_string(const std::string& name) {
  if (name == "neo_hookean" || name == "CompressibleNeoHookean") return EnergyFamily::CompressibleNeoHookean;
  if (name == "svk_logdet" || name == "StVenantKirchhoffLogDet") return EnergyFamily::StVenantKirchhoffLogDet;
  throw InputError("material: unknown family '" + name + "' (expected neo_hookean or svk_logdet)");
}

// ---------------------------------------------------------------------------

ElasticTensor::ElasticTensor(IsotropicModuli moduli) : moduli_(moduli) { moduli_.validate(); }

Mat3 ElasticTensor::apply(const Mat3& h) const {
  return moduli_.mu * (h + h.transpose()) + moduli_.lambda * h.trace() * Mat3::Identity();
}

double ElasticTensor::quadratic(const Mat3& h) const { return bilinear(h, h); }

double ElasticTensor::bilinear(const Mat3& a, const Mat3& b) const {
  const Mat3 sa = 0.5 * (a + a.transpose());
  const Mat3 sb = 0.5 * (b + b.transpose());
  return 2.0 * moduli_.mu * sa.cwiseProduct(sb).sum() + moduli_.lambda * a.trace() * b.trace();
}

ElasticTensor ElasticTensor::scaled(double s) const {
  return ElasticTensor(IsotropicModuli{moduli_.mu * s, moduli_.lambda * s});
}

// ---------------------------------------------------------------------------

namespace {

// det(Id + H) - 1 without forming Id + H.
double det_minus_one(const Mat3& h) {
  const double tr = h.trace();
  const double i2 = 0.5 * (tr * tr - (h * h).trace());
  return tr + i2 + h.determinant();
}

// delta - log(1 + delta), accurate for small delta.
double delta_minus_log1p(double delta) {
  if (std::abs(delta) < 0.1) {
    double sum = 0.0;
    double p = delta * delta;
    for (int k = 2; k <= 32; ++k) {
      sum += (k % 2 == 0 ? p : -p) / k;
      p *= delta;
    }
    return sum;
  }
  return delta - std::log1p(delta);
}

}  // namespace

StoredEnergy::StoredEnergy(EnergyFamily family, IsotropicModuli moduli) : family_(family), moduli_(moduli) {
  moduli_.validate();
}

ExtendedReal StoredEnergy::energy(const Mat3& f) const {
  require_finite(f, "energy");
  return energy_from_displacement(f - Mat3::Identity());
}

Mat3 StoredEnergy::stress(const Mat3& f) const {
  require_finite(f, "stress");
  if (!(f.determinant() > 0.0)) throw DomainError("stress: det F <= 0");
  return stress_from_displacement(f - Mat3::Identity());
}

ExtendedReal StoredEnergy::energy_from_displacement(const Mat3& h) const {
  const double delta = det_minus_one(h);
  if (!(1.0 + delta > 0.0)) return ExtendedReal::infinity();
  const double log_j = std::log1p(delta);
  const double mu = moduli_.mu;
  const double lambda = moduli_.lambda;
  if (family_ == EnergyFamily::CompressibleNeoHookean) {
    const double tr = h.trace();
    const double i2 = 0.5 * (tr * tr - (h * h).trace());
    // mu/2 (|F|^2 - 3) - mu log J regrouped so the O(|H|) terms cancel analytically.
    const double w = 0.5 * mu * h.squaredNorm() - mu * (i2 + h.determinant()) +
                     mu * delta_minus_log1p(delta) + 0.5 * lambda * log_j * log_j;
    return std::max(w, 0.0);
  }
  const Mat3 green = 0.5 * (h + h.transpose() + h.transpose() * h);
  return mu * green.squaredNorm() + 0.5 * lambda * log_j * log_j;
}

Mat3 StoredEnergy::stress_from_displacement(const Mat3& h) const {
  const Mat3 f = Mat3::Identity() + h;
  const double delta = det_minus_one(h);
  if (!(1.0 + delta > 0.0)) throw DomainError("stress: det F <= 0");
  const double log_j = std::log1p(delta);
  const Mat3 f_inv_t = f.inverse().transpose();
  const double mu = moduli_.mu;
  const double lambda = moduli_.lambda;
  if (family_ == EnergyFamily::CompressibleNeoHookean) {
    // F - F^{-T} = H + H^T F^{-T}
    return mu * (h + h.transpose() * f_inv_t) + lambda * log_j * f_inv_t;
  }
  const Mat3 green = 0.5 * (h + h.transpose() + h.transpose() * h);
  return 2.0 * mu * f * green + lambda * log_j * f_inv_t;
}

Mat3 StoredEnergy::stress_increment(const Mat3& h, const Mat3& dh) const {
  const Mat3 f = Mat3::Identity() + h;
  const double delta = det_minus_one(h);
  if (!(1.0 + delta > 0.0)) throw DomainError("stress_increment: det F <= 0");
  const double log_j = std::log1p(delta);
  const Mat3 f_inv = f.inverse();
  const Mat3 f_inv_t = f_inv.transpose();
  const double mu = moduli_.mu;
  const double lambda = moduli_.lambda;
  const Mat3 d_inv_t = f_inv_t * dh.transpose() * f_inv_t;  // = -d(F^{-T})
  const double d_log_j = (f_inv * dh).trace();
  if (family_ == EnergyFamily::CompressibleNeoHookean) {
    return mu * dh + (mu - lambda * log_j) * d_inv_t + lambda * d_log_j * f_inv_t;
  }
  const Mat3 green = 0.5 * (h + h.transpose() + h.transpose() * h);
  const Mat3 ftdh = f.transpose() * dh;
  const Mat3 d_green = 0.5 * (ftdh + ftdh.transpose());
  return 2.0 * mu * (dh * green + f * d_green) + lambda * d_log_j * f_inv_t - lambda * log_j * d_inv_t;
}

Eigen::Matrix<double, 9, 9> StoredEnergy::tangent(const Mat3& h) const {
  Eigen::Matrix<double, 9, 9> t;
  for (int k = 0; k < 9; ++k) {
    Mat3 e = Mat3::Zero();
    e(k / 3, k % 3) = 1.0;
    const Mat3 col = stress_increment(h, e);
    for (int m = 0; m < 9; ++m) t(m, k) = col(m / 3, m % 3);
  }
  return 0.5 * (t + t.transpose());
}

Mat3 finite_difference_hessian_at_identity(const StoredEnergy& w, const Mat3& h, double step) {
  Mat3 out;
  const double s = step;
  const double t = step;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Mat3 e = Mat3::Zero();
      e(i, j) = 1.0;
      const double wpp = w.energy_from_displacement(s * h + t * e).value();
      const double wpm = w.energy_from_displacement(s * h - t * e).value();
      const double wmp = w.energy_from_displacement(-s * h + t * e).value();
      const double wmm = w.energy_from_displacement(-s * h - t * e).value();
      out(i, j) = (wpp - wpm - wmp + wmm) / (4.0 * s * t);
    }
  }
  return out;
}

Mat3 nearest_rotation(const Mat3& f) {
  Eigen::JacobiSVD<Mat3> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

double distance_to_so3(const Mat3& f) { return (f - nearest_rotation(f)).norm(); }

Mat3 axis_angle_rotation(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

// ---------------------------------------------------------------------------

namespace {

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::Quaterniond q(n01(rng), n01(rng), n01(rng), n01(rng));
  q.normalize();
  return q.toRotationMatrix();
}

Mat3 random_matrix(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = scale * n01(rng);
  return m;
}

// Deformation gradients with det > 0: alternating near-SO(3) and moderate clusters.
Mat3 sample_admissible(std::mt19937_64& rng, std::int64_t index) {
  const double scale = (index % 2 == 0) ? 0.02 : 0.4;
  for (;;) {
    const Mat3 f = random_rotation(rng) * (Mat3::Identity() + random_matrix(rng, scale));
    if (f.determinant() > 1e-3) return f;
  }
}

}  // namespace

std::vector<ProbeRecord> probe_hypotheses(const StoredEnergy& w, std::int64_t sample_count, std::uint64_t seed) {
  if (sample_count < 1) throw InputError("probe_hypotheses: sample_count must be >= 1");
  std::mt19937_64 rng(seed);

  // H2: blow-up as det -> 0+ and sentinel for det <= 0.
  double h2_violations = 0.0;
  double previous = w.energy(Mat3::Identity()).value();
  double last = previous;
  for (int n = 2; n <= 64; ++n) {
    const Vec3 diag(1.0 / n, 1.0, 1.0);
    const double value = w.energy(diag.asDiagonal().toDenseMatrix()).value();
    if (!(value > previous)) h2_violations += 1.0;
    previous = value;
    last = value;
  }
  for (std::int64_t s = 0; s < std::min<std::int64_t>(sample_count, 1000); ++s) {
    Mat3 f = sample_admissible(rng, s);
    f.col(0) *= -1.0;
    if (w.energy(f).is_finite()) h2_violations += 1.0;
  }

  double h3 = 0.0, h4 = 0.0, kirchhoff = 0.0;
  double h5_const = std::numeric_limits<double>::infinity();
  double h7_const = 0.0;
  for (std::int64_t s = 0; s < sample_count; ++s) {
    const Mat3 f = sample_admissible(rng, s);
    const Mat3 r = random_rotation(rng);
    const double wf = w.energy(f).value();
    const double wrf = w.energy(r * f).value();
    h3 = std::max(h3, std::abs(wrf - wf) / (1.0 + std::abs(wf)));

    h4 = std::max(h4, w.energy(random_rotation(rng)).value());

    const double dist = distance_to_so3(f);
    if (dist > 1e-8) h5_const = std::min(h5_const, wf / (dist * dist));

    const Mat3 p = w.stress(f);
    const Mat3 kir = p * f.transpose();
    h7_const = std::max(h7_const, kir.norm() / (wf + 1.0));
    kirchhoff = std::max(kirchhoff, (kir - f * p.transpose()).norm() / (1.0 + kir.norm()));
  }
  if (!std::isfinite(h5_const)) h5_const = 0.0;

  return {
      {"H2", h2_violations, last, sample_count, seed},
      {"H3", h3, 0.0, sample_count, seed},
      {"H4", h4, 0.0, sample_count, seed},
      {"H5", std::max(0.0, -h5_const), h5_const, sample_count, seed},
      {"H7", 0.0, h7_const, sample_count, seed},
      {"kirchhoff_symmetry", kirchhoff, 0.0, sample_count, seed},
  };
}

}  // namespace rodlim
