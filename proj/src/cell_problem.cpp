#include "rodlim/cell_problem.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace rodlim {

Mat3 SkewParam::matrix() const {
  Mat3 m;
  m << 0.0, -a, -b,  //
      a, 0.0, -c,    //
      b, c, 0.0;
  return m;
}

SkewParam SkewParam::from_matrix(const Mat3& skew) { return {skew(1, 0), skew(2, 0), skew(2, 1)}; }

Vec3 cell_first_column(const SkewParam& f, const Vec2& x) {
  return {-f.a * x.x() - f.b * x.y(), -f.c * x.y(), f.c * x.x()};
}

WarpField WarpField::operator+(const WarpField& other) const {
  WarpField out = *this;
  for (std::size_t n = 0; n < nodal.size(); ++n) out.nodal[n] += other.nodal[n];
  return out;
}

WarpField WarpField::operator*(double s) const {
  WarpField out = *this;
  for (auto& v : out.nodal) v *= s;
  return out;
}

double ClassResidual::max_abs() const {
  return std::max({mean.cwiseAbs().maxCoeff(), mean_d2.cwiseAbs().maxCoeff(), mean_d3.cwiseAbs().maxCoeff()});
}

ClassResidual class_residual(const CrossSection& s, const WarpField& beta) {
  ClassResidual r;
  for (int t = 0; t < s.num_triangles(); ++t) {
    const auto& tri = s.triangles()[t];
    const auto& g = s.basis_gradients(t);
    const double area = s.triangle_area(t);
    for (int k = 0; k < 3; ++k) {
      const Vec3& b = beta.nodal[tri[k]];
      r.mean += area / 3.0 * b;
      r.mean_d2 += area * g[k].x() * b;
      r.mean_d3 += area * g[k].y() * b;
    }
  }
  return r;
}

WarpField project_admissible(const CrossSection& s, const WarpField& beta) {
  // Subtracting x2 d2 + x3 d3 shifts the mean gradients by (d2, d3) (unit
  // area) and leaves the mean untouched (centered section).
  const double area = moments(s).area;
  const ClassResidual r = class_residual(s, beta);
  WarpField out = beta;
  for (int n = 0; n < s.num_vertices(); ++n) {
    const Vec2& x = s.vertices()[n];
    out.nodal[n] -= (r.mean_d2 * x.x() + r.mean_d3 * x.y()) / area;
  }
  const ClassResidual r2 = class_residual(s, out);
  for (auto& v : out.nodal) v -= r2.mean / area;
  return out;
}

void ReducedStiffness::validate() const {
  if (!(std::isfinite(E_mod) && E_mod > 0.0)) throw InputError("reduced stiffness: E_mod must be > 0");
  if (!Q1.allFinite()) throw InputError("reduced stiffness: Q1 has non-finite entries");
  if ((Q1 - Q1.transpose()).norm() > 1e-10 * Q1.norm()) throw InputError("reduced stiffness: Q1 is not symmetric");
  Eigen::LLT<Mat3> llt(0.5 * (Q1 + Q1.transpose()));
  if (llt.info() != Eigen::Success) throw InputError("reduced stiffness: Q1 is not positive definite");
}

ReducedStiffness ReducedStiffness::diagonal(double e_mod, double bend2, double bend3, double torsion) {
  ReducedStiffness r;
  r.E_mod = e_mod;
  r.Q1 = Vec3(bend2, bend3, torsion).asDiagonal();
  r.validate();
  return r;
}

// ---------------------------------------------------------------------------

double young_modulus(const ElasticTensor& tensor) {
  std::array<Mat3, 6> basis;
  for (int k = 0; k < 6; ++k) {
    basis[k].setZero();
    basis[k](k % 3, 1 + k / 3) = 1.0;
  }
  Mat3 m0 = Mat3::Zero();
  m0(0, 0) = 1.0;

  Eigen::Matrix<double, 6, 6> gram;
  Eigen::Matrix<double, 6, 1> rhs;
  for (int k = 0; k < 6; ++k) {
    rhs[k] = tensor.bilinear(m0, basis[k]);
    for (int l = 0; l < 6; ++l) gram(k, l) = tensor.bilinear(basis[k], basis[l]);
  }
  // The Gram matrix has a one-dimensional kernel (in-plane skew a3 = -b2),
  // orthogonal to rhs; use the pseudo-inverse.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(gram);
  const auto& values = eig.eigenvalues();
  const double cutoff = 1e-12 * values.cwiseAbs().maxCoeff();
  int rank = 0;
  Eigen::Matrix<double, 6, 1> coeffs = eig.eigenvectors().transpose() * rhs;
  for (int k = 0; k < 6; ++k) {
    if (values[k] > cutoff) {
      coeffs[k] /= values[k];
      ++rank;
    } else {
      coeffs[k] = 0.0;
    }
  }
  if (rank < 5) throw ConfigurationError("young_modulus: reduced system is singular beyond the skew kernel");
  const Eigen::Matrix<double, 6, 1> z = eig.eigenvectors() * coeffs;
  const double e_mod = tensor.quadratic(m0) - rhs.dot(z);
  if (!(e_mod > 0.0)) throw ConfigurationError("young_modulus: non-positive relaxed modulus");
  return e_mod;
}

// ---------------------------------------------------------------------------

namespace {

// Matrix (0 | d2 phi | d3 phi) for the local dof phi = lambda_k e_i.
Mat3 dof_gradient_matrix(const Vec2& grad, int component) {
  Mat3 m = Mat3::Zero();
  m(component, 1) = grad.x();
  m(component, 2) = grad.y();
  return m;
}

Mat3 strain_at(const CrossSection& s, int t, const TriangleQuadPoint& qp, const SkewParam& f, const WarpField& beta) {
  const auto& tri = s.triangles()[t];
  const auto& g = s.basis_gradients(t);
  Mat3 m = Mat3::Zero();
  m.col(0) = cell_first_column(f, qp.point);
  for (int k = 0; k < 3; ++k) {
    const Vec3& b = beta.nodal[tri[k]];
    m.col(1) += b * g[k].x();
    m.col(2) += b * g[k].y();
  }
  return m;
}

constexpr int kConstraints = 9;

}  // namespace

CellProblem::CellProblem(std::shared_ptr<const CrossSection> section, ElasticTensor tensor)
    : section_(std::move(section)), tensor_(tensor) {
  const CrossSection& s = *section_;
  require_normalized(s, "cell problem");
  const int n_dofs = 3 * s.num_vertices();

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(s.num_triangles()) * 81 + 4);
  double diag_scale = 0.0;
  for (int t = 0; t < s.num_triangles(); ++t) {
    const auto& tri = s.triangles()[t];
    const auto& g = s.basis_gradients(t);
    const double area = s.triangle_area(t);
    std::array<Mat3, 9> local;
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 3; ++i) local[3 * k + i] = dof_gradient_matrix(g[k], i);
    for (int p = 0; p < 9; ++p) {
      for (int q = 0; q < 9; ++q) {
        const double v = area * tensor_.bilinear(local[p], local[q]);
        if (v == 0.0) continue;
        triplets.emplace_back(3 * tri[p / 3] + p % 3, 3 * tri[q / 3] + q % 3, v);
        if (p == q) diag_scale = std::max(diag_scale, v);
      }
    }
  }
  stiffness_.resize(n_dofs, n_dofs);
  stiffness_.setFromTriplets(triplets.begin(), triplets.end());

  // Constraint rows, scaled to the magnitude of the stiffness diagonal.
  constraints_ = Eigen::MatrixXd::Zero(kConstraints, n_dofs);
  for (int t = 0; t < s.num_triangles(); ++t) {
    const auto& tri = s.triangles()[t];
    const auto& g = s.basis_gradients(t);
    const double area = s.triangle_area(t);
    for (int k = 0; k < 3; ++k) {
      for (int i = 0; i < 3; ++i) {
        const int dof = 3 * tri[k] + i;
        constraints_(i, dof) += area / 3.0;
        constraints_(3 + i, dof) += area * g[k].x();
        constraints_(6 + i, dof) += area * g[k].y();
      }
    }
  }
  for (int r = 0; r < kConstraints; ++r) {
    const double row_max = constraints_.row(r).cwiseAbs().maxCoeff();
    if (!(row_max > 0.0)) throw MeshError("cell problem: empty constraint row (degenerate mesh)");
    constraints_.row(r) *= diag_scale / row_max;
  }

  // Kernel of K: constant fields and the in-plane rotation (0, -x3, x2).
  // Pin all components at the leftmost vertex and the e3 component at the
  // rightmost one; the 4x4 pin/kernel matrix then has determinant x2b - x2a.
  int a = 0, b = 0;
  for (int n = 1; n < s.num_vertices(); ++n) {
    if (s.vertices()[n].x() < s.vertices()[a].x()) a = n;
    if (s.vertices()[n].x() > s.vertices()[b].x()) b = n;
  }
  if (!(s.vertices()[b].x() > s.vertices()[a].x())) throw MeshError("cell problem: section has no x2 extent");
  pin_dofs_ = {3 * a, 3 * a + 1, 3 * a + 2, 3 * b + 2};
  pin_weight_ = std::sqrt(diag_scale);
  Eigen::SparseMatrix<double> pinned = stiffness_;
  for (int d : pin_dofs_) pinned.coeffRef(d, d) += diag_scale;
  pinned.makeCompressed();
  llt_.compute(pinned);
  if (llt_.info() != Eigen::Success)
    throw MeshError("cell problem: singular stiffness (check for degenerate triangles)");

  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(n_dofs, kConstraints + 4);
  cols.leftCols(kConstraints) = constraints_.transpose();
  for (int k = 0; k < 4; ++k) cols(pin_dofs_[k], kConstraints + k) = pin_weight_;
  coupling_ = llt_.solve(cols);

  // x = z - Y_C l + Y_S m with z = A^{-1} b; then C x = g and S^T x = m.
  Eigen::MatrixXd m(kConstraints + 4, kConstraints + 4);
  for (int j = 0; j < kConstraints + 4; ++j) {
    const double sign = j < kConstraints ? -1.0 : 1.0;
    m.block(0, j, kConstraints, 1) = sign * (constraints_ * coupling_.col(j));
    for (int k = 0; k < 4; ++k) m(kConstraints + k, j) = sign * pin_weight_ * coupling_(pin_dofs_[k], j);
  }
  m.bottomRightCorner(4, 4) -= Eigen::Matrix4d::Identity();
  schur_.compute(m);
  if (!schur_.isInvertible())
    throw MeshError("cell problem: singular constrained system (check for degenerate triangles)");
}

Eigen::VectorXd CellProblem::solve_kkt(const Eigen::VectorXd& b, const Eigen::VectorXd& g, Eigen::VectorXd& l) const {
  const Eigen::VectorXd z = llt_.solve(b);
  Eigen::VectorXd r(kConstraints + 4);
  r.head(kConstraints) = g - constraints_ * z;
  for (int k = 0; k < 4; ++k) r[kConstraints + k] = -pin_weight_ * z[pin_dofs_[k]];
  const Eigen::VectorXd lm = schur_.solve(r);
  l = lm.head(kConstraints);
  return z - coupling_.leftCols(kConstraints) * l + coupling_.rightCols(4) * lm.tail(4);
}

Eigen::VectorXd CellProblem::rhs(const SkewParam& f) const {
  const CrossSection& s = *section_;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(stiffness_.rows());
  for (int t = 0; t < s.num_triangles(); ++t) {
    const auto& tri = s.triangles()[t];
    const auto& g = s.basis_gradients(t);
    for (const auto& qp : s.quadrature(t)) {
      Mat3 m0 = Mat3::Zero();
      m0.col(0) = cell_first_column(f, qp.point);
      const Mat3 e0 = tensor_.apply(m0);
      for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i)
          b[3 * tri[k] + i] -= qp.weight * (e0(i, 1) * g[k].x() + e0(i, 2) * g[k].y());
    }
  }
  return b;
}

CellSolution CellProblem::solve(const SkewParam& f) const {
  const CrossSection& s = *section_;
  const Eigen::VectorXd b = rhs(f);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(kConstraints);
  Eigen::VectorXd l, dl;
  Eigen::VectorXd x = solve_kkt(b, zero, l);
  for (int it = 0; it < 3; ++it) {
    const Eigen::VectorXd rb = b - stiffness_ * x - constraints_.transpose() * l;
    const Eigen::VectorXd rg = -(constraints_ * x);
    if (std::sqrt(rb.squaredNorm() + rg.squaredNorm()) <= 1e-15 * (b.norm() + 1e-300)) break;
    x += solve_kkt(rb, rg, dl);
    l += dl;
  }
  if (!x.allFinite()) throw MeshError("cell problem: solve produced non-finite values");
  CellSolution out;
  out.warp = WarpField::zero(s.num_vertices());
  for (int n = 0; n < s.num_vertices(); ++n) out.warp.nodal[n] = x.segment<3>(3 * n);
  out.energy = energy(f, out.warp);
  out.constraint_residual = class_residual(s, out.warp).max_abs();
  return out;
}

double CellProblem::energy(const SkewParam& f, const WarpField& beta) const {
  const CrossSection& s = *section_;
  double sum = 0.0;
  for (int t = 0; t < s.num_triangles(); ++t)
    for (const auto& qp : s.quadrature(t)) sum += qp.weight * tensor_.quadratic(strain_at(s, t, qp, f, beta));
  return sum;
}

StressField CellProblem::stress(const SkewParam& f, const WarpField& beta) const {
  const CrossSection& s = *section_;
  StressField out;
  out.values.reserve(static_cast<std::size_t>(s.num_triangles()) * 3);
  for (int t = 0; t < s.num_triangles(); ++t)
    for (const auto& qp : s.quadrature(t)) out.values.push_back(tensor_.apply(strain_at(s, t, qp, f, beta)));
  return out;
}

ReducedStiffness CellProblem::reduced_stiffness() const {
  const CrossSection& s = *section_;
  const std::array<SkewParam, 3> units{SkewParam{1, 0, 0}, SkewParam{0, 1, 0}, SkewParam{0, 0, 1}};
  std::array<WarpField, 3> basis;
  for (int i = 0; i < 3; ++i) basis[i] = solve(units[i]).warp;

  Mat3 q1 = Mat3::Zero();
  for (int t = 0; t < s.num_triangles(); ++t) {
    for (const auto& qp : s.quadrature(t)) {
      std::array<Mat3, 3> m;
      for (int i = 0; i < 3; ++i) m[i] = strain_at(s, t, qp, units[i], basis[i]);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) q1(i, j) += qp.weight * tensor_.bilinear(m[i], m[j]);
    }
  }
  ReducedStiffness out;
  out.E_mod = young_modulus(tensor_);
  out.Q1 = 0.5 * (q1 + q1.transpose());
  out.warp_basis = basis;
  out.section = section_;
  out.tensor = tensor_;
  out.validate();
  return out;
}

CellSolution solve_cell(const SkewParam& f, const CrossSection& s, const ElasticTensor& tensor) {
  if (!std::isfinite(f.a) || !std::isfinite(f.b) || !std::isfinite(f.c))
    throw InputError("solve_cell: non-finite skew parameter");
  const CellProblem problem(std::make_shared<const CrossSection>(s), tensor);
  return problem.solve(f);
}

ReducedStiffness q1_matrix(const CrossSection& s, const ElasticTensor& tensor) {
  const CellProblem problem(std::make_shared<const CrossSection>(s), tensor);
  return problem.reduced_stiffness();
}

double verify_neumann(const CrossSection& s, const StressField& stress) {
  if (stress.values.size() != static_cast<std::size_t>(s.num_triangles()) * 3)
    throw InputError("verify_neumann: stress field does not match the section quadrature");
  std::vector<Vec3> residual(s.num_vertices(), Vec3::Zero());
  double norm_sq = 0.0;
  std::size_t idx = 0;
  for (int t = 0; t < s.num_triangles(); ++t) {
    const auto& tri = s.triangles()[t];
    const auto& g = s.basis_gradients(t);
    for (const auto& qp : s.quadrature(t)) {
      const Mat3& e = stress.values[idx++];
      norm_sq += qp.weight * e.squaredNorm();
      for (int k = 0; k < 3; ++k) residual[tri[k]] += qp.weight * (e.col(1) * g[k].x() + e.col(2) * g[k].y());
    }
  }
  if (norm_sq == 0.0) return 0.0;
  double r_sq = 0.0;
  for (const auto& r : residual) r_sq += r.squaredNorm();
  return std::sqrt(r_sq) / std::sqrt(norm_sq);
}

}  // namespace rodlim
