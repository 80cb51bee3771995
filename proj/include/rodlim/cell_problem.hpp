#pragma once

#include "rodlim/cross_section.hpp"
#include "rodlim/material.hpp"

#include <Eigen/Sparse>
#include <Eigen/Dense>

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rodlim {

/// Skew-symmetric 3x3 matrix in (a, b, c) coordinates:
///
///     F = [[0, -a, -b],
///          [a,  0, -c],
///          [b,  c,  0]]
///
/// a = v2'' (bending), b = v3'' (bending), c = w' (twist rate).
/// The cell-problem first column is x2 F e2 + x3 F e3 = (-a x2 - b x3, -c x3, c x2);
/// every moment formula in this library uses that convention.
struct SkewParam {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  Mat3 matrix() const;
  static SkewParam from_matrix(const Mat3& skew);
  Vec3 vector() const { return {a, b, c}; }
  static SkewParam from_vector(const Vec3& v) { return {v[0], v[1], v[2]}; }
};

/// x2 F e2 + x3 F e3 at a section point.
Vec3 cell_first_column(const SkewParam& f, const Vec2& x);

/// P1 warping field beta: S -> R^3, nodal values.
struct WarpField {
  std::vector<Vec3> nodal;

  static WarpField zero(int num_nodes) { return {std::vector<Vec3>(num_nodes, Vec3::Zero())}; }
  WarpField operator+(const WarpField& other) const;
  WarpField operator*(double s) const;
};

/// Integral constraints defining the admissible class: int beta, int d2 beta, int d3 beta.
struct ClassResidual {
  Vec3 mean = Vec3::Zero();
  Vec3 mean_d2 = Vec3::Zero();
  Vec3 mean_d3 = Vec3::Zero();
  double max_abs() const;
};

ClassResidual class_residual(const CrossSection& s, const WarpField& beta);
/// Removes mean and mean gradients (exact projection onto the admissible class).
WarpField project_admissible(const CrossSection& s, const WarpField& beta);

/// Stress E = L(x2 F e2 + x3 F e3 | d2 beta | d3 beta) sampled at every
/// section quadrature point (triangle-major, 3 points per triangle).
struct StressField {
  std::vector<Mat3> values;
};

/// Relaxed rod constants: E_mod and the 3x3 matrix of Q1 over (a, b, c).
struct ReducedStiffness {
  double E_mod = 0.0;
  Mat3 Q1 = Mat3::Zero();
  /// Warp fields for unit a, b, c; absent for stiffness loaded from file or built by hand.
  std::optional<std::array<WarpField, 3>> warp_basis;
  std::shared_ptr<const CrossSection> section;
  std::optional<ElasticTensor> tensor;

  double quadratic(const SkewParam& f) const { return f.vector().dot(Q1 * f.vector()); }
  bool has_warp_basis() const { return warp_basis.has_value() && section != nullptr && tensor.has_value(); }

  /// Throws InputError unless E_mod > 0 and Q1 is symmetric positive definite.
  void validate() const;
  /// Diagonal stiffness without warp basis (for tests and synthetic runs).
  static ReducedStiffness diagonal(double e_mod, double bend2, double bend3, double torsion);
};

/// E = min over a, b of Q3(e1 | a | b); solved via the 6x6 normal equations.
double young_modulus(const ElasticTensor& tensor);

struct CellSolution {
  WarpField warp;
  double energy = 0.0;
  double constraint_residual = 0.0;  ///< max |class constraint| of the returned field
};

/// Discrete cell problem on a normalized section: minimizes
///   G_F(beta) = int_S Q3(x2 F e2 + x3 F e3 | d2 beta | d3 beta)
/// over P1 fields subject to the nine class constraints, enforced with
/// Lagrange multipliers. The constraint rows are dense, so the saddle system
/// is not factorized directly: the 4-dim kernel (constants, in-plane
/// rotation) is pinned by a sparse rank-4 term, K + S S^T gets a sparse
/// Cholesky factorization, and multipliers and pins come from a 13x13 Schur
/// system. Everything is computed once and reused for every F.
class CellProblem {
 public:
  CellProblem(std::shared_ptr<const CrossSection> section, ElasticTensor tensor);

  CellSolution solve(const SkewParam& f) const;
  double energy(const SkewParam& f, const WarpField& beta) const;
  StressField stress(const SkewParam& f, const WarpField& beta) const;
  ReducedStiffness reduced_stiffness() const;

  const CrossSection& section() const { return *section_; }
  const ElasticTensor& tensor() const { return tensor_; }

 private:
  Eigen::VectorXd rhs(const SkewParam& f) const;
  // Solves [K C^T; C 0][x; l] = [b; g].
  Eigen::VectorXd solve_kkt(const Eigen::VectorXd& b, const Eigen::VectorXd& g, Eigen::VectorXd& l) const;

  std::shared_ptr<const CrossSection> section_;
  ElasticTensor tensor_;
  Eigen::SparseMatrix<double> stiffness_;
  Eigen::MatrixXd constraints_;      // 9 x n, scaled to the stiffness diagonal
  std::array<int, 4> pin_dofs_{};
  double pin_weight_ = 0.0;          // S = pin_weight * unit vectors at pin_dofs
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
  Eigen::MatrixXd coupling_;         // (K + S S^T)^{-1} [C^T S]
  Eigen::FullPivLU<Eigen::MatrixXd> schur_;
};

CellSolution solve_cell(const SkewParam& f, const CrossSection& s, const ElasticTensor& tensor);
ReducedStiffness q1_matrix(const CrossSection& s, const ElasticTensor& tensor);

/// Weak-form residual of div(E e2 | E e3) = 0 with natural boundary
/// condition, tested against every P1 basis function, divided by ||E||_L2.
/// Zero field gives exactly 0.
double verify_neumann(const CrossSection& s, const StressField& stress);

}  // namespace rodlim
