#pragma once

#include "rodlim/cross_section.hpp"
#include "rodlim/loads.hpp"
#include "rodlim/material.hpp"

#include <Eigen/Sparse>

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace rodlim {

/// Finite-thickness problem on the rescaled domain (0, L) x S.
struct BeamConfig {
  double h = 0.1;
  double alpha = 3.0;
  double length = 1.0;
  RodLoads loads;
  int axial_elems = 16;
  /// 1: linear axial shape functions, 2: quadratic (default).
  int axial_order = 2;
  std::shared_ptr<const CrossSection> section;
  StoredEnergy material{EnergyFamily::CompressibleNeoHookean, IsotropicModuli{}};
  int threads = 1;

  /// Throws InputError on invalid parameters or a non-normalized section.
  void validate() const;
};

/// Tensor product of a uniform axial grid with the section triangulation.
/// Node (i, v) has index i * section_nodes + v; axial nodes include the
/// element midpoints when axial_order = 2.
class BeamMesh {
 public:
  explicit BeamMesh(const BeamConfig& config);

  int axial_order() const { return order_; }
  int axial_elems() const { return elems_; }
  int axial_nodes() const { return static_cast<int>(x_.size()); }
  int section_nodes() const { return section_->num_vertices(); }
  int num_nodes() const { return axial_nodes() * section_nodes(); }
  /// Unknowns exclude the clamped face i = 0.
  int num_free_dofs() const { return 3 * (axial_nodes() - 1) * section_nodes(); }
  int node(int i, int v) const { return i * section_nodes() + v; }
  double axial_x(int i) const { return x_[i]; }
  const std::vector<double>& axial_grid() const { return x_; }
  double spacing() const { return length_ / elems_; }
  double length() const { return length_; }
  const CrossSection& section() const { return *section_; }
  double h() const { return h_; }

  /// Reference position y0 = (x1, h x2, h x3).
  Vec3 reference_position(int node) const;

 private:
  std::shared_ptr<const CrossSection> section_;
  std::vector<double> x_;
  double length_;
  double h_;
  int order_;
  int elems_;
};

/// Nodal deformation stored as the displacement d = y - y0, so that small
/// strains are not lost to cancellation against the O(1) reference map.
struct DeformationField {
  std::vector<Vec3> displacement;

  static DeformationField reference(const BeamMesh& mesh);
  Vec3 position(const BeamMesh& mesh, int node) const {
    return mesh.reference_position(node) + displacement[node];
  }
  /// Free unknowns in node-major order (clamped face omitted).
  Eigen::VectorXd free_vector(const BeamMesh& mesh) const;
  static DeformationField from_free_vector(const BeamMesh& mesh, const Eigen::VectorXd& free);
  bool satisfies_clamp(const BeamMesh& mesh) const;
};

struct EnergyValue {
  ExtendedReal total;        ///< elastic - load work, or the +inf sentinel
  double elastic = 0.0;      ///< int W(grad_h y)
  double load_work = 0.0;    ///< h^alpha int (f2 y2 + f3 y3)
  double magnitude = 0.0;    ///< sum of |quadrature contributions| (roundoff scale)
  double min_det = 0.0;      ///< min det grad_h y over quadrature points
};

/// Energy, gradient and Hessian of the rescaled functional
///   J^h(y) = int W(grad_h y) - h^alpha int (f2 y2 + f3 y3),
///   grad_h y = (d1 y | d2 y / h | d3 y / h).
/// Element loops are split into contiguous chunks over `threads` workers and
/// reduced in chunk order (bitwise reproducible for a fixed thread count).
class BeamProblem {
 public:
  explicit BeamProblem(BeamConfig config);

  const BeamConfig& config() const { return config_; }
  const BeamMesh& mesh() const { return mesh_; }

  EnergyValue energy(const DeformationField& y) const;
  /// Gradient with respect to the free unknowns; throws DomainError if y is inadmissible.
  Eigen::VectorXd gradient(const DeformationField& y) const;
  /// Upper and lower triangle, free unknowns.
  Eigen::SparseMatrix<double> hessian(const DeformationField& y) const;

  /// int W(grad_h y) for arbitrary nodal positions (no clamp requirement).
  ExtendedReal elastic_energy_of_positions(const std::vector<Vec3>& positions) const;

  /// Quadrature points: axial stations (Gauss points per element) x section points.
  int num_stations() const;
  double station_x(int k) const;
  double station_weight(int k) const;
  /// grad_h y at station k, section quadrature point q (triangle-major).
  Mat3 gradient_at(const DeformationField& y, int station, int q) const;
  /// Displacement gradient grad_h y - Id at the same point.
  Mat3 displacement_gradient_at(const DeformationField& y, int station, int q) const;
  Vec3 position_at(const DeformationField& y, int station, int q) const;
  int section_points() const { return 3 * mesh_.section().num_triangles(); }
  double section_weight(int q) const;
  Vec2 section_point(int q) const;

 private:
  struct AxialShape {
    std::array<double, 3> n{};
    std::array<double, 3> dn{};  // d/dx1
  };
  /// Shape data of one prism at one quadrature point.
  struct PointShapes {
    int count = 0;
    std::array<int, 9> node{};
    std::array<double, 9> n{};
    std::array<Vec3, 9> grad{};  // (d1 N, d2 N / h, d3 N / h)
  };
  AxialShape axial_shape(int gauss) const;
  /// Prism (axial element e, triangle t) at axial Gauss point g, triangle point qi.
  void prism_shapes(int e, int t, int g, int qi, PointShapes& ps) const;
  int axial_node(int elem, int local) const { return elem * mesh_.axial_order() + local; }
  template <class Fn>
  void for_chunks(int n_items, Fn&& fn) const;

  BeamConfig config_;
  BeamMesh mesh_;
  int gauss_points_;
};

struct MinimizeOptions {
  /// Converged when ||g|| <= max(tol ||g0||, floor_factor eps || |K| |x| ||):
  /// the second term is the gradient change caused by rounding the unknowns x
  /// themselves (K the Hessian), below which no iterate can improve.
  double tol = 1e-9;
  double floor_factor = 1.0;
  int max_iterations = 60;
  int max_backtracks = 40;
  /// Called after every accepted step with (iteration, energy, ||g||, step length).
  std::function<void(int, double, double, double)> monitor;
};

struct MinimizeResult {
  DeformationField field;
  EnergyValue energy;
  double scaling_ratio = 0.0;  ///< int W(grad_h y) / h^(2 alpha - 2)
  double grad_norm = 0.0;
  double grad_norm0 = 0.0;
  double roundoff_floor = 0.0;  ///< floor_factor eps || |K| |x| || at the last Hessian evaluation
  double min_det_accepted = 1.0;  ///< smallest det over all accepted iterates
  int iterations = 0;
  int shifted_factorizations = 0;

  /// ||g|| / ||g0|| (0 when g0 = 0).
  double stationarity() const { return grad_norm0 > 0.0 ? grad_norm / grad_norm0 : 0.0; }
};

/// Newton descent with backtracking; trial states with det grad_h y <= 0
/// evaluate to +inf and are rejected. Throws ConvergenceError on failure.
MinimizeResult minimize(const BeamProblem& problem, const DeformationField& start,
                        const MinimizeOptions& options = {});
MinimizeResult minimize(const BeamProblem& problem, const MinimizeOptions& options = {});

/// Scaled displacement and twist per axial node.
struct Observables {
  std::vector<double> x, u, v2, v3, w;
  double energy = 0.0;
  double stationarity_residual = 0.0;
};

Observables extract_observables(const BeamProblem& problem, const DeformationField& y);

/// Limit fields used to build ansatz deformations.
struct RodFields {
  std::function<double(double)> u, v2, v3, w, dv2, dv3;
};

/// d1 = s_u u - h^(alpha-1) (x2 v2' + x3 v3'),
/// d2 = h^(alpha-2) v2 - h^(alpha-1) x3 w,
/// d3 = h^(alpha-2) v3 + h^(alpha-1) x2 w,
/// with s_u = h^(alpha-1) for alpha >= 3 and h^(2(alpha-2)) otherwise.
DeformationField ansatz_deformation(const BeamMesh& mesh, double alpha, const RodFields& fields);

/// Piecewise-linear interpolation of previously extracted observables,
/// slopes by finite differences (warm start across an h-ladder).
RodFields rod_fields_from_observables(const Observables& obs);

struct RotationFit {
  std::vector<double> x;
  std::vector<Mat3> rotations;
  std::vector<bool> flagged;  ///< rank-deficient averaged gradient
  double distance_l2 = 0.0;   ///< ||grad_h y - R||_L2(Omega)
  double derivative_l2 = 0.0; ///< ||R'||_L2 by finite differences between stations
  double deviation_linf = 0.0; ///< max |R - Id|
  double orthogonality_defect = 0.0;  ///< max |R^T R - Id|, |det R - 1|
};

/// R(x1) = polar factor of the section average of grad_h y at each axial station.
RotationFit fit_rotations(const BeamProblem& problem, const DeformationField& y);

struct MomentCurves {
  std::vector<double> x;
  std::vector<Mat3> mean, first_x2, first_x3;  ///< <E>, E~, E^ per station
  double mean_l2 = 0.0;       ///< ||<E>||_L2(0,L)
  double first_l2 = 0.0;      ///< ||(E~, E^)||_L2(0,L)
  double strain_l2 = 0.0;     ///< ||G||_L2(Omega)
  double symmetry_defect = 0.0;  ///< ||E - E^T|| / ||E|| over Omega (0 for E = 0)
};

/// G = (R^T grad_h y - Id) / h^(alpha-1), E = DW(Id + h^(alpha-1) G)(Id + h^(alpha-1) G)^T / h^(alpha-1).
MomentCurves strain_stress_moments(const BeamProblem& problem, const DeformationField& y, const RotationFit& fit);

/// Outer-variation residuals for five fixed maps phi (all vanishing on z1 = 0):
/// z1 e1, z1 e2, z1 e3, z1^2 e2, z1 (z2 e3 - z3 e2). Each entry is
/// |int DW F^T : grad phi(y) - int f^h . phi(y)| divided by the sum of the
/// absolute values of both integrals (0 when both vanish).
std::array<double, 5> outer_variation_residuals(const BeamProblem& problem, const DeformationField& y);

/// ||y - x1 e1||_W1,2(Omega) with the unscaled gradient.
double distance_to_centerline(const BeamProblem& problem, const DeformationField& y);

/// Little-endian binary file:
///   char[8] "RLDEFRM1", uint32 axial_nodes, uint32 section_nodes,
///   float64 h, float64 alpha, then axial_nodes * section_nodes * 3
///   float64 positions y (node-major, index i * section_nodes + v).
void write_deformation(const std::string& path, const BeamMesh& mesh, double alpha, const DeformationField& y);
struct DeformationFile {
  int axial_nodes = 0;
  int section_nodes = 0;
  double h = 0.0;
  double alpha = 0.0;
  std::vector<Vec3> positions;
};
DeformationFile read_deformation(const std::string& path);

}  // namespace rodlim
