#pragma once

#include "rodlim/cell_problem.hpp"
#include "rodlim/loads.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rodlim {

enum class Regime {
  SubCritical,   ///< 2 < alpha < 3: constrained linear theory
  Critical,      ///< alpha = 3: von Karman-type rod
  SuperCritical  ///< alpha > 3: linear rod
};

std::string to_string(Regime r);

class AlphaRegime {
 public:
  /// Classifies alpha; throws InputError unless alpha > 2.
  explicit AlphaRegime(double alpha);
  /// Throws InputError if regime does not match alpha.
  static AlphaRegime checked(Regime regime, double alpha);

  Regime regime() const { return regime_; }
  double alpha() const { return alpha_; }

 private:
  Regime regime_;
  double alpha_;
};

/// One-dimensional rod fields on a uniform grid of (0, L).
///
/// v2, v3 are cubic Hermite (nodal value + slope), w is P1. u has two
/// representations:
///   Nodal       P1 interpolation of the nodal values;
///   Inextensible  P1 correction on top of the exact primitive
///                 P(x) = -1/2 int_0^x (v2'^2 + v3'^2); the recovered u is
///                 P itself (nodal values equal P at the nodes).
struct RodState {
  enum class UKind { Nodal, Inextensible };

  double length = 1.0;
  std::vector<double> x;
  std::vector<double> u, v2, v2p, v3, v3p, w;
  UKind u_kind = UKind::Nodal;

  static RodState zero(double length, int n_nodes);

  int num_nodes() const { return static_cast<int>(x.size()); }
  int num_elements() const { return num_nodes() - 1; }
  double spacing() const { return length / num_elements(); }
  int element_of(double x1) const;

  /// Component k = 2 or 3.
  double v(int k, double x1) const;
  double dv(int k, double x1) const;
  double ddv(int k, double x1) const;
  double w_at(double x1) const;
  double dw(double x1) const;
  double u_at(double x1) const;
  double du(double x1) const;

  /// Curvature vector kappa = (v2'', v3'', w').
  Vec3 kappa(double x1) const { return {ddv(2, x1), ddv(3, x1), dw(x1)}; }
  bool satisfies_clamp(double tol = 0.0) const;
};

struct CurvatureMatrices {
  Mat3 A;        ///< entries A21 = v2', A31 = v3', A32 = w
  Mat3 A_prime;  ///< same pattern with (v2'', v3'', w')
};

CurvatureMatrices curvature_matrix(const RodState& state, double x1);

/// Feasibility tolerance (L2) of the inextensibility constraint for 2 < alpha < 3.
inline constexpr double kSubCriticalFeasibilityTol = 1e-8;

/// Limit energy J_alpha; integrals use 5-point Gauss per element (exact for
/// the Hermite/P1 integrands with polynomial loads up to degree 5).
ExtendedReal energy_alpha(const RodState& state, const AlphaRegime& regime, const ReducedStiffness& stiffness,
                          const RodLoads& loads);

/// ||u' + 1/2 (v2'^2 + v3'^2)||_L2 and ||u'||_L2.
double stretch_residual(const RodState& state);
double axial_strain_norm(const RodState& state);

struct RodSolveOptions {
  /// Optional permutation of element indices used during assembly.
  std::vector<int> element_order;
};

/// Unique stationary point of J_alpha: clamped at x1 = 0, free at x1 = L.
RodState solve_equilibrium(const AlphaRegime& regime, const ReducedStiffness& stiffness, const RodLoads& loads,
                           double length, int n_nodes, const RodSolveOptions& options = {});

/// u = -1/2 int (v2'^2 + v3'^2) for alpha <= 3 (exact, Inextensible kind); u = 0 for alpha > 3.
RodState recover_u(const RodState& state, const AlphaRegime& regime);

/// Section moments of the limit stress at a station.
struct MomentSample {
  double E11_tilde = 0.0;  ///< int x2 E11
  double E11_hat = 0.0;    ///< int x3 E11
  double E12_tilde = 0.0;  ///< int x2 E12
  double E13_hat = 0.0;    ///< int x3 E13
  double E13_tilde = 0.0;  ///< int x2 E13
  double E12_hat = 0.0;    ///< int x3 E12
  /// Twist moment E13_tilde - E12_hat, equal to (Q1 kappa)_3.
  double twist() const { return E13_tilde - E12_hat; }
};

/// Evaluates E = L(x2 A'e2 + x3 A'e3 | d2 beta | d3 beta) from the warp basis
/// (by linearity in the curvature) and integrates it over the section.
class StressMoments1D {
 public:
  StressMoments1D(const RodState& state, const ReducedStiffness& stiffness);
  MomentSample operator()(double x1) const;
  /// Moments for a given curvature (a, b, c) = (v2'', v3'', w').
  MomentSample at_curvature(const Vec3& kappa) const;

 private:
  const RodState* state_;
  const ReducedStiffness* stiffness_;
};

StressMoments1D stress_moments_1d(const RodState& state, const ReducedStiffness& stiffness);

/// Moments from the algebraic identities E11~ = -(Q1 k)_1, E11^ = -(Q1 k)_2,
/// E13~ - E12^ = (Q1 k)_3 (no warp basis required).
MomentSample generalized_moments(const ReducedStiffness& stiffness, const Vec3& kappa);

struct ElResidualReport {
  double eq2a = 0.0;  ///< weak residual of E11~'' + f2 = 0 with free-end conditions
  double eq2b = 0.0;  ///< weak residual of E11^'' + f3 = 0
  double eq3 = 0.0;   ///< weak residual of (E13~ - E12^)' = 0, (E13~ - E12^)(L) = 0
  std::optional<double> eq3_literal;  ///< same test applied to E12~ - E13^ (warp route only)
  double eq2a_abs = 0.0, eq2b_abs = 0.0, eq3_abs = 0.0;
  double scale = 0.0;        ///< common normalization of the relative residuals
  double load_norm_f2 = 0.0;  ///< ||int f2 phi_i|| over free Hermite test functions
  double eq1a = 0.0;         ///< ||u' + 1/2 |v'|^2||_L2
  double eq1b = 0.0;         ///< ||u'||_L2
  std::string moment_route;  ///< "warp_basis" or "q1_identity"

  double max_el() const;
};

ElResidualReport el_residuals(const RodState& state, const ReducedStiffness& stiffness, const RodLoads& loads);

}  // namespace rodlim
