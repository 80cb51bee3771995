#include "rodlim/rod_model.hpp"

#include "rodlim/quadrature.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <numeric>

namespace rodlim {

std::string to_string(Regime r) {
  switch (r) {
    case Regime::SubCritical:
      return "subcritical";
    case Regime::Critical:
      return "critical";
    case Regime::SuperCritical:
      return "supercritical";
  }
  return "unknown";
}

AlphaRegime::AlphaRegime(double alpha) : alpha_(alpha) {
  if (!(std::isfinite(alpha) && alpha > 2.0)) throw InputError("alpha must be finite and > 2");
  regime_ = alpha < 3.0 ? Regime::SubCritical : (alpha == 3.0 ? Regime::Critical : Regime::SuperCritical);
}

AlphaRegime AlphaRegime::checked(Regime regime, double alpha) {
  AlphaRegime r(alpha);
  if (r.regime() != regime)
    throw InputError("regime " + to_string(regime) + " is inconsistent with alpha = " + std::to_string(alpha));
  return r;
}

// ---------------------------------------------------------------------------

namespace {

struct Hermite {
  std::array<double, 4> n, d, dd;  // value, d/dx, d2/dx2 of (v_a, v'_a, v_b, v'_b) shapes
};

Hermite hermite(double s, double dx) {
  Hermite h;
  const double s2 = s * s, s3 = s2 * s;
  h.n = {1 - 3 * s2 + 2 * s3, dx * (s - 2 * s2 + s3), 3 * s2 - 2 * s3, dx * (-s2 + s3)};
  h.d = {(-6 * s + 6 * s2) / dx, 1 - 4 * s + 3 * s2, (6 * s - 6 * s2) / dx, -2 * s + 3 * s2};
  h.dd = {(-6 + 12 * s) / (dx * dx), (-4 + 6 * s) / dx, (6 - 12 * s) / (dx * dx), (-2 + 6 * s) / dx};
  return h;
}

struct Local {
  int e;
  double s;
};

const std::vector<double>& values_of(const RodState& st, int k) {
  if (k == 2) return st.v2;
  if (k == 3) return st.v3;
  throw InputError("rod state: component must be 2 or 3");
}
const std::vector<double>& slopes_of(const RodState& st, int k) { return k == 2 ? st.v2p : st.v3p; }

// -1/2 int_{x_e}^{x_e + s dx} |v'|^2 (exact: integrand of degree 4).
double primitive_piece(const RodState& st, int e, double s) {
  if (s == 0.0) return 0.0;
  const double dx = st.spacing();
  double sum = 0.0;
  for (const auto& g : quadrature::gauss(3)) {
    const double x1 = st.x[e] + g.s * s * dx;
    const double a = st.dv(2, x1), b = st.dv(3, x1);
    sum += g.w * (a * a + b * b);
  }
  return -0.5 * sum * s * dx;
}

}  // namespace

RodState RodState::zero(double length, int n_nodes) {
  if (!(length > 0.0)) throw InputError("rod: length must be > 0");
  if (n_nodes < 2) throw InputError("rod: need at least 2 nodes");
  RodState st;
  st.length = length;
  st.x.resize(n_nodes);
  for (int i = 0; i < n_nodes; ++i) st.x[i] = length * i / (n_nodes - 1);
  st.u.assign(n_nodes, 0.0);
  st.v2 = st.v2p = st.v3 = st.v3p = st.w = st.u;
  return st;
}

int RodState::element_of(double x1) const {
  const int e = static_cast<int>(std::floor(x1 / spacing()));
  return std::clamp(e, 0, num_elements() - 1);
}

double RodState::v(int k, double x1) const {
  const auto& val = values_of(*this, k);
  const auto& slo = slopes_of(*this, k);
  const int e = element_of(x1);
  const Hermite h = hermite((x1 - x[e]) / spacing(), spacing());
  return h.n[0] * val[e] + h.n[1] * slo[e] + h.n[2] * val[e + 1] + h.n[3] * slo[e + 1];
}

double RodState::dv(int k, double x1) const {
  const auto& val = values_of(*this, k);
  const auto& slo = slopes_of(*this, k);
  const int e = element_of(x1);
  const Hermite h = hermite((x1 - x[e]) / spacing(), spacing());
  return h.d[0] * val[e] + h.d[1] * slo[e] + h.d[2] * val[e + 1] + h.d[3] * slo[e + 1];
}

double RodState::ddv(int k, double x1) const {
  const auto& val = values_of(*this, k);
  const auto& slo = slopes_of(*this, k);
  const int e = element_of(x1);
  const Hermite h = hermite((x1 - x[e]) / spacing(), spacing());
  return h.dd[0] * val[e] + h.dd[1] * slo[e] + h.dd[2] * val[e + 1] + h.dd[3] * slo[e + 1];
}

double RodState::w_at(double x1) const {
  const int e = element_of(x1);
  const double s = (x1 - x[e]) / spacing();
  return (1.0 - s) * w[e] + s * w[e + 1];
}

double RodState::dw(double x1) const {
  const int e = element_of(x1);
  return (w[e + 1] - w[e]) / spacing();
}

double RodState::u_at(double x1) const {
  const int e = element_of(x1);
  const double s = (x1 - x[e]) / spacing();
  const double linear = (1.0 - s) * u[e] + s * u[e + 1];
  if (u_kind == UKind::Nodal) return linear;
  return linear + primitive_piece(*this, e, s) - s * primitive_piece(*this, e, 1.0);
}

double RodState::du(double x1) const {
  const int e = element_of(x1);
  const double slope = (u[e + 1] - u[e]) / spacing();
  if (u_kind == UKind::Nodal) return slope;
  const double a = dv(2, x1), b = dv(3, x1);
  return slope - 0.5 * (a * a + b * b) - primitive_piece(*this, e, 1.0) / spacing();
}

bool RodState::satisfies_clamp(double tol) const {
  return std::abs(u[0]) <= tol && std::abs(v2[0]) <= tol && std::abs(v3[0]) <= tol && std::abs(v2p[0]) <= tol &&
         std::abs(v3p[0]) <= tol && std::abs(w[0]) <= tol;
}

CurvatureMatrices curvature_matrix(const RodState& state, double x1) {
  CurvatureMatrices out;
  const double a = state.dv(2, x1), b = state.dv(3, x1), c = state.w_at(x1);
  out.A = SkewParam{a, b, c}.matrix();
  out.A_prime = SkewParam::from_vector(state.kappa(x1)).matrix();
  return out;
}

// ---------------------------------------------------------------------------

namespace {

template <class Fn>
double integrate_rod(const RodState& st, Fn&& fn) {
  double sum = 0.0;
  const double dx = st.spacing();
  for (int e = 0; e < st.num_elements(); ++e)
    for (const auto& g : quadrature::gauss(5)) sum += g.w * dx * fn(st.x[e] + g.s * dx);
  return sum;
}

}  // namespace

double stretch_residual(const RodState& st) {
  return std::sqrt(integrate_rod(st, [&](double x1) {
    const double a = st.dv(2, x1), b = st.dv(3, x1);
    const double r = st.du(x1) + 0.5 * (a * a + b * b);
    return r * r;
  }));
}

double axial_strain_norm(const RodState& st) {
  return std::sqrt(integrate_rod(st, [&](double x1) {
    const double r = st.du(x1);
    return r * r;
  }));
}

ExtendedReal energy_alpha(const RodState& st, const AlphaRegime& regime, const ReducedStiffness& stiffness,
                          const RodLoads& loads) {
  if (!st.satisfies_clamp(1e-14)) throw InputError("energy_alpha: state violates the clamped-end conditions");
  double stretch = 0.0;
  switch (regime.regime()) {
    case Regime::SubCritical:
      if (stretch_residual(st) > kSubCriticalFeasibilityTol) return ExtendedReal::infinity();
      break;
    case Regime::Critical:
      stretch = 0.5 * stiffness.E_mod * std::pow(stretch_residual(st), 2);
      break;
    case Regime::SuperCritical:
      stretch = 0.5 * stiffness.E_mod * std::pow(axial_strain_norm(st), 2);
      break;
  }
  const double bending = 0.5 * integrate_rod(st, [&](double x1) {
    const Vec3 k = st.kappa(x1);
    return k.dot(stiffness.Q1 * k);
  });
  const double work = integrate_rod(st, [&](double x1) { return loads.f2(x1) * st.v(2, x1) + loads.f3(x1) * st.v(3, x1); });
  return stretch + bending - work;
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kDofsPerNode = 5;  // v2, v2', v3, v3', w

// Strain-displacement row block: kappa = B d_local, d_local ordered per node.
Eigen::Matrix<double, 3, 10> curvature_operator(double s, double dx) {
  const Hermite h = hermite(s, dx);
  Eigen::Matrix<double, 3, 10> b = Eigen::Matrix<double, 3, 10>::Zero();
  for (int node = 0; node < 2; ++node) {
    const int o = kDofsPerNode * node;
    b(0, o + 0) = h.dd[2 * node];
    b(0, o + 1) = h.dd[2 * node + 1];
    b(1, o + 2) = h.dd[2 * node];
    b(1, o + 3) = h.dd[2 * node + 1];
    b(2, o + 4) = node == 0 ? -1.0 / dx : 1.0 / dx;
  }
  return b;
}

}  // namespace

RodState solve_equilibrium(const AlphaRegime& regime, const ReducedStiffness& stiffness, const RodLoads& loads,
                           double length, int n_nodes, const RodSolveOptions& options) {
  if (n_nodes < 4) throw InputError("solve_equilibrium: n_nodes must be >= 4");
  stiffness.validate();
  RodState st = RodState::zero(length, n_nodes);
  const int n_el = st.num_elements();
  const double dx = st.spacing();
  const int n_free = kDofsPerNode * (n_nodes - 1);

  std::vector<int> order = options.element_order;
  if (order.empty()) {
    order.resize(n_el);
    std::iota(order.begin(), order.end(), 0);
  }
  {
    std::vector<int> check = order;
    std::sort(check.begin(), check.end());
    for (int e = 0; e < n_el; ++e)
      if (static_cast<int>(check.size()) != n_el || check[e] != e)
        throw InputError("solve_equilibrium: element_order is not a permutation");
  }

  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_free);
  for (int e : order) {
    Eigen::Matrix<double, 10, 10> ke = Eigen::Matrix<double, 10, 10>::Zero();
    Eigen::Matrix<double, 10, 1> fe = Eigen::Matrix<double, 10, 1>::Zero();
    for (const auto& g : quadrature::gauss(5)) {
      const auto b = curvature_operator(g.s, dx);
      ke += g.w * dx * b.transpose() * stiffness.Q1 * b;
      const Hermite h = hermite(g.s, dx);
      const double x1 = st.x[e] + g.s * dx;
      const double f2 = loads.f2(x1), f3 = loads.f3(x1);
      for (int node = 0; node < 2; ++node) {
        const int o = kDofsPerNode * node;
        fe[o + 0] += g.w * dx * f2 * h.n[2 * node];
        fe[o + 1] += g.w * dx * f2 * h.n[2 * node + 1];
        fe[o + 2] += g.w * dx * f3 * h.n[2 * node];
        fe[o + 3] += g.w * dx * f3 * h.n[2 * node + 1];
      }
    }
    // Global free index: node 0 is fully clamped.
    std::array<int, 10> map;
    for (int l = 0; l < 10; ++l) {
      const int node = e + l / kDofsPerNode;
      map[l] = node == 0 ? -1 : kDofsPerNode * (node - 1) + l % kDofsPerNode;
    }
    for (int p = 0; p < 10; ++p) {
      if (map[p] < 0) continue;
      rhs[map[p]] += fe[p];
      for (int q = 0; q < 10; ++q)
        if (map[q] >= 0 && ke(p, q) != 0.0) triplets.emplace_back(map[p], map[q], ke(p, q));
    }
  }
  Eigen::SparseMatrix<double> k(n_free, n_free);
  k.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(k);
  if (ldlt.info() != Eigen::Success) throw InputError("solve_equilibrium: singular rod stiffness");
  Eigen::VectorXd d = ldlt.solve(rhs);
  for (int it = 0; it < 2; ++it) d += ldlt.solve(rhs - k * d);

  for (int node = 1; node < n_nodes; ++node) {
    const int o = kDofsPerNode * (node - 1);
    st.v2[node] = d[o + 0];
    st.v2p[node] = d[o + 1];
    st.v3[node] = d[o + 2];
    st.v3p[node] = d[o + 3];
    st.w[node] = d[o + 4];
  }
  return recover_u(st, regime);
}

RodState recover_u(const RodState& state, const AlphaRegime& regime) {
  RodState out = state;
  out.u.assign(state.num_nodes(), 0.0);
  if (regime.regime() == Regime::SuperCritical) {
    out.u_kind = RodState::UKind::Nodal;
    return out;
  }
  out.u_kind = RodState::UKind::Inextensible;
  for (int e = 0; e < state.num_elements(); ++e) out.u[e + 1] = out.u[e] + primitive_piece(state, e, 1.0);
  return out;
}

// ---------------------------------------------------------------------------

StressMoments1D::StressMoments1D(const RodState& state, const ReducedStiffness& stiffness)
    : state_(&state), stiffness_(&stiffness) {
  if (!stiffness.has_warp_basis()) throw InputError("stress_moments_1d: reduced stiffness carries no warp basis");
}

MomentSample StressMoments1D::operator()(double x1) const { return at_curvature(state_->kappa(x1)); }

MomentSample StressMoments1D::at_curvature(const Vec3& kappa) const {
  const CrossSection& s = *stiffness_->section;
  const ElasticTensor& tensor = *stiffness_->tensor;
  const auto& basis = *stiffness_->warp_basis;
  const SkewParam f = SkewParam::from_vector(kappa);
  MomentSample m;
  for (int t = 0; t < s.num_triangles(); ++t) {
    const auto& tri = s.triangles()[t];
    const auto& g = s.basis_gradients(t);
    Mat3 grad = Mat3::Zero();
    for (int k = 0; k < 3; ++k) {
      const Vec3 beta = kappa[0] * basis[0].nodal[tri[k]] + kappa[1] * basis[1].nodal[tri[k]] +
                        kappa[2] * basis[2].nodal[tri[k]];
      grad.col(1) += beta * g[k].x();
      grad.col(2) += beta * g[k].y();
    }
    for (const auto& qp : s.quadrature(t)) {
      Mat3 strain = grad;
      strain.col(0) = cell_first_column(f, qp.point);
      const Mat3 e = tensor.apply(strain);
      const double x2 = qp.point.x(), x3 = qp.point.y();
      m.E11_tilde += qp.weight * x2 * e(0, 0);
      m.E11_hat += qp.weight * x3 * e(0, 0);
      m.E12_tilde += qp.weight * x2 * e(0, 1);
      m.E13_hat += qp.weight * x3 * e(0, 2);
      m.E13_tilde += qp.weight * x2 * e(0, 2);
      m.E12_hat += qp.weight * x3 * e(0, 1);
    }
  }
  return m;
}

StressMoments1D stress_moments_1d(const RodState& state, const ReducedStiffness& stiffness) {
  return StressMoments1D(state, stiffness);
}

MomentSample generalized_moments(const ReducedStiffness& stiffness, const Vec3& kappa) {
  const Vec3 q = stiffness.Q1 * kappa;
  MomentSample m;
  m.E11_tilde = -q[0];
  m.E11_hat = -q[1];
  m.E13_tilde = q[2];
  m.E12_hat = 0.0;
  return m;
}

double ElResidualReport::max_el() const { return std::max({eq2a, eq2b, eq3}); }

ElResidualReport el_residuals(const RodState& st, const ReducedStiffness& stiffness, const RodLoads& loads) {
  ElResidualReport rep;
  const bool warp = stiffness.has_warp_basis();
  rep.moment_route = warp ? "warp_basis" : "q1_identity";
  std::optional<StressMoments1D> moments;
  if (warp) moments.emplace(st, stiffness);

  const int n = st.num_nodes();
  const double dx = st.spacing();
  // Free test functions: Hermite value/slope shapes and P1 hats at nodes 1..n-1.
  Eigen::VectorXd r2a = Eigen::VectorXd::Zero(2 * (n - 1)), r2b = r2a, load2 = r2a, load3 = r2a, int2a = r2a,
                  int2b = r2a;
  Eigen::VectorXd r3 = Eigen::VectorXd::Zero(n - 1), int3 = r3;
  Eigen::VectorXd r3lit = r3;
  for (int e = 0; e < st.num_elements(); ++e) {
    for (const auto& g : quadrature::gauss(5)) {
      const double x1 = st.x[e] + g.s * dx;
      const double wq = g.w * dx;
      const Vec3 kappa = st.kappa(x1);
      const MomentSample m = warp ? moments->at_curvature(kappa) : generalized_moments(stiffness, kappa);
      const Hermite h = hermite(g.s, dx);
      const double f2 = loads.f2(x1), f3 = loads.f3(x1);
      for (int node = 0; node < 2; ++node) {
        const int gn = e + node;
        if (gn == 0) continue;
        for (int j = 0; j < 2; ++j) {
          const int idx = 2 * (gn - 1) + j;
          const double phi = h.n[2 * node + j], phi_dd = h.dd[2 * node + j];
          r2a[idx] += wq * (m.E11_tilde * phi_dd + f2 * phi);
          r2b[idx] += wq * (m.E11_hat * phi_dd + f3 * phi);
          load2[idx] += wq * f2 * phi;
          load3[idx] += wq * f3 * phi;
          int2a[idx] += wq * std::abs(m.E11_tilde * phi_dd);
          int2b[idx] += wq * std::abs(m.E11_hat * phi_dd);
        }
        const double psi_d = node == 0 ? -1.0 / dx : 1.0 / dx;
        r3[gn - 1] += wq * m.twist() * psi_d;
        int3[gn - 1] += wq * std::abs(m.twist() * psi_d);
        r3lit[gn - 1] += wq * (m.E12_tilde - m.E13_hat) * psi_d;
      }
    }
  }
  rep.eq2a_abs = r2a.norm();
  rep.eq2b_abs = r2b.norm();
  rep.eq3_abs = r3.norm();
  rep.load_norm_f2 = load2.norm();
  rep.scale = load2.norm() + load3.norm() + int2a.norm() + int2b.norm() + int3.norm();
  if (rep.scale > 0.0) {
    rep.eq2a = rep.eq2a_abs / rep.scale;
    rep.eq2b = rep.eq2b_abs / rep.scale;
    rep.eq3 = rep.eq3_abs / rep.scale;
    if (warp) rep.eq3_literal = r3lit.norm() / rep.scale;
  } else if (warp) {
    rep.eq3_literal = 0.0;
  }
  rep.eq1a = stretch_residual(st);
  rep.eq1b = axial_strain_norm(st);
  return rep;
}

}  // namespace rodlim
