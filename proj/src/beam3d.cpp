#include "rodlim/beam3d.hpp"

#include "rodlim/quadrature.hpp"

#include <Eigen/CholmodSupport>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

namespace rodlim {

void BeamConfig::validate() const {
  if (!(std::isfinite(h) && h > 0.0 && h <= 1.0)) throw InputError("beam3d: h must satisfy 0 < h <= 1");
  if (!(std::isfinite(alpha) && alpha > 2.0)) throw InputError("beam3d: alpha must be > 2");
  if (!(std::isfinite(length) && length > 0.0)) throw InputError("beam3d: length must be > 0");
  if (axial_elems < 1) throw InputError("beam3d: axial_elems must be >= 1");
  if (axial_order != 1 && axial_order != 2) throw InputError("beam3d: axial_order must be 1 or 2");
  if (threads < 1) throw InputError("beam3d: threads must be >= 1");
  if (!section) throw InputError("beam3d: missing section mesh");
  require_normalized(*section, "beam3d");
}

BeamMesh::BeamMesh(const BeamConfig& config)
    : section_(config.section),
      length_(config.length),
      h_(config.h),
      order_(config.axial_order),
      elems_(config.axial_elems) {
  config.validate();
  const int n = order_ * elems_ + 1;
  x_.resize(n);
  for (int i = 0; i < n; ++i) x_[i] = length_ * static_cast<double>(i) / (n - 1);
}

Vec3 BeamMesh::reference_position(int node) const {
  const int i = node / section_nodes();
  const Vec2& p = section_->vertices()[node % section_nodes()];
  return {x_[i], h_ * p.x(), h_ * p.y()};
}

DeformationField DeformationField::reference(const BeamMesh& mesh) {
  return {std::vector<Vec3>(mesh.num_nodes(), Vec3::Zero())};
}

Eigen::VectorXd DeformationField::free_vector(const BeamMesh& mesh) const {
  const int offset = mesh.section_nodes();
  Eigen::VectorXd out(mesh.num_free_dofs());
  for (int n = offset; n < mesh.num_nodes(); ++n) out.segment<3>(3 * (n - offset)) = displacement[n];
  return out;
}

DeformationField DeformationField::from_free_vector(const BeamMesh& mesh, const Eigen::VectorXd& free) {
  if (free.size() != mesh.num_free_dofs()) throw InputError("deformation: free vector has the wrong size");
  DeformationField d = reference(mesh);
  const int offset = mesh.section_nodes();
  for (int n = offset; n < mesh.num_nodes(); ++n) d.displacement[n] = free.segment<3>(3 * (n - offset));
  return d;
}

bool DeformationField::satisfies_clamp(const BeamMesh& mesh) const {
  if (static_cast<int>(displacement.size()) != mesh.num_nodes()) return false;
  for (int v = 0; v < mesh.section_nodes(); ++v)
    if (!displacement[v].isZero(0.0)) return false;
  return true;
}

// ---------------------------------------------------------------------------

namespace {

int chunk_count(int threads, int n_items) { return std::max(1, std::min(threads, n_items)); }

constexpr double kEps = std::numeric_limits<double>::epsilon();

}  // namespace

template <class Fn>
void BeamProblem::for_chunks(int n_items, Fn&& fn) const {
  const int chunks = chunk_count(config_.threads, n_items);
  if (chunks == 1) {
    fn(0, 0, n_items);
    return;
  }
  std::vector<std::exception_ptr> errors(chunks);
  std::vector<std::thread> pool;
  pool.reserve(chunks);
  for (int c = 0; c < chunks; ++c) {
    const int begin = static_cast<int>(static_cast<long long>(n_items) * c / chunks);
    const int end = static_cast<int>(static_cast<long long>(n_items) * (c + 1) / chunks);
    pool.emplace_back([&, c, begin, end] {
      try {
        fn(c, begin, end);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

BeamProblem::BeamProblem(BeamConfig config)
    : config_(std::move(config)), mesh_(config_), gauss_points_(config_.axial_order + 1) {}

BeamProblem::AxialShape BeamProblem::axial_shape(int g) const {
  const double s = quadrature::gauss(gauss_points_)[g].s;
  const double dx = mesh_.spacing();
  AxialShape a;
  if (mesh_.axial_order() == 1) {
    a.n = {1.0 - s, s, 0.0};
    a.dn = {-1.0 / dx, 1.0 / dx, 0.0};
  } else {
    a.n = {(1.0 - s) * (1.0 - 2.0 * s), 4.0 * s * (1.0 - s), s * (2.0 * s - 1.0)};
    a.dn = {(4.0 * s - 3.0) / dx, (4.0 - 8.0 * s) / dx, (4.0 * s - 1.0) / dx};
  }
  return a;
}

int BeamProblem::num_stations() const { return mesh_.axial_elems() * gauss_points_; }

double BeamProblem::station_x(int k) const {
  const int e = k / gauss_points_;
  return mesh_.spacing() * (e + quadrature::gauss(gauss_points_)[k % gauss_points_].s);
}

double BeamProblem::station_weight(int k) const {
  return mesh_.spacing() * quadrature::gauss(gauss_points_)[k % gauss_points_].w;
}

double BeamProblem::section_weight(int q) const { return mesh_.section().quadrature(q / 3)[q % 3].weight; }

Vec2 BeamProblem::section_point(int q) const { return mesh_.section().quadrature(q / 3)[q % 3].point; }

void BeamProblem::prism_shapes(int e, int t, int g, int qi, PointShapes& ps) const {
  const double h = config_.h;
  const auto& tri = mesh_.section().triangles()[t];
  const auto& grads = mesh_.section().basis_gradients(t);
  const auto& qp = mesh_.section().quadrature(t)[qi];
  const AxialShape ax = axial_shape(g);
  ps.count = 0;
  for (int l = 0; l <= mesh_.axial_order(); ++l)
    for (int k = 0; k < 3; ++k) {
      const int a = ps.count++;
      ps.node[a] = mesh_.node(axial_node(e, l), tri[k]);
      ps.n[a] = ax.n[l] * qp.bary[k];
      ps.grad[a] = Vec3(ax.dn[l] * qp.bary[k], ax.n[l] * grads[k].x() / h, ax.n[l] * grads[k].y() / h);
    }
}

EnergyValue BeamProblem::energy(const DeformationField& y) const {
  if (!y.satisfies_clamp(mesh_)) throw InputError("beam3d energy: deformation violates the clamped face");
  const double h = config_.h;
  const double load_scale = std::pow(h, config_.alpha);
  const int chunks = chunk_count(config_.threads, mesh_.axial_elems());
  struct Partial {
    double elastic = 0.0, load = 0.0, magnitude = 0.0, min_det = std::numeric_limits<double>::infinity();
    bool infinite = false;
  };
  std::vector<Partial> parts(chunks);
  for_chunks(mesh_.axial_elems(), [&](int c, int begin, int end) {
    Partial& p = parts[c];
    PointShapes ps;
    for (int e = begin; e < end; ++e)
      for (int t = 0; t < mesh_.section().num_triangles(); ++t)
        for (int g = 0; g < gauss_points_; ++g)
          for (int qi = 0; qi < 3; ++qi) {
            prism_shapes(e, t, g, qi, ps);
            const double w = mesh_.spacing() * quadrature::gauss(gauss_points_)[g].w *
                             mesh_.section().quadrature(t)[qi].weight;
            Mat3 hm = Mat3::Zero();
            Vec3 d = Vec3::Zero();
            for (int a = 0; a < ps.count; ++a) {
              hm += y.displacement[ps.node[a]] * ps.grad[a].transpose();
              d += ps.n[a] * y.displacement[ps.node[a]];
            }
            const double det = (Mat3::Identity() + hm).determinant();
            p.min_det = std::min(p.min_det, det);
            const ExtendedReal we = config_.material.energy_from_displacement(hm);
            if (we.is_infinite()) {
              p.infinite = true;
              continue;
            }
            const Vec2 x = mesh_.section().quadrature(t)[qi].point;
            const double x1 = station_x(e * gauss_points_ + g);
            const double f2 = config_.loads.f2(x1), f3 = config_.loads.f3(x1);
            const double work = load_scale * (f2 * (h * x.x() + d[1]) + f3 * (h * x.y() + d[2]));
            p.elastic += w * we.value();
            p.load += w * work;
            p.magnitude += w * (std::abs(we.value()) + std::abs(work));
          }
  });
  EnergyValue out;
  out.min_det = std::numeric_limits<double>::infinity();
  bool infinite = false;
  for (const auto& p : parts) {
    out.elastic += p.elastic;
    out.load_work += p.load;
    out.magnitude += p.magnitude;
    out.min_det = std::min(out.min_det, p.min_det);
    infinite = infinite || p.infinite;
  }
  out.total = infinite ? ExtendedReal::infinity() : ExtendedReal(out.elastic - out.load_work);
  return out;
}

Eigen::VectorXd BeamProblem::gradient(const DeformationField& y) const {
  if (!y.satisfies_clamp(mesh_)) throw InputError("beam3d gradient: deformation violates the clamped face");
  const double h = config_.h;
  const double load_scale = std::pow(h, config_.alpha);
  const int offset = mesh_.section_nodes();
  const int chunks = chunk_count(config_.threads, mesh_.axial_elems());
  std::vector<Eigen::VectorXd> parts(chunks, Eigen::VectorXd::Zero(mesh_.num_free_dofs()));
  for_chunks(mesh_.axial_elems(), [&](int c, int begin, int end) {
    Eigen::VectorXd& gvec = parts[c];
    PointShapes ps;
    for (int e = begin; e < end; ++e)
      for (int t = 0; t < mesh_.section().num_triangles(); ++t)
        for (int g = 0; g < gauss_points_; ++g)
          for (int qi = 0; qi < 3; ++qi) {
            prism_shapes(e, t, g, qi, ps);
            const double w = mesh_.spacing() * quadrature::gauss(gauss_points_)[g].w *
                             mesh_.section().quadrature(t)[qi].weight;
            Mat3 hm = Mat3::Zero();
            for (int a = 0; a < ps.count; ++a) hm += y.displacement[ps.node[a]] * ps.grad[a].transpose();
            const Mat3 stress = config_.material.stress_from_displacement(hm);
            const double x1 = station_x(e * gauss_points_ + g);
            const Vec3 f(0.0, config_.loads.f2(x1), config_.loads.f3(x1));
            for (int a = 0; a < ps.count; ++a) {
              if (ps.node[a] < offset) continue;
              gvec.segment<3>(3 * (ps.node[a] - offset)) += w * (stress * ps.grad[a] - load_scale * ps.n[a] * f);
            }
          }
  });
  Eigen::VectorXd out = parts[0];
  for (int c = 1; c < chunks; ++c) out += parts[c];
  return out;
}

Eigen::SparseMatrix<double> BeamProblem::hessian(const DeformationField& y) const {
  if (!y.satisfies_clamp(mesh_)) throw InputError("beam3d hessian: deformation violates the clamped face");
  const int offset = mesh_.section_nodes();
  const int chunks = chunk_count(config_.threads, mesh_.axial_elems());
  std::vector<std::vector<Eigen::Triplet<double>>> parts(chunks);
  const int npe = 3 * (mesh_.axial_order() + 1);
  for_chunks(mesh_.axial_elems(), [&](int c, int begin, int end) {
    auto& trip = parts[c];
    trip.reserve(static_cast<std::size_t>(end - begin) * mesh_.section().num_triangles() * 9 * npe * npe);
    PointShapes ps;
    Eigen::MatrixXd ke(3 * npe, 3 * npe);
    for (int e = begin; e < end; ++e)
      for (int t = 0; t < mesh_.section().num_triangles(); ++t) {
        ke.setZero();
        std::array<int, 9> nodes{};
        for (int g = 0; g < gauss_points_; ++g)
          for (int qi = 0; qi < 3; ++qi) {
            prism_shapes(e, t, g, qi, ps);
            nodes = ps.node;
            const double w = mesh_.spacing() * quadrature::gauss(gauss_points_)[g].w *
                             mesh_.section().quadrature(t)[qi].weight;
            Mat3 hm = Mat3::Zero();
            for (int a = 0; a < ps.count; ++a) hm += y.displacement[ps.node[a]] * ps.grad[a].transpose();
            const Eigen::Matrix<double, 9, 9> tan = config_.material.tangent(hm);
            // B maps the element unknowns (a, i) to vec(H) entries 3 i + j.
            Eigen::MatrixXd b = Eigen::MatrixXd::Zero(9, 3 * npe);
            for (int a = 0; a < ps.count; ++a)
              for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) b(3 * i + j, 3 * a + i) = ps.grad[a][j];
            ke.noalias() += w * b.transpose() * tan * b;
          }
        for (int a = 0; a < npe; ++a) {
          if (nodes[a] < offset) continue;
          for (int bnode = 0; bnode < npe; ++bnode) {
            if (nodes[bnode] < offset) continue;
            for (int i = 0; i < 3; ++i)
              for (int k = 0; k < 3; ++k)
                trip.emplace_back(3 * (nodes[a] - offset) + i, 3 * (nodes[bnode] - offset) + k,
                                  ke(3 * a + i, 3 * bnode + k));
          }
        }
      }
  });
  std::vector<Eigen::Triplet<double>> all;
  for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  Eigen::SparseMatrix<double> k(mesh_.num_free_dofs(), mesh_.num_free_dofs());
  k.setFromTriplets(all.begin(), all.end());
  return k;
}

ExtendedReal BeamProblem::elastic_energy_of_positions(const std::vector<Vec3>& positions) const {
  if (static_cast<int>(positions.size()) != mesh_.num_nodes())
    throw InputError("beam3d: position array has the wrong size");
  double sum = 0.0;
  PointShapes ps;
  for (int e = 0; e < mesh_.axial_elems(); ++e)
    for (int t = 0; t < mesh_.section().num_triangles(); ++t)
      for (int g = 0; g < gauss_points_; ++g)
        for (int qi = 0; qi < 3; ++qi) {
          prism_shapes(e, t, g, qi, ps);
          const double w =
              mesh_.spacing() * quadrature::gauss(gauss_points_)[g].w * mesh_.section().quadrature(t)[qi].weight;
          Mat3 f = Mat3::Zero();
          for (int a = 0; a < ps.count; ++a) f += positions[ps.node[a]] * ps.grad[a].transpose();
          const ExtendedReal we = config_.material.energy(f);
          if (we.is_infinite()) return ExtendedReal::infinity();
          sum += w * we.value();
        }
  return sum;
}

Mat3 BeamProblem::displacement_gradient_at(const DeformationField& y, int station, int q) const {
  const int e = station / gauss_points_, g = station % gauss_points_;
  const int t = q / 3, qi = q % 3;
  PointShapes ps;
  prism_shapes(e, t, g, qi, ps);
  Mat3 hm = Mat3::Zero();
  for (int a = 0; a < ps.count; ++a) hm += y.displacement[ps.node[a]] * ps.grad[a].transpose();
  return hm;
}

Mat3 BeamProblem::gradient_at(const DeformationField& y, int station, int q) const {
  return Mat3::Identity() + displacement_gradient_at(y, station, q);
}

Vec3 BeamProblem::position_at(const DeformationField& y, int station, int q) const {
  const double h = config_.h;
  const int e = station / gauss_points_, g = station % gauss_points_;
  const int t = q / 3, qi = q % 3;
  PointShapes ps;
  prism_shapes(e, t, g, qi, ps);
  Vec3 d = Vec3::Zero();
  for (int a = 0; a < ps.count; ++a) d += ps.n[a] * y.displacement[ps.node[a]];
  const Vec2 x = section_point(q);
  return Vec3(station_x(station), h * x.x(), h * x.y()) + d;
}

// ---------------------------------------------------------------------------

MinimizeResult minimize(const BeamProblem& problem, const MinimizeOptions& options) {
  return minimize(problem, DeformationField::reference(problem.mesh()), options);
}

MinimizeResult minimize(const BeamProblem& problem, const DeformationField& start, const MinimizeOptions& options) {
  if (!(options.tol > 0.0) || options.max_iterations < 1 || options.max_backtracks < 1)
    throw InputError("minimize: invalid options");
  const BeamMesh& mesh = problem.mesh();
  MinimizeResult res;
  res.field = start;
  if (!res.field.satisfies_clamp(mesh)) throw InputError("minimize: start violates the clamped face");
  res.energy = problem.energy(res.field);
  if (res.energy.total.is_infinite()) {
    // Inadmissible warm start: fall back to the reference map.
    res.field = DeformationField::reference(mesh);
    res.energy = problem.energy(res.field);
  }
  res.min_det_accepted = res.energy.min_det;

  Eigen::VectorXd x = res.field.free_vector(mesh);
  Eigen::VectorXd g = problem.gradient(res.field);
  res.grad_norm0 = g.norm();
  res.grad_norm = res.grad_norm0;
  const auto converged = [&] {
    return res.grad_norm0 == 0.0 || res.grad_norm <= std::max(options.tol * res.grad_norm0, res.roundoff_floor);
  };

  Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>, Eigen::Lower> llt;
  bool pattern_ready = false;
  for (int it = 0; it < options.max_iterations; ++it) {
    if (converged()) return res;

    Eigen::SparseMatrix<double> k = problem.hessian(res.field);
    res.roundoff_floor = options.floor_factor * kEps * (k.cwiseAbs() * x.cwiseAbs()).norm();
    if (converged()) return res;
    if (!pattern_ready) {
      llt.analyzePattern(k);
      pattern_ready = true;
    }
    llt.factorize(k);
    Eigen::VectorXd p;
    if (llt.info() == Eigen::Success) p = llt.solve(-g);
    if (llt.info() != Eigen::Success || !p.allFinite()) {
      double max_diag = 0.0;
      for (int i = 0; i < k.rows(); ++i) max_diag = std::max(max_diag, std::abs(k.coeff(i, i)));
      Eigen::SparseMatrix<double> id(k.rows(), k.cols());
      id.setIdentity();
      double shift = 1e-10 * std::max(max_diag, 1.0);
      for (int attempt = 0; attempt < 12; ++attempt, shift *= 100.0) {
        llt.factorize(k + shift * id);
        if (llt.info() == Eigen::Success) {
          p = llt.solve(-g);
          if (llt.info() == Eigen::Success && p.allFinite()) break;
        }
        p.resize(0);
      }
      ++res.shifted_factorizations;
      if (p.size() == 0) p = -g;
    }
    double slope = g.dot(p);
    if (!(slope < 0.0)) {
      p = -g;
      slope = -g.squaredNorm();
    }

    const double e0 = res.energy.total.value();
    bool accepted = false;
    double t = 1.0;
    for (int bt = 0; bt < options.max_backtracks; ++bt, t *= 0.5) {
      const Eigen::VectorXd xt = x + t * p;
      DeformationField trial = DeformationField::from_free_vector(mesh, xt);
      EnergyValue et = problem.energy(trial);
      if (et.total.is_infinite()) continue;
      const double slack = 64.0 * kEps * (res.energy.magnitude + et.magnitude);
      if (et.total.value() <= e0 + 1e-4 * t * slope + slack) {
        Eigen::VectorXd gt = problem.gradient(trial);
        if (et.total.value() > e0 + 1e-4 * t * slope && gt.norm() >= res.grad_norm) continue;
        x = xt;
        res.field = std::move(trial);
        res.energy = et;
        g = std::move(gt);
        res.grad_norm = g.norm();
        res.min_det_accepted = std::min(res.min_det_accepted, et.min_det);
        accepted = true;
        break;
      }
    }
    res.iterations = it + 1;
    if (accepted && options.monitor) options.monitor(it, res.energy.total.value(), res.grad_norm, t);
    if (!accepted) {
      std::ostringstream msg;
      msg << "beam3d minimize: line search failed at iteration " << it << " (energy " << e0 << ", |g| "
          << res.grad_norm << ", |g0| " << res.grad_norm0 << ")";
      throw ConvergenceError(msg.str());
    }
    if (!(res.min_det_accepted > 0.0)) throw std::logic_error("minimize: accepted an inadmissible state");
    const double scale = std::pow(problem.config().h, 2.0 * problem.config().alpha - 2.0);
    res.scaling_ratio = res.energy.elastic / scale;
  }
  if (converged()) return res;
  std::ostringstream msg;
  msg << "beam3d minimize: no convergence after " << options.max_iterations << " iterations (|g|/|g0| = "
      << res.stationarity() << ")";
  throw ConvergenceError(msg.str());
}

// ---------------------------------------------------------------------------

namespace {

struct SectionWeights {
  std::vector<double> mass, x2, x3;  // int N_v, int x2 N_v, int x3 N_v
  double muS = 0.0;
};

SectionWeights section_weights(const CrossSection& s) {
  SectionWeights sw;
  sw.mass.assign(s.num_vertices(), 0.0);
  sw.x2 = sw.x3 = sw.mass;
  for (int t = 0; t < s.num_triangles(); ++t) {
    const auto& tri = s.triangles()[t];
    for (const auto& qp : s.quadrature(t))
      for (int k = 0; k < 3; ++k) {
        sw.mass[tri[k]] += qp.weight * qp.bary[k];
        sw.x2[tri[k]] += qp.weight * qp.bary[k] * qp.point.x();
        sw.x3[tri[k]] += qp.weight * qp.bary[k] * qp.point.y();
      }
  }
  sw.muS = moments(s).muS;
  return sw;
}

double u_scale(double h, double alpha) { return alpha >= 3.0 ? std::pow(h, alpha - 1.0) : std::pow(h, 2.0 * (alpha - 2.0)); }

}  // namespace

Observables extract_observables(const BeamProblem& problem, const DeformationField& y) {
  const BeamMesh& mesh = problem.mesh();
  const double h = problem.config().h, alpha = problem.config().alpha;
  const SectionWeights sw = section_weights(mesh.section());
  const double su = u_scale(h, alpha), sv = std::pow(h, alpha - 2.0), swt = sw.muS * std::pow(h, alpha - 1.0);
  Observables obs;
  obs.x = mesh.axial_grid();
  const int n = mesh.axial_nodes();
  obs.u.assign(n, 0.0);
  obs.v2 = obs.v3 = obs.w = obs.u;
  for (int i = 0; i < n; ++i) {
    double i1 = 0.0, i2 = 0.0, i3 = 0.0, tw = 0.0;
    for (int v = 0; v < mesh.section_nodes(); ++v) {
      const Vec3& d = y.displacement[mesh.node(i, v)];
      i1 += sw.mass[v] * d[0];
      i2 += sw.mass[v] * d[1];
      i3 += sw.mass[v] * d[2];
      tw += sw.x2[v] * d[2] - sw.x3[v] * d[1];
    }
    obs.u[i] = i1 / su;
    obs.v2[i] = i2 / sv;
    obs.v3[i] = i3 / sv;
    obs.w[i] = tw / swt;
  }
  const EnergyValue ev = problem.energy(y);
  obs.energy = ev.total.as_double();
  return obs;
}

DeformationField ansatz_deformation(const BeamMesh& mesh, double alpha, const RodFields& f) {
  const double h = mesh.h();
  const double su = u_scale(h, alpha), sv = std::pow(h, alpha - 2.0), sr = std::pow(h, alpha - 1.0);
  auto eval = [](const std::function<double(double)>& fn, double x) { return fn ? fn(x) : 0.0; };
  DeformationField d = DeformationField::reference(mesh);
  for (int i = 1; i < mesh.axial_nodes(); ++i) {
    const double x1 = mesh.axial_x(i);
    const double u = eval(f.u, x1), v2 = eval(f.v2, x1), v3 = eval(f.v3, x1), w = eval(f.w, x1);
    const double dv2 = eval(f.dv2, x1), dv3 = eval(f.dv3, x1);
    for (int v = 0; v < mesh.section_nodes(); ++v) {
      const Vec2& p = mesh.section().vertices()[v];
      d.displacement[mesh.node(i, v)] = Vec3(su * u - sr * (p.x() * dv2 + p.y() * dv3), sv * v2 - sr * p.y() * w,
                                             sv * v3 + sr * p.x() * w);
    }
  }
  return d;
}

RodFields rod_fields_from_observables(const Observables& obs) {
  const int n = static_cast<int>(obs.x.size());
  if (n < 2) throw InputError("rod_fields_from_observables: need >= 2 stations");
  auto interp = [x = obs.x](std::vector<double> val) {
    return [x, val](double t) {
      const auto it = std::upper_bound(x.begin(), x.end(), t);
      std::size_t i = it == x.begin() ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
      i = std::min(i, x.size() - 2);
      const double s = (t - x[i]) / (x[i + 1] - x[i]);
      return (1.0 - s) * val[i] + s * val[i + 1];
    };
  };
  auto slope = [&](const std::vector<double>& val) {
    std::vector<double> d(n);
    for (int i = 0; i < n; ++i) {
      const int a = std::max(0, i - 1), b = std::min(n - 1, i + 1);
      d[i] = (val[b] - val[a]) / (obs.x[b] - obs.x[a]);
    }
    d[0] = 0.0;  // clamped end
    return d;
  };
  RodFields f;
  f.u = interp(obs.u);
  f.v2 = interp(obs.v2);
  f.v3 = interp(obs.v3);
  f.w = interp(obs.w);
  f.dv2 = interp(slope(obs.v2));
  f.dv3 = interp(slope(obs.v3));
  return f;
}

// ---------------------------------------------------------------------------

RotationFit fit_rotations(const BeamProblem& problem, const DeformationField& y) {
  RotationFit fit;
  const int ns = problem.num_stations(), nq = problem.section_points();
  double area = 0.0;
  for (int q = 0; q < nq; ++q) area += problem.section_weight(q);
  double dist2 = 0.0;
  for (int k = 0; k < ns; ++k) {
    std::vector<Mat3> hs(nq);
    Mat3 mean_h = Mat3::Zero();
    for (int q = 0; q < nq; ++q) {
      hs[q] = problem.displacement_gradient_at(y, k, q);
      mean_h += problem.section_weight(q) * hs[q];
    }
    mean_h /= area;
    const Mat3 fbar = Mat3::Identity() + mean_h;
    Eigen::JacobiSVD<Mat3> svd(fbar);
    const auto sv = svd.singularValues();
    const bool flagged = !(sv[2] > 1e-8 * sv[0]) || !fbar.allFinite();
    const Mat3 r = flagged ? Mat3::Identity() : nearest_rotation(fbar);
    fit.x.push_back(problem.station_x(k));
    fit.rotations.push_back(r);
    fit.flagged.push_back(flagged);
    if (flagged) continue;
    const Mat3 id_minus_r = Mat3::Identity() - r;
    for (int q = 0; q < nq; ++q)
      dist2 += problem.station_weight(k) * problem.section_weight(q) * (id_minus_r + hs[q]).squaredNorm();
    fit.deviation_linf = std::max(fit.deviation_linf, id_minus_r.norm());
    fit.orthogonality_defect = std::max({fit.orthogonality_defect, (r.transpose() * r - Mat3::Identity()).norm(),
                                         std::abs(r.determinant() - 1.0)});
  }
  fit.distance_l2 = std::sqrt(dist2);
  double der2 = 0.0;
  for (int k = 0; k + 1 < ns; ++k) {
    if (fit.flagged[k] || fit.flagged[k + 1]) continue;
    const double dx = fit.x[k + 1] - fit.x[k];
    der2 += (fit.rotations[k + 1] - fit.rotations[k]).squaredNorm() / dx;
  }
  fit.derivative_l2 = std::sqrt(der2);
  return fit;
}

MomentCurves strain_stress_moments(const BeamProblem& problem, const DeformationField& y, const RotationFit& fit) {
  const int ns = problem.num_stations(), nq = problem.section_points();
  if (static_cast<int>(fit.rotations.size()) != ns) throw InputError("strain_stress_moments: rotation fit mismatch");
  const double s = std::pow(problem.config().h, problem.config().alpha - 1.0);
  const StoredEnergy& mat = problem.config().material;
  MomentCurves mc;
  double mean2 = 0.0, first2 = 0.0, strain2 = 0.0, skew2 = 0.0, full2 = 0.0;
  for (int k = 0; k < ns; ++k) {
    const Mat3& r = fit.rotations[k];
    const Mat3 rt_minus_id = r.transpose() - Mat3::Identity();
    Mat3 mean = Mat3::Zero(), m2 = Mat3::Zero(), m3 = Mat3::Zero();
    const double wk = problem.station_weight(k);
    for (int q = 0; q < nq; ++q) {
      const Mat3 hm = problem.displacement_gradient_at(y, k, q);
      const Mat3 sg = rt_minus_id + r.transpose() * hm;  // h^(alpha-1) G
      const Mat3 e = mat.stress_from_displacement(sg) * (Mat3::Identity() + sg).transpose() / s;
      const double wq = problem.section_weight(q);
      const Vec2 x = problem.section_point(q);
      mean += wq * e;
      m2 += wq * x.x() * e;
      m3 += wq * x.y() * e;
      strain2 += wk * wq * (sg / s).squaredNorm();
      skew2 += wk * wq * (e - e.transpose()).squaredNorm();
      full2 += wk * wq * e.squaredNorm();
    }
    mc.x.push_back(problem.station_x(k));
    mc.mean.push_back(mean);
    mc.first_x2.push_back(m2);
    mc.first_x3.push_back(m3);
    mean2 += wk * mean.squaredNorm();
    first2 += wk * (m2.squaredNorm() + m3.squaredNorm());
  }
  mc.mean_l2 = std::sqrt(mean2);
  mc.first_l2 = std::sqrt(first2);
  mc.strain_l2 = std::sqrt(strain2);
  mc.symmetry_defect = full2 > 0.0 ? std::sqrt(skew2 / full2) : 0.0;
  return mc;
}

std::array<double, 5> outer_variation_residuals(const BeamProblem& problem, const DeformationField& y) {
  const int ns = problem.num_stations(), nq = problem.section_points();
  const double load_scale = std::pow(problem.config().h, problem.config().alpha);
  const StoredEnergy& mat = problem.config().material;
  std::array<double, 5> lhs{}, rhs{}, mag{};
  for (int k = 0; k < ns; ++k) {
    const double x1 = problem.station_x(k);
    const Vec3 f(0.0, load_scale * problem.config().loads.f2(x1), load_scale * problem.config().loads.f3(x1));
    for (int q = 0; q < nq; ++q) {
      const double w = problem.station_weight(k) * problem.section_weight(q);
      const Mat3 hm = problem.displacement_gradient_at(y, k, q);
      const Mat3 tau = mat.stress_from_displacement(hm) * (Mat3::Identity() + hm).transpose();
      const Vec3 z = problem.position_at(y, k, q);
      std::array<Mat3, 5> dphi;
      std::array<Vec3, 5> phi;
      for (auto& m : dphi) m.setZero();
      phi[0] = Vec3(z[0], 0, 0);
      dphi[0](0, 0) = 1.0;
      phi[1] = Vec3(0, z[0], 0);
      dphi[1](1, 0) = 1.0;
      phi[2] = Vec3(0, 0, z[0]);
      dphi[2](2, 0) = 1.0;
      phi[3] = Vec3(0, z[0] * z[0], 0);
      dphi[3](1, 0) = 2.0 * z[0];
      phi[4] = Vec3(0, -z[0] * z[2], z[0] * z[1]);
      dphi[4] << 0, 0, 0, -z[2], 0, -z[0], z[1], z[0], 0;
      for (int j = 0; j < 5; ++j) {
        const double a = (tau.array() * dphi[j].array()).sum();
        const double b = f.dot(phi[j]);
        lhs[j] += w * a;
        rhs[j] += w * b;
        mag[j] += w * (tau.norm() * dphi[j].norm() + std::abs(b));
      }
    }
  }
  std::array<double, 5> out{};
  for (int j = 0; j < 5; ++j) out[j] = mag[j] > 0.0 ? std::abs(lhs[j] - rhs[j]) / mag[j] : 0.0;
  return out;
}

double distance_to_centerline(const BeamProblem& problem, const DeformationField& y) {
  const int ns = problem.num_stations(), nq = problem.section_points();
  const double h = problem.config().h;
  const Mat3 scale = Vec3(1.0, h, h).asDiagonal();
  double sum = 0.0;
  for (int k = 0; k < ns; ++k)
    for (int q = 0; q < nq; ++q) {
      const double w = problem.station_weight(k) * problem.section_weight(q);
      const Vec3 z = problem.position_at(y, k, q);
      const Vec3 diff(z[0] - problem.station_x(k), z[1], z[2]);
      const Mat3 grad = (problem.displacement_gradient_at(y, k, q) + Mat3::Identity()) * scale -
                        Vec3(1.0, 0.0, 0.0).asDiagonal().toDenseMatrix();
      sum += w * (diff.squaredNorm() + grad.squaredNorm());
    }
  return std::sqrt(sum);
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'R', 'L', 'D', 'E', 'F', 'R', 'M', '1'};

template <class T>
void put_le(std::ostream& os, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw IoError("deformation file: truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_deformation(const std::string& path, const BeamMesh& mesh, double alpha, const DeformationField& y) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(mesh.axial_nodes()));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(mesh.section_nodes()));
  put_le<double>(os, mesh.h());
  put_le<double>(os, alpha);
  for (int n = 0; n < mesh.num_nodes(); ++n) {
    const Vec3 p = y.position(mesh, n);
    for (int c = 0; c < 3; ++c) put_le<double>(os, p[c]);
  }
  if (!os) throw IoError("write failed: " + path);
}

DeformationFile read_deformation(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw IoError(path + ": not a deformation file");
  DeformationFile f;
  f.axial_nodes = static_cast<int>(get_le<std::uint32_t>(is));
  f.section_nodes = static_cast<int>(get_le<std::uint32_t>(is));
  f.h = get_le<double>(is);
  f.alpha = get_le<double>(is);
  const long long n = static_cast<long long>(f.axial_nodes) * f.section_nodes;
  if (n <= 0 || n > (1LL << 28)) throw IoError(path + ": implausible node counts");
  f.positions.resize(static_cast<std::size_t>(n));
  for (auto& p : f.positions)
    for (int c = 0; c < 3; ++c) p[c] = get_le<double>(is);
  return f;
}

}  // namespace rodlim
