#include "rodlim/cross_section.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <unordered_set>

namespace rodlim {

namespace {

constexpr double kQuadInterior = 2.0 / 3.0;
constexpr double kQuadSide = 1.0 / 6.0;

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

}  // namespace

CrossSection::CrossSection(std::vector<Vec2> vertices, std::vector<Triangle> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  const int nv = num_vertices();
  if (nv < 3 || triangles_.empty()) throw InputError("cross section: need at least one triangle");
  for (const auto& v : vertices_)
    if (!v.allFinite()) throw InputError("cross section: non-finite vertex coordinate");

  std::unordered_set<std::int64_t> directed;
  directed.reserve(triangles_.size() * 3);
  areas_.reserve(triangles_.size());
  gradients_.reserve(triangles_.size());
  quadrature_.reserve(triangles_.size());
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    for (int k = 0; k < 3; ++k) {
      if (tri[k] < 0 || tri[k] >= nv)
        throw InputError("cross section: triangle " + std::to_string(t) + " has an out-of-range vertex index");
      const std::int64_t key = static_cast<std::int64_t>(tri[k]) * nv + tri[(k + 1) % 3];
      if (!directed.insert(key).second)
        throw InputError("cross section: directed edge repeated (non-conforming or inconsistently oriented mesh)");
    }
    const Vec2& a = vertices_[tri[0]];
    const Vec2& b = vertices_[tri[1]];
    const Vec2& c = vertices_[tri[2]];
    const double area = signed_area(a, b, c);
    const double scale = std::max({(b - a).squaredNorm(), (c - a).squaredNorm(), (c - b).squaredNorm()});
    if (!(area > 1e-14 * scale)) {
      throw InputError("cross section: triangle " + std::to_string(t) +
                       (area < 0 ? " is negatively oriented" : " is degenerate (zero area)"));
    }
    areas_.push_back(area);

    // grad lambda_k = perp(opposite edge) / (2 area)
    std::array<Vec2, 3> g;
    const std::array<const Vec2*, 3> p{&a, &b, &c};
    for (int k = 0; k < 3; ++k) {
      const Vec2& q1 = *p[(k + 1) % 3];
      const Vec2& q2 = *p[(k + 2) % 3];
      g[k] = Vec2(q1.y() - q2.y(), q2.x() - q1.x()) / (2.0 * area);
    }
    gradients_.push_back(g);

    std::array<TriangleQuadPoint, 3> quad;
    for (int q = 0; q < 3; ++q) {
      std::array<double, 3> bary{kQuadSide, kQuadSide, kQuadSide};
      bary[q] = kQuadInterior;
      quad[q].bary = bary;
      quad[q].weight = area / 3.0;
      quad[q].point = bary[0] * a + bary[1] * b + bary[2] * c;
    }
    quadrature_.push_back(quad);
  }
}

double CrossSection::integrate(const std::function<double(const Vec2&)>& fn) const {
  double sum = 0.0;
  for (const auto& quad : quadrature_)
    for (const auto& qp : quad) sum += qp.weight * fn(qp.point);
  return sum;
}

double CrossSection::integrate_nodal(const std::vector<double>& nodal) const {
  double sum = 0.0;
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    sum += areas_[t] / 3.0 * (nodal[tri[0]] + nodal[tri[1]] + nodal[tri[2]]);
  }
  return sum;
}

bool CrossSection::is_normalized(double tol) const {
  const SectionMoments m = moments(*this);
  const double m2 = integrate([](const Vec2& x) { return x.x(); });
  const double m3 = integrate([](const Vec2& x) { return x.y(); });
  return std::abs(m.area - 1.0) <= tol && std::abs(m2) <= tol && std::abs(m3) <= tol &&
         std::abs(m.I23) <= 100.0 * tol;
}

double CrossSection::min_edge_length() const {
  double out = std::numeric_limits<double>::infinity();
  for (const auto& tri : triangles_)
    for (int k = 0; k < 3; ++k) out = std::min(out, (vertices_[tri[k]] - vertices_[tri[(k + 1) % 3]]).norm());
  return out;
}

double CrossSection::max_edge_length() const {
  double out = 0.0;
  for (const auto& tri : triangles_)
    for (int k = 0; k < 3; ++k) out = std::max(out, (vertices_[tri[k]] - vertices_[tri[(k + 1) % 3]]).norm());
  return out;
}

SectionMoments moments(const CrossSection& s) {
  SectionMoments m;
  for (int t = 0; t < s.num_triangles(); ++t) {
    for (const auto& qp : s.quadrature(t)) {
      const double x2 = qp.point.x();
      const double x3 = qp.point.y();
      m.area += qp.weight;
      m.I2 += qp.weight * x2 * x2;
      m.I3 += qp.weight * x3 * x3;
      m.I23 += qp.weight * x2 * x3;
    }
  }
  m.muS = m.I2 + m.I3;
  return m;
}

void require_normalized(const CrossSection& s, const char* who) {
  if (!s.is_normalized(1e-9))
    throw InputError(std::string(who) + ": cross section is not normalized (unit area, centered, principal axes); "
                     "run normalize first");
}

CrossSection normalize(const CrossSection& raw) {
  double area = 0.0, s2 = 0.0, s3 = 0.0;
  for (int t = 0; t < raw.num_triangles(); ++t) {
    for (const auto& qp : raw.quadrature(t)) {
      area += qp.weight;
      s2 += qp.weight * qp.point.x();
      s3 += qp.weight * qp.point.y();
    }
  }
  if (!(area > 0.0)) throw InputError("normalize: degenerate (zero-area) cross section");
  const Vec2 centroid(s2 / area, s3 / area);

  double j22 = 0.0, j33 = 0.0, j23 = 0.0;
  for (int t = 0; t < raw.num_triangles(); ++t) {
    for (const auto& qp : raw.quadrature(t)) {
      const Vec2 d = qp.point - centroid;
      j22 += qp.weight * d.x() * d.x();
      j33 += qp.weight * d.y() * d.y();
      j23 += qp.weight * d.x() * d.y();
    }
  }
  // Principal angle maximizing the moment about the new x2 axis; keep the
  // identity when the inertia is (numerically) isotropic.
  double theta = 0.0;
  const double scale = j22 + j33;
  if (std::abs(2.0 * j23) > 1e-14 * scale || std::abs(j22 - j33) > 1e-14 * scale) {
    theta = 0.5 * std::atan2(2.0 * j23, j22 - j33);
  }
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double inv_len = 1.0 / std::sqrt(area);

  std::vector<Vec2> vertices;
  vertices.reserve(raw.vertices().size());
  for (const Vec2& v : raw.vertices()) {
    const Vec2 d = v - centroid;
    vertices.emplace_back(inv_len * (c * d.x() + s * d.y()), inv_len * (-s * d.x() + c * d.y()));
  }
  return CrossSection(std::move(vertices), raw.triangles());
}

namespace sections {

namespace {

CrossSection ring_mesh(const std::function<Vec2(double)>& boundary, int rings, int per_ring) {
  if (rings < 1) throw InputError("section generator: rings must be >= 1");
  std::vector<Vec2> vertices{Vec2::Zero()};
  std::vector<CrossSection::Triangle> triangles;
  std::vector<int> inner{0};
  for (int k = 1; k <= rings; ++k) {
    const int n1 = per_ring * k;
    std::vector<int> outer;
    outer.reserve(n1);
    for (int j = 0; j < n1; ++j) {
      outer.push_back(static_cast<int>(vertices.size()));
      vertices.push_back((static_cast<double>(k) / rings) * boundary(static_cast<double>(j) / n1));
    }
    const int n0 = static_cast<int>(inner.size());
    if (n0 == 1) {
      for (int j = 0; j < n1; ++j) triangles.push_back({inner[0], outer[j], outer[(j + 1) % n1]});
    } else {
      int i = 0, j = 0;
      while (i < n0 || j < n1) {
        const bool advance_inner = (j == n1) || (i < n0 && static_cast<long>(i + 1) * n1 < static_cast<long>(j + 1) * n0);
        if (advance_inner) {
          triangles.push_back({inner[i], outer[j % n1], inner[(i + 1) % n0]});
          ++i;
        } else {
          triangles.push_back({inner[i % n0], outer[j], outer[(j + 1) % n1]});
          ++j;
        }
      }
    }
    inner = std::move(outer);
  }
  return CrossSection(std::move(vertices), std::move(triangles));
}

}  // namespace

CrossSection star_shaped(const std::function<Vec2(double)>& boundary, int rings) {
  return ring_mesh(boundary, rings, 6);
}

CrossSection disc(int rings, double radius) {
  if (!(radius > 0.0)) throw InputError("disc: radius must be > 0");
  return ring_mesh(
      [radius](double t) {
        const double a = 2.0 * std::numbers::pi * t;
        return Vec2(radius * std::cos(a), radius * std::sin(a));
      },
      rings, 6);
}

CrossSection regular_polygon(int sides, int rings) {
  if (sides < 3) throw InputError("regular_polygon: need at least 3 sides");
  return ring_mesh(
      [sides](double t) {
        const double pos = t * sides;
        const int side = std::min(static_cast<int>(std::floor(pos)), sides - 1);
        const double frac = pos - side;
        const double a0 = 2.0 * std::numbers::pi * side / sides;
        const double a1 = 2.0 * std::numbers::pi * (side + 1) / sides;
        const Vec2 p0(std::cos(a0), std::sin(a0));
        const Vec2 p1(std::cos(a1), std::sin(a1));
        return Vec2((1.0 - frac) * p0 + frac * p1);
      },
      rings, sides);
}

CrossSection rectangle(double width, double height, int nx, int ny) {
  if (!(width > 0.0 && height > 0.0)) throw InputError("rectangle: side lengths must be > 0");
  if (nx < 1 || ny < 1) throw InputError("rectangle: resolution must be >= 1");
  std::vector<Vec2> vertices;
  const auto corner = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      vertices.emplace_back(-0.5 * width + width * i / nx, -0.5 * height + height * j / ny);
  std::vector<CrossSection::Triangle> triangles;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int c = static_cast<int>(vertices.size());
      vertices.emplace_back(-0.5 * width + width * (i + 0.5) / nx, -0.5 * height + height * (j + 0.5) / ny);
      const int p00 = corner(i, j), p10 = corner(i + 1, j), p11 = corner(i + 1, j + 1), p01 = corner(i, j + 1);
      triangles.push_back({p00, p10, c});
      triangles.push_back({p10, p11, c});
      triangles.push_back({p11, p01, c});
      triangles.push_back({p01, p00, c});
    }
  }
  return CrossSection(std::move(vertices), std::move(triangles));
}

CrossSection square(int n, double side) { return rectangle(side, side, n, n); }

CrossSection refine(const CrossSection& s, const std::function<Vec2(const Vec2&)>& project_boundary) {
  std::vector<Vec2> vertices = s.vertices();
  std::map<std::pair<int, int>, int> midpoint;
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& tri : s.triangles())
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      ++edge_count[{std::min(a, b), std::max(a, b)}];
    }
  const auto mid = [&](int a, int b) {
    const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    Vec2 p = 0.5 * (vertices[a] + vertices[b]);
    if (project_boundary && edge_count[key] == 1) p = project_boundary(p);
    const int id = static_cast<int>(vertices.size());
    vertices.push_back(p);
    midpoint.emplace(key, id);
    return id;
  };
  std::vector<CrossSection::Triangle> triangles;
  triangles.reserve(s.triangles().size() * 4);
  for (const auto& tri : s.triangles()) {
    const int a = tri[0], b = tri[1], c = tri[2];
    const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    triangles.push_back({a, ab, ca});
    triangles.push_back({ab, b, bc});
    triangles.push_back({ca, bc, c});
    triangles.push_back({ab, bc, ca});
  }
  return CrossSection(std::move(vertices), std::move(triangles));
}

}  // namespace sections

CrossSection read_section_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("mesh file '" + path + "': " + e.what());
  }
  if (!j.is_object() || !j.contains("vertices") || !j.contains("triangles"))
    throw InputError("mesh file '" + path + "': expected keys 'vertices' and 'triangles'");
  std::vector<Vec2> vertices;
  std::vector<CrossSection::Triangle> triangles;
  try {
    for (const auto& v : j.at("vertices")) {
      if (v.size() != 2) throw InputError("mesh file: vertex must have 2 coordinates");
      vertices.emplace_back(v[0].get<double>(), v[1].get<double>());
    }
    for (const auto& t : j.at("triangles")) {
      if (t.size() != 3) throw InputError("mesh file: triangle must have 3 indices");
      triangles.push_back({t[0].get<int>(), t[1].get<int>(), t[2].get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError("mesh file '" + path + "': " + e.what());
  }
  return CrossSection(std::move(vertices), std::move(triangles));
}

void write_section_json(const CrossSection& s, const std::string& path) {
  nlohmann::json j;
  j["vertices"] = nlohmann::json::array();
  for (const auto& v : s.vertices()) j["vertices"].push_back({v.x(), v.y()});
  j["triangles"] = nlohmann::json::array();
  for (const auto& t : s.triangles()) j["triangles"].push_back({t[0], t[1], t[2]});
  std::ofstream out(path);
  if (!out) throw IoError("cannot write mesh file '" + path + "'");
  out << j.dump() << '\n';
}

}  // namespace rodlim
