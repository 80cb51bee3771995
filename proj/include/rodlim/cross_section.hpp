#pragma once

#include "rodlim/common.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace rodlim {

struct SectionMoments {
  double area = 0.0;
  double I2 = 0.0;   ///< int x2^2
  double I3 = 0.0;   ///< int x3^2
  double I23 = 0.0;  ///< int x2 x3
  double muS = 0.0;  ///< int (x2^2 + x3^2) = I2 + I3
};

/// One quadrature point on a triangle: barycentric coordinates and weight.
struct TriangleQuadPoint {
  std::array<double, 3> bary;
  double weight;  ///< absolute weight (includes the triangle area)
  Vec2 point;
};

/// Triangulated planar cross-section with per-triangle P1 data and a
/// degree-2 exact quadrature (3 interior points per triangle).
///
/// Construction validates indices, strictly positive orientation, and that
/// no directed edge appears twice (conforming, consistently oriented mesh).
class CrossSection {
 public:
  using Triangle = std::array<int, 3>;

  CrossSection(std::vector<Vec2> vertices, std::vector<Triangle> triangles);

  const std::vector<Vec2>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }

  double triangle_area(int t) const { return areas_[t]; }
  /// Gradients (d/dx2, d/dx3) of the three barycentric basis functions of triangle t.
  const std::array<Vec2, 3>& basis_gradients(int t) const { return gradients_[t]; }
  const std::array<TriangleQuadPoint, 3>& quadrature(int t) const { return quadrature_[t]; }

  /// Integral of a function of (x2, x3) with the section quadrature.
  double integrate(const std::function<double(const Vec2&)>& fn) const;
  /// Integral of a P1 field given by nodal values (exact).
  double integrate_nodal(const std::vector<double>& nodal) const;

  /// True if |area-1|, |int x2|, |int x3| <= tol and |int x2 x3| <= 100 tol.
  bool is_normalized(double tol = 1e-10) const;

  double min_edge_length() const;
  double max_edge_length() const;

 private:
  std::vector<Vec2> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<double> areas_;
  std::vector<std::array<Vec2, 3>> gradients_;
  std::vector<std::array<TriangleQuadPoint, 3>> quadrature_;
};

/// Translate to the centroid, rotate to principal axes (I2 >= I3, first
/// principal axis with positive x2 component), scale to unit area.
CrossSection normalize(const CrossSection& raw);

SectionMoments moments(const CrossSection& s);

/// Throws InputError unless the section satisfies the centering conditions.
void require_normalized(const CrossSection& s, const char* who);

namespace sections {

/// Disc of the given radius: concentric rings, ring k carries 6k vertices.
/// Produces 6 rings^2 triangles.
CrossSection disc(int rings, double radius = 1.0);
/// Axis-aligned rectangle [-w/2,w/2] x [-h/2,h/2], each grid cell split into
/// four triangles around its center (symmetric pattern).
CrossSection rectangle(double width, double height, int nx, int ny);
CrossSection square(int n, double side = 1.0);
/// Regular polygon inscribed in the unit circle, ring-meshed like the disc.
CrossSection regular_polygon(int sides, int rings);

/// Builds a ring mesh of a region star-shaped about the origin whose boundary
/// is boundary(t), t in [0,1). Ring k (1..rings) has 6k vertices at
/// (k/rings) * boundary(j / 6k).
CrossSection star_shaped(const std::function<Vec2(double)>& boundary, int rings);

/// Uniform refinement: each triangle split into four via edge midpoints.
/// If project is set, new boundary midpoints are mapped through it.
CrossSection refine(const CrossSection& s, const std::function<Vec2(const Vec2&)>& project_boundary = {});

}  // namespace sections

CrossSection read_section_json(const std::string& path);
void write_section_json(const CrossSection& s, const std::string& path);

}  // namespace rodlim
