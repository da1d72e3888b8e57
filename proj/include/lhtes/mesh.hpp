#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "lhtes/vae.hpp"  // Vec2

namespace lhtes {

using Mat4 = Eigen::Matrix4d;

/// Quadrature data for one Gauss point of a bilinear element.
struct GaussPoint {
  double weight = 0.0;  // Gauss weight times |J| (times r when r-weighted)
  std::array<double, 4> N{};
  std::array<double, 4> dNdx{};
  std::array<double, 4> dNdy{};
  Vec2 x{};
};

enum class MeshLayout { quarter_annulus, rectangle };

/// Structured mesh of four-node quadrilaterals. Nodes of element e are
/// stored counterclockwise. Boundary tags: `dirichlet_nodes` carries the
/// prescribed-temperature boundary, `neumann_nodes` the rest of the boundary.
struct QuadMesh {
  MeshLayout layout = MeshLayout::quarter_annulus;
  int n_radial = 0;   // elements along r (or x)
  int n_angular = 0;  // elements along theta (or y)
  double r_inner = 0.0, r_outer = 0.0;  // or 0 and x-length for rectangles
  double extent_y = 0.0;                // rectangle height

  std::vector<Vec2> nodes;
  std::vector<std::array<int, 4>> elements;
  std::vector<double> volumes;  // m^3 per unit depth
  std::vector<Vec2> centroids;
  std::vector<int> dirichlet_nodes;
  std::vector<int> neumann_nodes;
  std::vector<std::array<GaussPoint, 4>> quadrature;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_elements() const { return elements.size(); }
  double total_volume() const;
  /// Element length scale: sqrt of the element area.
  double element_size(std::size_t e) const;
  int element_index(int i_radial, int j_angular) const {
    return j_angular * n_radial + i_radial;
  }
};

/// Polar grid, uniform in r and theta, over the quarter annulus. Elements
/// use the exact polar geometry map with bilinear field interpolation, so
/// element areas are exact annular sectors. The inner arc is the Dirichlet
/// boundary.
QuadMesh build_quarter_annulus(double r_inner, double r_outer, int n_r,
                               int n_theta, bool radial_weighting = false);

/// Axis-aligned rectangle [0, lx] x [0, ly]; the x = 0 edge is Dirichlet.
QuadMesh build_rectangle(double lx, double ly, int nx, int ny);

struct ElementTemplates {
  Mat4 conductivity;  // int grad(N)^T grad(N)
  Mat4 mass;          // int N^T N
};

ElementTemplates element_matrices_template(const QuadMesh& mesh,
                                           std::size_t e);

/// Templates for an isoparametric bilinear quad given its corners (CCW).
ElementTemplates bilinear_templates(const std::array<Vec2, 4>& corners);

/// Isoparametric 2x2 Gauss data for arbitrary corners; throws on a
/// non-positive Jacobian.
std::array<GaussPoint, 4> bilinear_quadrature(const std::array<Vec2, 4>& corners);

}  // namespace lhtes
