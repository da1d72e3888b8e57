#include "lhtes/mesh.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace lhtes {

namespace {

constexpr std::array<double, 4> kXiNode{-1.0, 1.0, 1.0, -1.0};
constexpr std::array<double, 4> kEtaNode{-1.0, -1.0, 1.0, 1.0};

struct ShapeEval {
  std::array<double, 4> N, dxi, deta;
};

ShapeEval shape(double xi, double eta) {
  ShapeEval s{};
  for (int a = 0; a < 4; ++a) {
    s.N[a] = 0.25 * (1.0 + xi * kXiNode[a]) * (1.0 + eta * kEtaNode[a]);
    s.dxi[a] = 0.25 * kXiNode[a] * (1.0 + eta * kEtaNode[a]);
    s.deta[a] = 0.25 * kEtaNode[a] * (1.0 + xi * kXiNode[a]);
  }
  return s;
}

const std::array<Vec2, 4>& gauss_points() {
  static const double g = 1.0 / std::sqrt(3.0);
  static const std::array<Vec2, 4> pts{{{-g, -g}, {g, -g}, {g, g}, {-g, g}}};
  return pts;
}

/// Fill shape-function gradients from the 2x2 geometry Jacobian
/// [dx/dxi dx/deta; dy/dxi dy/deta].
GaussPoint make_point(const ShapeEval& s, double j11, double j12, double j21,
                      double j22, Vec2 x, double weight_scale) {
  const double det = j11 * j22 - j12 * j21;
  if (!(det > 0.0))
    throw std::runtime_error("degenerate element: non-positive Jacobian");
  GaussPoint gp;
  gp.N = s.N;
  gp.x = x;
  gp.weight = det * weight_scale;
  // inverse transpose maps reference gradients to physical gradients
  for (int a = 0; a < 4; ++a) {
    gp.dNdx[a] = (j22 * s.dxi[a] - j21 * s.deta[a]) / det;
    gp.dNdy[a] = (-j12 * s.dxi[a] + j11 * s.deta[a]) / det;
  }
  return gp;
}

void finalize(QuadMesh& mesh) {
  mesh.volumes.resize(mesh.num_elements());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    double v = 0.0;
    for (const auto& gp : mesh.quadrature[e]) v += gp.weight;
    mesh.volumes[e] = v;
  }
}

}  // namespace

double QuadMesh::total_volume() const {
  return std::accumulate(volumes.begin(), volumes.end(), 0.0);
}

double QuadMesh::element_size(std::size_t e) const {
  return std::sqrt(volumes[e]);
}

std::array<GaussPoint, 4> bilinear_quadrature(
    const std::array<Vec2, 4>& corners) {
  std::array<GaussPoint, 4> out;
  for (int q = 0; q < 4; ++q) {
    const auto [xi, eta] = gauss_points()[q];
    const auto s = shape(xi, eta);
    double j11 = 0, j12 = 0, j21 = 0, j22 = 0, x = 0, y = 0;
    for (int a = 0; a < 4; ++a) {
      j11 += s.dxi[a] * corners[a][0];
      j12 += s.deta[a] * corners[a][0];
      j21 += s.dxi[a] * corners[a][1];
      j22 += s.deta[a] * corners[a][1];
      x += s.N[a] * corners[a][0];
      y += s.N[a] * corners[a][1];
    }
    out[q] = make_point(s, j11, j12, j21, j22, {x, y}, 1.0);
  }
  return out;
}

QuadMesh build_quarter_annulus(double r_inner, double r_outer, int n_r,
                               int n_theta, bool radial_weighting) {
  if (!(r_inner > 0.0) || !(r_outer > r_inner))
    throw std::invalid_argument("quarter annulus needs 0 < r_inner < r_outer");
  if (n_r < 1 || n_theta < 1)
    throw std::invalid_argument("quarter annulus needs n_r, n_theta >= 1");
  QuadMesh mesh;
  mesh.layout = MeshLayout::quarter_annulus;
  mesh.n_radial = n_r;
  mesh.n_angular = n_theta;
  mesh.r_inner = r_inner;
  mesh.r_outer = r_outer;
  const double dr = (r_outer - r_inner) / n_r;
  const double dtheta = 0.5 * std::numbers::pi / n_theta;
  auto radius = [&](int i) { return i == n_r ? r_outer : r_inner + i * dr; };
  auto angle = [&](int j) { return j == n_theta ? 0.5 * std::numbers::pi : j * dtheta; };

  mesh.nodes.reserve((n_r + 1) * (n_theta + 1));
  for (int j = 0; j <= n_theta; ++j)
    for (int i = 0; i <= n_r; ++i) {
      const double r = radius(i), t = angle(j);
      mesh.nodes.push_back({r * std::cos(t), r * std::sin(t)});
      if (i == 0)
        mesh.dirichlet_nodes.push_back(j * (n_r + 1) + i);
      else if (i == n_r || j == 0 || j == n_theta)
        mesh.neumann_nodes.push_back(j * (n_r + 1) + i);
    }

  auto node = [&](int i, int j) { return j * (n_r + 1) + i; };
  for (int j = 0; j < n_theta; ++j)
    for (int i = 0; i < n_r; ++i) {
      mesh.elements.push_back(
          {node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)});
      const double r0 = radius(i), r1 = radius(i + 1);
      const double t0 = angle(j), t1 = angle(j + 1);
      const double rc = 0.5 * (r0 + r1), tc = 0.5 * (t0 + t1);
      mesh.centroids.push_back({rc * std::cos(tc), rc * std::sin(tc)});
      std::array<GaussPoint, 4> quad;
      for (int q = 0; q < 4; ++q) {
        const auto [xi, eta] = gauss_points()[q];
        const auto s = shape(xi, eta);
        const double r = r0 + 0.5 * (xi + 1.0) * (r1 - r0);
        const double t = t0 + 0.5 * (eta + 1.0) * (t1 - t0);
        const double hr = 0.5 * (r1 - r0), ht = 0.5 * (t1 - t0);
        const double c = std::cos(t), sn = std::sin(t);
        quad[q] = make_point(s, hr * c, -r * sn * ht, hr * sn, r * c * ht,
                             {r * c, r * sn}, radial_weighting ? r : 1.0);
      }
      mesh.quadrature.push_back(quad);
    }
  finalize(mesh);
  return mesh;
}

QuadMesh build_rectangle(double lx, double ly, int nx, int ny) {
  if (!(lx > 0.0) || !(ly > 0.0) || nx < 1 || ny < 1)
    throw std::invalid_argument("rectangle needs positive extents and counts");
  QuadMesh mesh;
  mesh.layout = MeshLayout::rectangle;
  mesh.n_radial = nx;
  mesh.n_angular = ny;
  mesh.r_inner = 0.0;
  mesh.r_outer = lx;
  mesh.extent_y = ly;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      mesh.nodes.push_back({lx * i / nx, ly * j / ny});
      const int id = j * (nx + 1) + i;
      if (i == 0)
        mesh.dirichlet_nodes.push_back(id);
      else if (i == nx || j == 0 || j == ny)
        mesh.neumann_nodes.push_back(id);
    }
  auto node = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      std::array<int, 4> conn{node(i, j), node(i + 1, j), node(i + 1, j + 1),
                              node(i, j + 1)};
      mesh.elements.push_back(conn);
      std::array<Vec2, 4> corners;
      for (int a = 0; a < 4; ++a) corners[a] = mesh.nodes[conn[a]];
      mesh.centroids.push_back({lx * (i + 0.5) / nx, ly * (j + 0.5) / ny});
      mesh.quadrature.push_back(bilinear_quadrature(corners));
    }
  finalize(mesh);
  return mesh;
}

namespace {

ElementTemplates templates_from(const std::array<GaussPoint, 4>& quad) {
  ElementTemplates t;
  t.conductivity.setZero();
  t.mass.setZero();
  for (const auto& gp : quad)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        t.conductivity(a, b) +=
            gp.weight * (gp.dNdx[a] * gp.dNdx[b] + gp.dNdy[a] * gp.dNdy[b]);
        t.mass(a, b) += gp.weight * gp.N[a] * gp.N[b];
      }
  return t;
}

}  // namespace

ElementTemplates element_matrices_template(const QuadMesh& mesh, std::size_t e) {
  if (e >= mesh.num_elements())
    throw std::out_of_range("element index out of range");
  return templates_from(mesh.quadrature[e]);
}

ElementTemplates bilinear_templates(const std::array<Vec2, 4>& corners) {
  return templates_from(bilinear_quadrature(corners));
}

}  // namespace lhtes
