#include "lhtes/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lhtes {

double log_barrier(double g, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("barrier needs tau > 0");
  if (g <= -1.0 / (tau * tau)) return -std::log(-g) / tau;
  return tau * g - std::log(1.0 / (tau * tau)) / tau + 1.0 / tau;
}

double log_barrier_slope(double g, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("barrier needs tau > 0");
  if (g <= -1.0 / (tau * tau)) return -1.0 / (tau * g);
  return tau;
}

CostConstraint cost_constraint(std::span<const double> gamma,
                               const QuadMesh& mesh, double cost, double rho,
                               double budget) {
  if (!(budget > 0.0)) throw std::invalid_argument("budget must be positive");
  if (gamma.size() != mesh.num_elements())
    throw std::invalid_argument("gamma length != element count");
  double vh = 0.0;
  CostConstraint out;
  out.d_gamma.resize(gamma.size());
  for (std::size_t e = 0; e < gamma.size(); ++e) {
    vh += (1.0 - gamma[e]) * mesh.volumes[e];
    out.d_gamma[e] = -cost * rho * mesh.volumes[e] / budget;
  }
  out.value = cost * rho * vh / budget - 1.0;
  out.d_cost = rho * vh / budget;
  out.d_rho = cost * vh / budget;
  return out;
}

CostConstraint volume_constraint(std::span<const double> gamma,
                                 const QuadMesh& mesh, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw std::invalid_argument("volume fraction must be in (0, 1]");
  if (gamma.size() != mesh.num_elements())
    throw std::invalid_argument("gamma length != element count");
  const double cap = fraction * mesh.total_volume();
  double vh = 0.0;
  CostConstraint out;
  out.d_gamma.resize(gamma.size());
  for (std::size_t e = 0; e < gamma.size(); ++e) {
    vh += (1.0 - gamma[e]) * mesh.volumes[e];
    out.d_gamma[e] = -mesh.volumes[e] / cap;
  }
  out.value = vh / cap - 1.0;
  return out;
}

SoftMin soft_min_distance(const Vec2& z, const LatentAtlas& atlas, double rho) {
  if (atlas.size() == 0) throw std::invalid_argument("empty latent atlas");
  if (!(rho > 0.0)) throw std::invalid_argument("LSE sharpness must be > 0");
  std::vector<double> d(atlas.size());
  for (std::size_t j = 0; j < d.size(); ++j)
    d[j] = std::hypot(z[0] - atlas.coords[j][0], z[1] - atlas.coords[j][1]);
  const double dmin = *std::min_element(d.begin(), d.end());
  double sum = 0.0;
  for (double dj : d) sum += std::exp(-rho * (dj - dmin));
  SoftMin out;
  out.value = dmin - std::log(sum) / rho;
  for (std::size_t j = 0; j < d.size(); ++j) {
    if (d[j] == 0.0) continue;  // subgradient 0 at the atlas point itself
    const double w = std::exp(-rho * (d[j] - dmin)) / sum;
    out.grad[0] += w * (z[0] - atlas.coords[j][0]) / d[j];
    out.grad[1] += w * (z[1] - atlas.coords[j][1]) / d[j];
  }
  return out;
}

LatentConstraint latent_constraint(const Vec2& z_hcm, const Vec2& z_pcm,
                                   const LatentAtlas& atlas_hcm,
                                   const LatentAtlas& atlas_pcm, double eps,
                                   double rho) {
  const SoftMin h = soft_min_distance(z_hcm, atlas_hcm, rho);
  const SoftMin p = soft_min_distance(z_pcm, atlas_pcm, rho);
  const double top = std::max(h.value, p.value);
  const double eh = std::exp(rho * (h.value - top));
  const double ep = std::exp(rho * (p.value - top));
  LatentConstraint out;
  out.soft_hcm = h.value;
  out.soft_pcm = p.value;
  out.value = top + std::log(eh + ep) / rho - eps;
  const double wh = eh / (eh + ep), wp = ep / (eh + ep);
  for (int i = 0; i < 2; ++i) {
    out.d_hcm[i] = wh * h.grad[i];
    out.d_pcm[i] = wp * p.grad[i];
  }
  return out;
}

}  // namespace lhtes
