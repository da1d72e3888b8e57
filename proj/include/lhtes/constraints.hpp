#pragma once

#include <span>
#include <vector>

#include "lhtes/mesh.hpp"
#include "lhtes/vae.hpp"

namespace lhtes {

/// Extended log barrier: -(1/tau) ln(-g) for g <= -1/tau^2, continued
/// linearly (C^1) beyond.
double log_barrier(double g, double tau);
double log_barrier_slope(double g, double tau);

/// A scalar constraint with its partial derivatives.
struct CostConstraint {
  double value = 0.0;
  std::vector<double> d_gamma;  // per element
  double d_cost = 0.0;          // d/d(HCM cost per kg)
  double d_rho = 0.0;           // d/d(HCM density)
};

/// g_m = cost * rho * sum_e (1 - gamma_e) v_e / budget - 1.
CostConstraint cost_constraint(std::span<const double> gamma,
                               const QuadMesh& mesh, double cost, double rho,
                               double budget);

/// g_v = sum_e (1 - gamma_e) v_e / (fraction * V) - 1.
CostConstraint volume_constraint(std::span<const double> gamma,
                                 const QuadMesh& mesh, double fraction);

struct SoftMin {
  double value = 0.0;
  Vec2 grad{0.0, 0.0};
};

/// -(1/rho) log sum_j exp(-rho |z - a_j|), evaluated stably.
SoftMin soft_min_distance(const Vec2& z, const LatentAtlas& atlas, double rho);

struct LatentConstraint {
  double value = 0.0;
  double soft_hcm = 0.0, soft_pcm = 0.0;
  Vec2 d_hcm{0.0, 0.0}, d_pcm{0.0, 0.0};
};

/// g_l = smoothmax(softmin_H, softmin_P) - eps.
LatentConstraint latent_constraint(const Vec2& z_hcm, const Vec2& z_pcm,
                                   const LatentAtlas& atlas_hcm,
                                   const LatentAtlas& atlas_pcm, double eps,
                                   double rho);

}  // namespace lhtes
