#pragma once

#include <array>
#include <vector>

#include "lhtes/constraints.hpp"
#include "lhtes/design_field.hpp"
#include "lhtes/thermal.hpp"
#include "lhtes/vae.hpp"

namespace lhtes {

/// A material is either decoded from its latent coordinate or fixed to a
/// given attribute vector.
struct MaterialSource {
  const DecoderModel* decoder = nullptr;
  std::vector<double> fixed;

  bool latent() const { return decoder != nullptr; }
  std::vector<double> attributes(const Vec2& z) const;
};

struct ChainSettings {
  double penal = 1.0;
  double beta = 1.0;
  double eta = 0.5;
};

/// Intermediates of gamma -> filter -> project -> interpolate.
struct DesignEvaluation {
  std::vector<double> filtered;
  std::vector<double> physical;
  std::vector<double> hcm_attr, pcm_attr;
  HcmProperties hcm;
  PcmProperties pcm;
  EffectiveProperties props;
};

DesignEvaluation evaluate_design(const DesignState& design,
                                 const FilterOperator& filter,
                                 const MaterialSource& hcm,
                                 const MaterialSource& pcm,
                                 const ChainSettings& chain,
                                 Exec exec = Exec::serial);

struct DesignGradient {
  std::vector<double> gamma;
  Vec2 z_hcm{0.0, 0.0};
  Vec2 z_pcm{0.0, 0.0};
};

/// Sensitivities expressed on the intermediates of the design chain.
struct ChainSeed {
  const PropertyGradient* props = nullptr;  // d/d(effective properties)
  std::vector<double> physical;             // d/d(projected gamma), optional
  std::array<double, 4> hcm_attr{};         // direct d/d(HCM attributes)
  std::array<double, 5> pcm_attr{};         // direct d/d(PCM attributes)
};

/// Reverse pass through interpolate, decode, project and filter.
DesignGradient pull_back(const DesignState& design, const DesignEvaluation& ev,
                         const FilterOperator& filter, const MaterialSource& hcm,
                         const MaterialSource& pcm, const ChainSettings& chain,
                         const ChainSeed& seed, Exec exec = Exec::serial);

/// lambda-weighted sensitivities of a function of the final temperature
/// field, propagated backward through every recorded time step. States
/// dropped by the checkpoint schedule are recomputed span by span.
PropertyGradient transient_adjoint(ThermalProblem& problem,
                                   const EffectiveProperties& props,
                                   const TransientSetup& setup,
                                   const TemperatureHistory& history,
                                   const VecX& d_final);

/// f = w_final * J(T_end) + w_initial * J(T_0).
struct ObjectiveWeights {
  double final_energy = 1.0;
  double initial_energy = 0.0;
};

struct ObjectiveResult {
  double value = 0.0;
  double J_initial = 0.0, J_final = 0.0;
  PropertyGradient d_props;
  TemperatureHistory history;
};

/// Forward solve plus adjoint; gradient returned on the effective
/// properties.
ObjectiveResult objective_with_adjoint(ThermalProblem& problem,
                                       const EffectiveProperties& props,
                                       const TransientSetup& setup,
                                       const ObjectiveWeights& weights,
                                       const CheckpointSchedule* schedule = nullptr);

/// Objective and cost-constraint gradients with respect to all design
/// variables, plus the latent-constraint gradient.
struct GradientBundle {
  double objective = 0.0;
  double J_initial = 0.0, J_final = 0.0;
  DesignGradient d_objective;
  double g_m = 0.0;
  DesignGradient d_cost;
  LatentConstraint latent;
};

struct BundleOptions {
  ObjectiveWeights weights;
  double budget = 600.0;
  const LatentAtlas* atlas_hcm = nullptr;
  const LatentAtlas* atlas_pcm = nullptr;
  double eps_star = 4.0;
  double lse_sharpness = 20.0;
  const CheckpointSchedule* schedule = nullptr;
};

GradientBundle adjoint_gradient(ThermalProblem& problem,
                                const DesignState& design,
                                const FilterOperator& filter,
                                const MaterialSource& hcm,
                                const MaterialSource& pcm,
                                const ChainSettings& chain,
                                const TransientSetup& setup,
                                const BundleOptions& options);

}  // namespace lhtes
