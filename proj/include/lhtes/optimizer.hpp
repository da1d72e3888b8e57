#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lhtes/adjoint.hpp"
#include "lhtes/constraints.hpp"
#include "lhtes/design_field.hpp"
#include "lhtes/material_db.hpp"
#include "lhtes/thermal.hpp"
#include "lhtes/vae.hpp"

namespace lhtes {

/// Continuation of SIMP exponent, projection sharpness, latent radius and
/// barrier weight over the iteration counter k.
struct Schedules {
  double penal_start = 1.0, penal_rate = 0.005, penal_max = 3.0;
  double beta_start = 1.0, beta_rate = 0.04, beta_max = 64.0;
  double eps_start = 4.0, eps_rate = 0.08, eps_min = 0.02;
  double tau_start = 3.0, tau_growth = 1.02;

  double penal(int k) const;
  double beta(int k) const;
  double eps_star(int k) const;
  double tau(int k) const;
};

struct AdamSettings {
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m, v;
  int t = 0;
};

/// One ADAM update on the entries flagged in `active`; inactive entries are
/// left untouched.
void adam_step(std::vector<double>& x, const std::vector<double>& grad,
               const std::vector<char>& active, AdamState& state,
               const AdamSettings& settings);

enum class Mode { co_design, geometry_only, sequential_hcm, sequential_pcm, sequential };
enum class ObjectiveKind { discharged, remaining };
enum class BudgetKind { cost, volume };

Mode parse_mode(std::string_view s);
std::string_view to_string(Mode m);
ObjectiveKind parse_objective(std::string_view s);
std::string_view to_string(ObjectiveKind o);
BudgetKind parse_budget_kind(std::string_view s);
std::string_view to_string(BudgetKind b);

/// Databases, decoders and atlases of both material classes.
struct MaterialLibrary {
  MaterialDatabase hcm_db, pcm_db;
  DecoderModel hcm_decoder, pcm_decoder;
  LatentAtlas hcm_atlas, pcm_atlas;

  /// Reads {hcm,pcm}.csv, {hcm,pcm}.vae and {hcm,pcm}_atlas.csv.
  static MaterialLibrary load(const std::filesystem::path& dir);
};

struct ProblemSettings {
  double r_inner = 0.1, r_outer = 1.0;
  int n_radial = 50, n_angular = 100;
  bool radial_weighting = false;
  PhaseModel phase;  // melt_temp ignored; taken from the PCM
  bool ggls = true;
  TransientSetup transient;
  Exec exec = Exec::parallel;
  int max_stored_states = 0;  // 0 keeps every state
};

struct OptimizerSettings {
  Mode mode = Mode::co_design;
  ObjectiveKind objective = ObjectiveKind::remaining;
  BudgetKind budget_kind = BudgetKind::cost;
  double budget = 600.0;
  double volume_fraction = 0.2;
  int max_iters = 400;
  double tolerance = 1e-4;
  double filter_radius = 0.03;
  double initial_gamma = 0.9;
  Vec2 initial_z_hcm{0.0, 0.0};
  Vec2 initial_z_pcm{0.0, 0.0};
  // Start z_pcm at the atlas point of the database PCM whose melting point
  // is closest to the middle of [boundary_temp, initial_temp].
  bool pcm_start_midrange = false;
  double lse_sharpness = 20.0;
  // Sharpness floor scale / eps*: keeps the LogSumExp bias a small fraction
  // of the latent radius once it shrinks. 0 keeps lse_sharpness fixed.
  double lse_radius_scale = 10.0;
  // Per-iteration latent displacement is capped at this fraction of eps*,
  // so a step cannot carry z far outside the admissible ball. 0 disables.
  double latent_step_fraction = 0.1;
  // Backtrack a step that would leave the feasible set of the constraints.
  bool feasibility_guard = true;
  std::string hcm_name = "Aluminum";  // fixed HCM where the mode needs one
  std::string pcm_name = "RT-25";     // fixed PCM where the mode needs one
  std::vector<double> initial_density;  // overrides initial_gamma when set
  AdamSettings adam;
  Schedules schedules;

  double sharpness(double eps_star) const;
};

struct IterationLog {
  int iter = 0;
  double objective = 0.0;     // raw functional (J_end, or J_end - J_0)
  double normalized = 0.0;    // objective / |objective at iteration 0|
  double discharged = 0.0;    // J_0 - J_end
  double g_budget = 0.0;      // cost or volume constraint in use
  double g_latent = 0.0;
  double loss = 0.0;
  double penal = 0.0, beta = 0.0, eps_star = 0.0, tau = 0.0;
  double change = 0.0;        // max |design update|
  double wall_time = 0.0;
  std::string stage;
};

/// Re-simulation of a design with exact database materials.
struct DesignReport {
  std::string hcm_name, pcm_name;
  Vec2 z_hcm{0.0, 0.0}, z_pcm{0.0, 0.0};
  double dist_hcm = 0.0, dist_pcm = 0.0;
  double discharged = 0.0;
  double g_budget = 0.0;
  std::vector<double> energy;  // J per step
  std::vector<double> times;
};

struct OptimizationResult {
  DesignState design;
  std::vector<double> physical;
  ChainSettings chain;
  HcmProperties hcm_continuous;
  PcmProperties pcm_continuous;
  double discharged_continuous = 0.0;
  double g_budget = 0.0;
  double g_latent = 0.0;
  double eps_final = 0.0;
  DesignReport snapped;
  std::vector<IterationLog> log;
  std::string stop_reason;
};

/// Raised when a forward or adjoint solve fails mid-run; carries the design
/// of the failing iteration for post-mortem output.
class OptimizationAborted : public NonConvergence {
 public:
  OptimizationAborted(const std::string& what, DesignState design, int iteration)
      : NonConvergence(what), design(std::move(design)), iteration(iteration) {}
  DesignState design;
  int iteration;
};

using IterationCallback = std::function<void(const IterationLog&)>;

/// Gradient-based design loop with log-barrier constraints and
/// continuation. The `sequential` mode chains geometry-only, HCM-only and
/// PCM-only stages.
class Optimizer {
 public:
  Optimizer(const ProblemSettings& problem, const MaterialLibrary& library);

  OptimizationResult run(const OptimizerSettings& settings,
                         const IterationCallback& callback = {});

  /// Simulates a fixed physical density field with named materials.
  DesignReport evaluate(const std::vector<double>& physical, double penal,
                        const MaterialRecord& hcm, const MaterialRecord& pcm,
                        const OptimizerSettings& settings);

  const QuadMesh& mesh() const { return mesh_; }
  ThermalProblem& thermal() { return problem_; }
  const MaterialLibrary& library() const { return library_; }

 private:
  struct Stage {
    std::string name;
    bool gamma = true, z_hcm = true, z_pcm = true;
    MaterialSource hcm, pcm;
    std::optional<ChainSettings> frozen_chain;
  };

  void run_stage(const OptimizerSettings& s, const Stage& stage,
                 DesignState& design, ChainSettings& last_chain,
                 std::vector<IterationLog>& log, std::string& stop,
                 const IterationCallback& callback);
  DesignReport snap(const OptimizationResult& r, const Stage& stage,
                    const OptimizerSettings& s);

  ProblemSettings settings_;
  const MaterialLibrary& library_;
  QuadMesh mesh_;
  ThermalProblem problem_;
  FilterOperator filter_;
  double filter_radius_ = 0.0;
};

/// Atlas point of the PCM with melting point nearest `temp` (first on ties).
Vec2 nearest_melting_point(const MaterialLibrary& library, double temp);

/// Radial HCM fins (gamma = 0) centred at (k + 1/2) / n of the quarter
/// circle, each round(fraction * n_angular / n) whole element columns wide
/// (at least one). Throws when the fins do not fit the mesh.
std::vector<double> fin_baseline(const QuadMesh& mesh, int n_fins,
                                 double hcm_fraction);

}  // namespace lhtes
