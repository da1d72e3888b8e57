#pragma once

#include <memory>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "lhtes/design_field.hpp"
#include "lhtes/exec.hpp"
#include "lhtes/kernels.hpp"
#include "lhtes/mesh.hpp"
#include "lhtes/phase.hpp"

namespace lhtes {

using SpMat = Eigen::SparseMatrix<double>;
using VecX = Eigen::VectorXd;

struct TransientSetup {
  double initial_temp = 373.15;   // T_I
  double boundary_temp = 273.15;  // T_d
  double dt = 8000.0;
  int n_steps = 60;
  double newton_tol = 1e-7;
  int max_newton_iters = 60;
  int max_bisections = 4;

  void validate() const;
};

/// Uniformly spaced checkpoints: every `stride`-th step plus the last one.
struct CheckpointSchedule {
  int n_steps = 0;
  int stride = 1;

  bool stores(int step) const {
    return step % stride == 0 || step == n_steps;
  }
  std::vector<int> stored_steps() const;
};

/// Store-all when max_stored > n_steps; otherwise spacing
/// ceil(n_steps / (max_stored - 1)).
CheckpointSchedule make_schedule(int n_steps, int max_stored);

/// Transient solution. `states[i]` is empty for steps dropped by the
/// checkpoint schedule; `dts` lists the accepted step sizes (bisected steps
/// appear as several entries).
struct TemperatureHistory {
  std::vector<VecX> states;
  std::vector<double> dts;
  std::vector<int> iterations;
  std::vector<double> energy;  // stored energy at every step, T_ref = T_d
  CheckpointSchedule schedule;

  int num_steps() const { return static_cast<int>(dts.size()); }
  double time(int step) const;
  bool stored(int step) const { return states[step].size() > 0; }
  const VecX& final_state() const { return states.back(); }
};

class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepOutcome {
  int iterations = 0;
  double residual = 0.0;
  double tolerance = 0.0;
  bool converged = false;
};

/// Apparent-heat-capacity conduction solver on a fixed mesh. Dirichlet
/// nodes are eliminated; sparse matrices live on the free nodes only and
/// are filled through a precomputed element-to-storage scatter map, so the
/// serial and OpenMP assembly paths give identical bits.
class ThermalProblem {
 public:
  ThermalProblem(const QuadMesh& mesh, PhaseModel phase, bool ggls = true,
                 Exec exec = Exec::parallel);

  const QuadMesh& mesh() const { return mesh_; }
  std::size_t num_nodes() const { return mesh_.num_nodes(); }
  std::size_t num_free() const { return free_nodes_.size(); }
  const std::vector<int>& free_nodes() const { return free_nodes_; }
  const std::vector<int>& free_index() const { return free_index_; }
  const PhaseModel& phase() const { return phase_; }
  bool ggls() const { return ggls_; }
  void set_ggls(bool on) { ggls_ = on; }
  Exec exec() const { return exec_; }
  void set_exec(Exec e) { exec_ = e; }

  VecX restrict_free(const VecX& full) const;
  VecX initial_state(const TransientSetup& setup) const;

  /// Step Jacobian on free nodes, residual and load on all nodes.
  void assemble_step(const EffectiveProperties& props, const VecX& T,
                     const VecX& T_prev, double dt, SpMat& J, VecX& residual,
                     VecX& load) const;
  VecX residual(const EffectiveProperties& props, const VecX& T,
                const VecX& T_prev, double dt) const;
  /// -(dr/dT_prev)^T lambda on all nodes.
  VecX previous_coupling(const EffectiveProperties& props, const VecX& T,
                         const VecX& T_prev, const VecX& lambda,
                         double dt) const;
  /// grad += lambda^T dr/d(properties).
  void accumulate_sensitivity(const EffectiveProperties& props, const VecX& T,
                              const VecX& T_prev, const VecX& lambda,
                              double dt, PropertyGradient& grad) const;

  /// One backward-Euler step by damped Newton, no bisection. T holds the
  /// initial guess on entry and the iterate on exit.
  StepOutcome solve_step(const EffectiveProperties& props, const VecX& T_prev,
                         double dt, const TransientSetup& setup, VecX& T);

  TemperatureHistory run_transient(const EffectiveProperties& props,
                                   const TransientSetup& setup,
                                   const CheckpointSchedule* schedule = nullptr);

  /// Rebuilds a dropped state from the nearest stored predecessor.
  void recompute_span(const EffectiveProperties& props,
                      const TransientSetup& setup,
                      const TemperatureHistory& history, int from, int to,
                      std::vector<VecX>& out);

 private:
  KernelParams kernel_params(const EffectiveProperties& props, double dt) const;
  ElementGeometry geometry(std::size_t e) const;
  ElementCoeffs coeffs(const EffectiveProperties& props, std::size_t e) const;
  Vec4 gather(const VecX& v, std::size_t e) const;
  void scatter_matrix(const std::vector<Mat4>& blocks, bool transpose,
                      SpMat& M) const;
  void advance(const EffectiveProperties& props, const TransientSetup& setup,
               const VecX& T_prev, double dt, int depth,
               std::vector<VecX>& states, std::vector<double>& dts,
               std::vector<int>& iterations);

  const QuadMesh& mesh_;
  PhaseModel phase_;
  bool ggls_;
  Exec exec_;
  std::vector<int> free_nodes_;
  std::vector<int> free_index_;
  std::vector<Mat4> stiffness_;
  SpMat pattern_;
  std::vector<std::array<int, 16>> scatter_;  // -1 for Dirichlet couplings
  std::unique_ptr<Eigen::SimplicialLDLT<SpMat>> ldlt_;
  mutable std::vector<Mat4> mat_buf_;
  mutable std::vector<Vec4> vec_buf_, vec_buf2_;
};

/// J = sum_e [c (T_e - T_ref) + L Psi(T_e; T_m + width / 2)] rho v_e with
/// T_e the mean of the element's nodal temperatures.
double stored_energy(const QuadMesh& mesh, const EffectiveProperties& props,
                     const PhaseModel& phase, const VecX& T, double T_ref);

/// dJ/dT on all nodes and dJ/d(properties).
struct EnergyPartials {
  VecX dT;
  PropertyGradient props;
};
EnergyPartials stored_energy_partials(const QuadMesh& mesh,
                                      const EffectiveProperties& props,
                                      const PhaseModel& phase, const VecX& T,
                                      double T_ref);

/// Heat released through the Dirichlet boundary during one step: the sum
/// of the full residual over the Dirichlet rows.
double boundary_heat(const QuadMesh& mesh, const VecX& residual_full);

}  // namespace lhtes
