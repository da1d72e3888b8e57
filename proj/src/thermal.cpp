#include "lhtes/thermal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lhtes {

namespace {

template <class F>
void for_each_element(std::size_t n, Exec exec, F&& f) {
  const auto count = static_cast<std::ptrdiff_t>(n);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t e = 0; e < count; ++e) f(static_cast<std::size_t>(e));
  } else {
    for (std::ptrdiff_t e = 0; e < count; ++e) f(static_cast<std::size_t>(e));
  }
}

}  // namespace

void TransientSetup::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (n_steps < 1) throw std::invalid_argument("need at least one time step");
  if (!(newton_tol > 0.0))
    throw std::invalid_argument("nonlinear tolerance must be positive");
  if (max_newton_iters < 1)
    throw std::invalid_argument("need at least one nonlinear iteration");
}

std::vector<int> CheckpointSchedule::stored_steps() const {
  std::vector<int> out;
  for (int i = 0; i <= n_steps; ++i)
    if (stores(i)) out.push_back(i);
  return out;
}

CheckpointSchedule make_schedule(int n_steps, int max_stored) {
  if (n_steps < 1) throw std::invalid_argument("schedule needs n_steps >= 1");
  if (max_stored < 2)
    throw std::invalid_argument("schedule needs max_stored >= 2");
  CheckpointSchedule s;
  s.n_steps = n_steps;
  s.stride = max_stored > n_steps
                 ? 1
                 : (n_steps + max_stored - 2) / (max_stored - 1);
  return s;
}

double TemperatureHistory::time(int step) const {
  double t = 0.0;
  for (int i = 0; i < step; ++i) t += dts[i];
  return t;
}

ThermalProblem::ThermalProblem(const QuadMesh& mesh, PhaseModel phase,
                               bool ggls, Exec exec)
    : mesh_(mesh), phase_(phase), ggls_(ggls), exec_(exec) {
  phase_.validate();
  const std::size_t nn = mesh.num_nodes(), ne = mesh.num_elements();
  free_index_.assign(nn, 0);
  for (int d : mesh.dirichlet_nodes) free_index_[d] = -1;
  for (std::size_t i = 0; i < nn; ++i)
    if (free_index_[i] == 0) {
      free_index_[i] = static_cast<int>(free_nodes_.size());
      free_nodes_.push_back(static_cast<int>(i));
    }
  if (free_nodes_.empty())
    throw std::invalid_argument("mesh has no free nodes");

  stiffness_.resize(ne);
  for (std::size_t e = 0; e < ne; ++e)
    stiffness_[e] = element_matrices_template(mesh, e).conductivity;

  std::vector<Eigen::Triplet<double>> trips;
  for (const auto& el : mesh.elements)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        const int fa = free_index_[el[a]], fb = free_index_[el[b]];
        if (fa >= 0 && fb >= 0) trips.emplace_back(fa, fb, 0.0);
      }
  const auto nf = static_cast<Eigen::Index>(free_nodes_.size());
  pattern_.resize(nf, nf);
  pattern_.setFromTriplets(trips.begin(), trips.end());
  pattern_.makeCompressed();

  const auto* outer = pattern_.outerIndexPtr();
  const auto* inner = pattern_.innerIndexPtr();
  scatter_.resize(ne);
  for (std::size_t e = 0; e < ne; ++e)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        const int fa = free_index_[mesh.elements[e][a]];
        const int fb = free_index_[mesh.elements[e][b]];
        int idx = -1;
        if (fa >= 0 && fb >= 0) {
          const auto* first = inner + outer[fb];
          const auto* last = inner + outer[fb + 1];
          idx = static_cast<int>(std::lower_bound(first, last, fa) - inner);
        }
        scatter_[e][a * 4 + b] = idx;
      }
  mat_buf_.resize(ne);
  vec_buf_.resize(ne);
  vec_buf2_.resize(ne);
}

VecX ThermalProblem::restrict_free(const VecX& full) const {
  VecX out(free_nodes_.size());
  for (std::size_t i = 0; i < free_nodes_.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = full[free_nodes_[i]];
  return out;
}

VecX ThermalProblem::initial_state(const TransientSetup& setup) const {
  VecX T = VecX::Constant(static_cast<Eigen::Index>(num_nodes()),
                          setup.initial_temp);
  for (int d : mesh_.dirichlet_nodes) T[d] = setup.boundary_temp;
  return T;
}

KernelParams ThermalProblem::kernel_params(const EffectiveProperties& props,
                                           double dt) const {
  KernelParams p;
  p.phase = phase_;
  p.phase.melt_temp = props.melt_temp;
  p.dt = dt;
  p.ggls = ggls_;
  return p;
}

ElementGeometry ThermalProblem::geometry(std::size_t e) const {
  return {&mesh_.quadrature[e], &stiffness_[e], mesh_.volumes[e]};
}

ElementCoeffs ThermalProblem::coeffs(const EffectiveProperties& props,
                                     std::size_t e) const {
  return {props.k[e], props.rho[e], props.c[e], props.latent[e]};
}

Vec4 ThermalProblem::gather(const VecX& v, std::size_t e) const {
  const auto& el = mesh_.elements[e];
  return {v[el[0]], v[el[1]], v[el[2]], v[el[3]]};
}

void ThermalProblem::scatter_matrix(const std::vector<Mat4>& blocks,
                                    bool transpose, SpMat& M) const {
  if (M.nonZeros() != pattern_.nonZeros() || M.rows() != pattern_.rows())
    M = pattern_;
  double* vals = M.valuePtr();
  std::fill(vals, vals + M.nonZeros(), 0.0);
  for (std::size_t e = 0; e < blocks.size(); ++e) {
    const auto& map = scatter_[e];
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        const int idx = transpose ? map[b * 4 + a] : map[a * 4 + b];
        if (idx >= 0) vals[idx] += blocks[e](a, b);
      }
  }
}

void ThermalProblem::assemble_step(const EffectiveProperties& props,
                                   const VecX& T, const VecX& T_prev, double dt,
                                   SpMat& J, VecX& residual, VecX& load) const {
  const KernelParams kp = kernel_params(props, dt);
  for_each_element(mesh_.num_elements(), exec_, [&](std::size_t e) {
    element_step(geometry(e), coeffs(props, e), kp, gather(T, e),
                 gather(T_prev, e), mat_buf_[e], vec_buf_[e], vec_buf2_[e]);
  });
  scatter_matrix(mat_buf_, false, J);
  residual.setZero(static_cast<Eigen::Index>(num_nodes()));
  load.setZero(static_cast<Eigen::Index>(num_nodes()));
  for (std::size_t e = 0; e < mesh_.num_elements(); ++e)
    for (int a = 0; a < 4; ++a) {
      residual[mesh_.elements[e][a]] += vec_buf_[e][a];
      load[mesh_.elements[e][a]] += vec_buf2_[e][a];
    }
}

VecX ThermalProblem::residual(const EffectiveProperties& props, const VecX& T,
                              const VecX& T_prev, double dt) const {
  SpMat J;
  VecX r, load;
  assemble_step(props, T, T_prev, dt, J, r, load);
  return r;
}

VecX ThermalProblem::previous_coupling(const EffectiveProperties& props,
                                       const VecX& T, const VecX& T_prev,
                                       const VecX& lambda, double dt) const {
  const KernelParams kp = kernel_params(props, dt);
  for_each_element(mesh_.num_elements(), exec_, [&](std::size_t e) {
    vec_buf_[e] = element_previous_coupling(geometry(e), coeffs(props, e), kp,
                                            gather(T, e), gather(T_prev, e),
                                            gather(lambda, e));
  });
  VecX out = VecX::Zero(static_cast<Eigen::Index>(num_nodes()));
  for (std::size_t e = 0; e < mesh_.num_elements(); ++e)
    for (int a = 0; a < 4; ++a) out[mesh_.elements[e][a]] += vec_buf_[e][a];
  return out;
}

void ThermalProblem::accumulate_sensitivity(const EffectiveProperties& props,
                                            const VecX& T, const VecX& T_prev,
                                            const VecX& lambda, double dt,
                                            PropertyGradient& grad) const {
  const KernelParams kp = kernel_params(props, dt);
  std::vector<ElementSensitivity> buf(mesh_.num_elements());
  for_each_element(mesh_.num_elements(), exec_, [&](std::size_t e) {
    buf[e] = element_sensitivity(geometry(e), coeffs(props, e), kp,
                                 gather(T, e), gather(T_prev, e),
                                 gather(lambda, e));
  });
  for (std::size_t e = 0; e < buf.size(); ++e) {
    grad.k[e] += buf[e].k;
    grad.rho[e] += buf[e].rho;
    grad.c[e] += buf[e].c;
    grad.latent[e] += buf[e].latent;
    grad.melt_temp += buf[e].melt_temp;
  }
}

StepOutcome ThermalProblem::solve_step(const EffectiveProperties& props,
                                       const VecX& T_prev, double dt,
                                       const TransientSetup& setup, VecX& T) {
  StepOutcome out;
  SpMat J, J2;
  VecX r, load, trial, r2, load2;
  assemble_step(props, T, T_prev, dt, J, r, load);
  double norm = restrict_free(r).norm();
  out.tolerance = setup.newton_tol * (1.0 + restrict_free(load).norm());

  for (int it = 0;; ++it) {
    out.residual = norm;
    out.iterations = it;
    if (!std::isfinite(norm)) return out;
    if (norm <= out.tolerance) {
      out.converged = true;
      return out;
    }
    if (it == setup.max_newton_iters) return out;
    if (!ldlt_) {
      ldlt_ = std::make_unique<Eigen::SimplicialLDLT<SpMat>>();
      ldlt_->analyzePattern(J);
    }
    ldlt_->factorize(J);
    if (ldlt_->info() != Eigen::Success) return out;
    const VecX delta = ldlt_->solve(-restrict_free(r));
    // J is SPD, so the Newton direction always descends on ||r||.
    bool accepted = false;
    for (double s = 1.0; s >= 1.0 / 1024.0 && !accepted; s *= 0.5) {
      trial = T;
      for (std::size_t i = 0; i < free_nodes_.size(); ++i)
        trial[free_nodes_[i]] += s * delta[static_cast<Eigen::Index>(i)];
      assemble_step(props, trial, T_prev, dt, J2, r2, load2);
      const double n = restrict_free(r2).norm();
      if (std::isfinite(n) && n < (1.0 - 1e-4 * s) * norm) {
        T.swap(trial);
        J.swap(J2);
        r.swap(r2);
        norm = n;
        accepted = true;
      }
    }
    if (!accepted) return out;
  }
}

void ThermalProblem::advance(const EffectiveProperties& props,
                             const TransientSetup& setup, const VecX& T_prev,
                             double dt, int depth, std::vector<VecX>& states,
                             std::vector<double>& dts,
                             std::vector<int>& iterations) {
  VecX T = T_prev;
  const StepOutcome o = solve_step(props, T_prev, dt, setup, T);
  if (o.converged) {
    states.push_back(std::move(T));
    dts.push_back(dt);
    iterations.push_back(o.iterations);
    return;
  }
  if (depth >= setup.max_bisections) {
    std::ostringstream msg;
    msg << "nonlinear solve failed: dt=" << dt << " after " << depth
        << " bisections, residual " << o.residual << " > tolerance "
        << o.tolerance << " at iteration " << o.iterations;
    throw NonConvergence(msg.str());
  }
  advance(props, setup, T_prev, 0.5 * dt, depth + 1, states, dts, iterations);
  const VecX mid = states.back();
  advance(props, setup, mid, 0.5 * dt, depth + 1, states, dts, iterations);
}

TemperatureHistory ThermalProblem::run_transient(
    const EffectiveProperties& props, const TransientSetup& setup,
    const CheckpointSchedule* schedule) {
  setup.validate();
  if (props.size() != mesh_.num_elements())
    throw std::invalid_argument("property vector length != element count");
  TemperatureHistory h;
  h.schedule = schedule ? *schedule : make_schedule(setup.n_steps, setup.n_steps + 1);
  PhaseModel ph = phase_;
  ph.melt_temp = props.melt_temp;
  VecX current = initial_state(setup);
  h.states.push_back(current);
  h.energy.push_back(
      stored_energy(mesh_, props, ph, current, setup.boundary_temp));
  for (int n = 0; n < setup.n_steps; ++n) {
    std::vector<VecX> states;
    std::vector<double> dts;
    std::vector<int> its;
    advance(props, setup, current, setup.dt, 0, states, dts, its);
    for (std::size_t s = 0; s < states.size(); ++s) {
      const int step = static_cast<int>(h.states.size());
      h.dts.push_back(dts[s]);
      h.iterations.push_back(its[s]);
      h.energy.push_back(
          stored_energy(mesh_, props, ph, states[s], setup.boundary_temp));
      h.states.push_back(step % h.schedule.stride == 0 ? states[s] : VecX());
    }
    current = states.back();
  }
  h.schedule.n_steps = h.num_steps();
  h.states.back() = current;
  return h;
}

void ThermalProblem::recompute_span(const EffectiveProperties& props,
                                    const TransientSetup& setup,
                                    const TemperatureHistory& history,
                                    int from, int to, std::vector<VecX>& out) {
  if (!history.stored(from))
    throw std::logic_error("recompute_span: start state not stored");
  out.clear();
  out.push_back(history.states[from]);
  for (int i = from + 1; i <= to; ++i) {
    if (history.stored(i)) {
      out.push_back(history.states[i]);
      continue;
    }
    VecX T = out.back();
    const StepOutcome o =
        solve_step(props, out.back(), history.dts[i - 1], setup, T);
    if (!o.converged)
      throw NonConvergence("recomputation of a checkpointed step failed");
    out.push_back(std::move(T));
  }
}

double stored_energy(const QuadMesh& mesh, const EffectiveProperties& props,
                     const PhaseModel& phase, const VecX& T, double T_ref) {
  const double tc = props.melt_temp + 0.5 * phase.mushy_width;
  double J = 0.0;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto& el = mesh.elements[e];
    const double Te = 0.25 * (T[el[0]] + T[el[1]] + T[el[2]] + T[el[3]]);
    const double psi = smooth_step(Te, tc, phase.alpha, phase.mushy_width);
    J += (props.c[e] * (Te - T_ref) + props.latent[e] * psi) * props.rho[e] *
         mesh.volumes[e];
  }
  return J;
}

EnergyPartials stored_energy_partials(const QuadMesh& mesh,
                                      const EffectiveProperties& props,
                                      const PhaseModel& phase, const VecX& T,
                                      double T_ref) {
  const double tc = props.melt_temp + 0.5 * phase.mushy_width;
  EnergyPartials out{VecX::Zero(T.size()), PropertyGradient(mesh.num_elements())};
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto& el = mesh.elements[e];
    const double Te = 0.25 * (T[el[0]] + T[el[1]] + T[el[2]] + T[el[3]]);
    const double psi = smooth_step(Te, tc, phase.alpha, phase.mushy_width);
    const double dpsi = smooth_step_slope(Te, tc, phase.alpha, phase.mushy_width);
    const double rv = props.rho[e] * mesh.volumes[e];
    const double dTe = (props.c[e] + props.latent[e] * dpsi) * rv;
    for (int a = 0; a < 4; ++a) out.dT[el[a]] += 0.25 * dTe;
    out.props.c[e] = (Te - T_ref) * rv;
    out.props.rho[e] =
        (props.c[e] * (Te - T_ref) + props.latent[e] * psi) * mesh.volumes[e];
    out.props.latent[e] = psi * rv;
    out.props.melt_temp -= props.latent[e] * dpsi * rv;
  }
  return out;
}

double boundary_heat(const QuadMesh& mesh, const VecX& residual_full) {
  double q = 0.0;
  for (int d : mesh.dirichlet_nodes) q += residual_full[d];
  return q;
}

}  // namespace lhtes
