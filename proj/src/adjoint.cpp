#include "lhtes/adjoint.hpp"

#include <Eigen/SparseCholesky>
#include <stdexcept>

namespace lhtes {

std::vector<double> MaterialSource::attributes(const Vec2& z) const {
  if (decoder) return decoder->decode(z);
  if (fixed.empty()) throw std::logic_error("material source has no data");
  return fixed;
}

DesignEvaluation evaluate_design(const DesignState& design,
                                 const FilterOperator& filter,
                                 const MaterialSource& hcm,
                                 const MaterialSource& pcm,
                                 const ChainSettings& chain, Exec exec) {
  DesignEvaluation ev;
  ev.filtered = filter.apply(design.gamma, exec);
  ev.physical = project(ev.filtered, chain.beta, chain.eta);
  ev.hcm_attr = hcm.attributes(design.z_hcm);
  ev.pcm_attr = pcm.attributes(design.z_pcm);
  ev.hcm = HcmProperties::from_attributes(ev.hcm_attr);
  ev.pcm = PcmProperties::from_attributes(ev.pcm_attr);
  ev.props = interpolate(ev.physical, ev.hcm, ev.pcm, chain.penal);
  return ev;
}

DesignGradient pull_back(const DesignState& design, const DesignEvaluation& ev,
                         const FilterOperator& filter, const MaterialSource& hcm,
                         const MaterialSource& pcm, const ChainSettings& chain,
                         const ChainSeed& seed, Exec exec) {
  const std::size_t n = design.gamma.size();
  std::vector<double> d_phys(n, 0.0);
  std::array<double, 4> d_h = seed.hcm_attr;
  std::array<double, 5> d_p = seed.pcm_attr;
  if (seed.props) {
    const auto pb = interpolation_pullback(ev.physical, ev.hcm, ev.pcm,
                                           chain.penal, *seed.props);
    d_phys = pb.gamma;
    for (int i = 0; i < 4; ++i) d_h[i] += pb.hcm[i];
    for (int i = 0; i < 5; ++i) d_p[i] += pb.pcm[i];
  }
  if (!seed.physical.empty())
    for (std::size_t e = 0; e < n; ++e) d_phys[e] += seed.physical[e];

  DesignGradient out;
  std::vector<double> d_filt(n);
  for (std::size_t e = 0; e < n; ++e)
    d_filt[e] = d_phys[e] * project_derivative(ev.filtered[e], chain.beta, chain.eta);
  out.gamma = filter.apply_transpose(d_filt, exec);

  auto latent_grad = [](const MaterialSource& src, const Vec2& z,
                        const double* d, int m) {
    Vec2 g{0.0, 0.0};
    if (!src.latent()) return g;
    const Eigen::MatrixXd J = src.decoder->decode_jacobian(z);
    for (int i = 0; i < m; ++i) {
      g[0] += d[i] * J(i, 0);
      g[1] += d[i] * J(i, 1);
    }
    return g;
  };
  out.z_hcm = latent_grad(hcm, design.z_hcm, d_h.data(), 4);
  out.z_pcm = latent_grad(pcm, design.z_pcm, d_p.data(), 5);
  return out;
}

PropertyGradient transient_adjoint(ThermalProblem& problem,
                                   const EffectiveProperties& props,
                                   const TransientSetup& setup,
                                   const TemperatureHistory& history,
                                   const VecX& d_final) {
  const int N = history.num_steps();
  PropertyGradient grad(props.size());
  std::vector<int> stored;
  for (int i = 0; i <= N; ++i)
    if (history.stored(i)) stored.push_back(i);
  if (stored.front() != 0 || stored.back() != N)
    throw std::logic_error("history must keep the first and last states");

  // the step Jacobian is symmetric, so it is its own transpose
  Eigen::SimplicialLDLT<SpMat> ldlt;
  bool analyzed = false;
  SpMat J;
  VecX r, load;
  VecX coupling = -problem.restrict_free(d_final);
  VecX lambda = VecX::Zero(static_cast<Eigen::Index>(problem.num_nodes()));
  std::vector<VecX> span;
  const auto& free = problem.free_nodes();

  for (int j = static_cast<int>(stored.size()) - 2; j >= 0; --j) {
    const int a = stored[j], b = stored[j + 1];
    problem.recompute_span(props, setup, history, a, b, span);
    for (int i = b; i > a; --i) {
      const VecX& T = span[i - a];
      const VecX& Tp = span[i - 1 - a];
      const double dt = history.dts[i - 1];
      problem.assemble_step(props, T, Tp, dt, J, r, load);
      if (!analyzed) {
        ldlt.analyzePattern(J);
        analyzed = true;
      }
      ldlt.factorize(J);
      if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("adjoint factorization failed at step " +
                                 std::to_string(i));
      const VecX lf = ldlt.solve(coupling);
      lambda.setZero();
      for (std::size_t k = 0; k < free.size(); ++k)
        lambda[free[k]] = lf[static_cast<Eigen::Index>(k)];
      problem.accumulate_sensitivity(props, T, Tp, lambda, dt, grad);
      coupling = problem.restrict_free(problem.previous_coupling(props, T, Tp, lambda, dt));
    }
  }
  return grad;
}

ObjectiveResult objective_with_adjoint(ThermalProblem& problem,
                                       const EffectiveProperties& props,
                                       const TransientSetup& setup,
                                       const ObjectiveWeights& w,
                                       const CheckpointSchedule* schedule) {
  ObjectiveResult out;
  out.history = problem.run_transient(props, setup, schedule);
  out.J_initial = out.history.energy.front();
  out.J_final = out.history.energy.back();
  out.value = w.final_energy * out.J_final + w.initial_energy * out.J_initial;

  PhaseModel ph = problem.phase();
  ph.melt_temp = props.melt_temp;
  const auto& mesh = problem.mesh();
  const double Tref = setup.boundary_temp;
  auto end = stored_energy_partials(mesh, props, ph, out.history.final_state(), Tref);
  auto start = stored_energy_partials(mesh, props, ph, out.history.states.front(), Tref);

  out.d_props = PropertyGradient(props.size());
  if (w.final_energy != 0.0) {
    const VecX d_final = w.final_energy * end.dT;
    out.d_props = transient_adjoint(problem, props, setup, out.history, d_final);
  }
  for (std::size_t e = 0; e < props.size(); ++e) {
    out.d_props.c[e] += w.final_energy * end.props.c[e] + w.initial_energy * start.props.c[e];
    out.d_props.rho[e] += w.final_energy * end.props.rho[e] + w.initial_energy * start.props.rho[e];
    out.d_props.latent[e] += w.final_energy * end.props.latent[e] + w.initial_energy * start.props.latent[e];
  }
  out.d_props.melt_temp += w.final_energy * end.props.melt_temp +
                           w.initial_energy * start.props.melt_temp;
  return out;
}

GradientBundle adjoint_gradient(ThermalProblem& problem,
                                const DesignState& design,
                                const FilterOperator& filter,
                                const MaterialSource& hcm,
                                const MaterialSource& pcm,
                                const ChainSettings& chain,
                                const TransientSetup& setup,
                                const BundleOptions& opt) {
  const Exec exec = problem.exec();
  const DesignEvaluation ev = evaluate_design(design, filter, hcm, pcm, chain, exec);
  GradientBundle out;
  ObjectiveResult obj =
      objective_with_adjoint(problem, ev.props, setup, opt.weights, opt.schedule);
  out.objective = obj.value;
  out.J_initial = obj.J_initial;
  out.J_final = obj.J_final;
  ChainSeed seed;
  seed.props = &obj.d_props;
  out.d_objective = pull_back(design, ev, filter, hcm, pcm, chain, seed, exec);

  const CostConstraint gm = cost_constraint(ev.physical, problem.mesh(),
                                            ev.hcm.cost, ev.hcm.rho, opt.budget);
  out.g_m = gm.value;
  ChainSeed cseed;
  cseed.physical = gm.d_gamma;
  cseed.hcm_attr[2] = gm.d_rho;
  cseed.hcm_attr[3] = gm.d_cost;
  out.d_cost = pull_back(design, ev, filter, hcm, pcm, chain, cseed, exec);

  if (opt.atlas_hcm && opt.atlas_pcm)
    out.latent = latent_constraint(design.z_hcm, design.z_pcm, *opt.atlas_hcm,
                                   *opt.atlas_pcm, opt.eps_star,
                                   opt.lse_sharpness);
  return out;
}

}  // namespace lhtes
