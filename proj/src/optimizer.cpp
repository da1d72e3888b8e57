#include "lhtes/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lhtes {

double Schedules::penal(int k) const {
  return std::min(penal_max, penal_start + penal_rate * k);
}
double Schedules::beta(int k) const {
  return std::min(beta_max, beta_start + beta_rate * k);
}
double Schedules::eps_star(int k) const {
  return std::max(eps_min, eps_start - eps_rate * k);
}
double Schedules::tau(int k) const {
  return tau_start * std::pow(tau_growth, k);
}

void adam_step(std::vector<double>& x, const std::vector<double>& grad,
               const std::vector<char>& active, AdamState& st,
               const AdamSettings& s) {
  if (grad.size() != x.size() || active.size() != x.size())
    throw std::invalid_argument("adam_step: size mismatch");
  if (st.m.size() != x.size()) {
    st.m.assign(x.size(), 0.0);
    st.v.assign(x.size(), 0.0);
    st.t = 0;
  }
  ++st.t;
  const double c1 = 1.0 - std::pow(s.beta1, st.t);
  const double c2 = 1.0 - std::pow(s.beta2, st.t);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!active[i]) continue;
    st.m[i] = s.beta1 * st.m[i] + (1.0 - s.beta1) * grad[i];
    st.v[i] = s.beta2 * st.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    const double mh = st.m[i] / c1, vh = st.v[i] / c2;
    x[i] -= s.learning_rate * mh / (std::sqrt(vh) + s.epsilon);
  }
}

Mode parse_mode(std::string_view s) {
  if (s == "co-design") return Mode::co_design;
  if (s == "geometry-only") return Mode::geometry_only;
  if (s == "sequential-hcm") return Mode::sequential_hcm;
  if (s == "sequential-pcm") return Mode::sequential_pcm;
  if (s == "sequential") return Mode::sequential;
  throw std::invalid_argument("unknown mode '" + std::string(s) +
                              "' (co-design, geometry-only, sequential, "
                              "sequential-hcm, sequential-pcm)");
}

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::co_design: return "co-design";
    case Mode::geometry_only: return "geometry-only";
    case Mode::sequential_hcm: return "sequential-hcm";
    case Mode::sequential_pcm: return "sequential-pcm";
    case Mode::sequential: return "sequential";
  }
  return "?";
}

ObjectiveKind parse_objective(std::string_view s) {
  if (s == "discharged") return ObjectiveKind::discharged;
  if (s == "remaining") return ObjectiveKind::remaining;
  throw std::invalid_argument("unknown objective '" + std::string(s) +
                              "' (discharged, remaining)");
}

std::string_view to_string(ObjectiveKind o) {
  return o == ObjectiveKind::discharged ? "discharged" : "remaining";
}

BudgetKind parse_budget_kind(std::string_view s) {
  if (s == "cost") return BudgetKind::cost;
  if (s == "volume") return BudgetKind::volume;
  throw std::invalid_argument("unknown budget kind '" + std::string(s) +
                              "' (cost, volume)");
}

std::string_view to_string(BudgetKind b) {
  return b == BudgetKind::cost ? "cost" : "volume";
}

MaterialLibrary MaterialLibrary::load(const std::filesystem::path& dir) {
  MaterialLibrary lib;
  lib.hcm_db = load_database(dir / "hcm.csv", MaterialKind::hcm);
  lib.pcm_db = load_database(dir / "pcm.csv", MaterialKind::pcm);
  lib.hcm_decoder = DecoderModel(load_model(dir / "hcm.vae"));
  lib.pcm_decoder = DecoderModel(load_model(dir / "pcm.vae"));
  lib.hcm_atlas = load_atlas(dir / "hcm_atlas.csv");
  lib.pcm_atlas = load_atlas(dir / "pcm_atlas.csv");
  return lib;
}

namespace {

Vec2 atlas_point(const LatentAtlas& atlas, const std::string& name) {
  for (std::size_t i = 0; i < atlas.size(); ++i)
    if (atlas.names[i] == name) return atlas.coords[i];
  throw std::invalid_argument("material '" + name + "' not in latent atlas");
}

MaterialSource fixed_source(const MaterialDatabase& db, const std::string& name) {
  MaterialSource s;
  s.fixed = db.at(name).attributes();
  return s;
}

MaterialSource latent_source(const DecoderModel& dec) {
  MaterialSource s;
  s.decoder = &dec;
  return s;
}

CostConstraint budget_constraint(const OptimizerSettings& s,
                                 const std::vector<double>& physical,
                                 const QuadMesh& mesh, const HcmProperties& h) {
  if (s.budget_kind == BudgetKind::volume)
    return volume_constraint(physical, mesh, s.volume_fraction);
  return cost_constraint(physical, mesh, h.cost, h.rho, s.budget);
}

}  // namespace

Optimizer::Optimizer(const ProblemSettings& problem,
                     const MaterialLibrary& library)
    : settings_(problem),
      library_(library),
      mesh_(build_quarter_annulus(problem.r_inner, problem.r_outer,
                                  problem.n_radial, problem.n_angular,
                                  problem.radial_weighting)),
      problem_(mesh_, problem.phase, problem.ggls, problem.exec) {}

DesignReport Optimizer::evaluate(const std::vector<double>& physical,
                                 double penal, const MaterialRecord& hcm,
                                 const MaterialRecord& pcm,
                                 const OptimizerSettings& s) {
  DesignReport r;
  r.hcm_name = hcm.name;
  r.pcm_name = pcm.name;
  const auto h = HcmProperties::from_attributes(hcm.attributes());
  const auto p = PcmProperties::from_attributes(pcm.attributes());
  const auto props = interpolate(physical, h, p, penal);
  const auto hist = problem_.run_transient(props, settings_.transient);
  r.energy = hist.energy;
  for (int i = 0; i <= hist.num_steps(); ++i) r.times.push_back(hist.time(i));
  r.discharged = hist.energy.front() - hist.energy.back();
  r.g_budget = budget_constraint(s, physical, mesh_, h).value;
  return r;
}

double OptimizerSettings::sharpness(double eps_star) const {
  if (lse_radius_scale <= 0.0) return lse_sharpness;
  return std::max(lse_sharpness, lse_radius_scale / eps_star);
}

namespace {
struct LatentValue {
  double value = 0.0;
  Vec2 d_hcm{0.0, 0.0}, d_pcm{0.0, 0.0};
};

LatentValue latent_constraint_value(const DesignState& d, bool latent_h,
                                    bool latent_p, const MaterialLibrary& lib,
                                    double eps, double rho) {
  LatentValue out;
  if (latent_h && latent_p) {
    const auto lc = latent_constraint(d.z_hcm, d.z_pcm, lib.hcm_atlas,
                                      lib.pcm_atlas, eps, rho);
    out = {lc.value, lc.d_hcm, lc.d_pcm};
  } else if (latent_h) {
    const auto sm = soft_min_distance(d.z_hcm, lib.hcm_atlas, rho);
    out = {sm.value - eps, sm.grad, {0.0, 0.0}};
  } else if (latent_p) {
    const auto sm = soft_min_distance(d.z_pcm, lib.pcm_atlas, rho);
    out = {sm.value - eps, {0.0, 0.0}, sm.grad};
  }
  return out;
}
}  // namespace

void Optimizer::run_stage(const OptimizerSettings& s, const Stage& stage,
                          DesignState& design, ChainSettings& chain,
                          std::vector<IterationLog>& log, std::string& stop,
                          const IterationCallback& callback) {
  const std::size_t n = design.gamma.size();
  const std::size_t nv = n + 4;
  std::vector<char> active(nv, 0);
  for (std::size_t e = 0; e < n; ++e) active[e] = stage.gamma;
  active[n] = active[n + 1] = stage.z_hcm;
  active[n + 2] = active[n + 3] = stage.z_pcm;
  const bool latent_h = stage.hcm.latent() && stage.z_hcm;
  const bool latent_p = stage.pcm.latent() && stage.z_pcm;

  ObjectiveWeights w;
  w.final_energy = 1.0;
  w.initial_energy = s.objective == ObjectiveKind::discharged ? -1.0 : 0.0;
  const CheckpointSchedule sched =
      settings_.max_stored_states > 0
          ? make_schedule(settings_.transient.n_steps, settings_.max_stored_states)
          : make_schedule(settings_.transient.n_steps, settings_.transient.n_steps + 1);

  auto latent_value = [&](const DesignState& d, double eps, double rho) {
    return latent_constraint_value(d, latent_h, latent_p, library_, eps, rho);
  };
  // Largest constraint value of a design under the schedule of iteration k.
  auto worst_constraint = [&](const DesignState& d, int k) {
    ChainSettings c = chain;
    if (stage.frozen_chain) {
      c = *stage.frozen_chain;
    } else {
      c.penal = s.schedules.penal(k);
      c.beta = s.schedules.beta(k);
    }
    const DesignEvaluation ev = evaluate_design(d, filter_, stage.hcm, stage.pcm,
                                                c, settings_.exec);
    double g = budget_constraint(s, ev.physical, mesh_, ev.hcm).value;
    if (latent_h || latent_p) {
      const double eps = s.schedules.eps_star(k);
      g = std::max(g, latent_value(d, eps, s.sharpness(eps)).value);
    }
    return g;
  };

  AdamState adam;
  double scale = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  const double t_offset = log.empty() ? 0.0 : log.back().wall_time;
  stop = "max_iters";
  for (int k = 0; k < s.max_iters; ++k) {
    if (stage.frozen_chain) {
      chain = *stage.frozen_chain;
    } else {
      chain.penal = s.schedules.penal(k);
      chain.beta = s.schedules.beta(k);
    }
    const double eps = s.schedules.eps_star(k);
    const double tau = s.schedules.tau(k);
    const double rho = s.sharpness(eps);

    const DesignEvaluation ev = evaluate_design(design, filter_, stage.hcm,
                                                stage.pcm, chain, settings_.exec);
    ObjectiveResult obj;
    try {
      obj = objective_with_adjoint(problem_, ev.props, settings_.transient, w, &sched);
    } catch (const NonConvergence& ex) {
      throw OptimizationAborted(stage.name + " iteration " + std::to_string(k) +
                                    ": " + ex.what(),
                                design, static_cast<int>(log.size()));
    }
    if (k == 0) scale = std::abs(obj.value) > 0.0 ? std::abs(obj.value) : 1.0;

    ChainSeed oseed;
    oseed.props = &obj.d_props;
    const DesignGradient dobj = pull_back(design, ev, filter_, stage.hcm,
                                          stage.pcm, chain, oseed, settings_.exec);

    const CostConstraint gb = budget_constraint(s, ev.physical, mesh_, ev.hcm);
    ChainSeed bseed;
    bseed.physical = gb.d_gamma;
    bseed.hcm_attr[2] = gb.d_rho;
    bseed.hcm_attr[3] = gb.d_cost;
    const DesignGradient dbud = pull_back(design, ev, filter_, stage.hcm,
                                          stage.pcm, chain, bseed, settings_.exec);

    const bool use_latent = latent_h || latent_p;
    const LatentValue lv = latent_value(design, eps, rho);
    const double gl = lv.value;
    const Vec2 dgl_h = lv.d_hcm, dgl_p = lv.d_pcm;

    const double wb = log_barrier_slope(gb.value, tau);
    const double wl = use_latent ? log_barrier_slope(gl, tau) : 0.0;
    IterationLog it;
    it.iter = static_cast<int>(log.size());
    it.stage = stage.name;
    it.objective = obj.value;
    it.normalized = obj.value / scale;
    it.discharged = obj.J_initial - obj.J_final;
    it.g_budget = gb.value;
    it.g_latent = gl;
    it.loss = it.normalized + log_barrier(gb.value, tau) +
              (use_latent ? log_barrier(gl, tau) : 0.0);
    it.penal = chain.penal;
    it.beta = chain.beta;
    it.eps_star = eps;
    it.tau = tau;

    std::vector<double> x(nv), g(nv);
    for (std::size_t e = 0; e < n; ++e) {
      x[e] = design.gamma[e];
      g[e] = dobj.gamma[e] / scale + wb * dbud.gamma[e];
    }
    for (int i = 0; i < 2; ++i) {
      x[n + i] = design.z_hcm[i];
      x[n + 2 + i] = design.z_pcm[i];
      g[n + i] = dobj.z_hcm[i] / scale + wb * dbud.z_hcm[i] + wl * dgl_h[i];
      g[n + 2 + i] = dobj.z_pcm[i] / scale + wb * dbud.z_pcm[i] + wl * dgl_p[i];
    }
    const std::vector<double> before = x;
    adam_step(x, g, active, adam, s.adam);
    for (std::size_t e = 0; e < n; ++e) design.gamma[e] = x[e];
    for (int i = 0; i < 2; ++i) {
      design.z_hcm[i] = x[n + i];
      design.z_pcm[i] = x[n + 2 + i];
    }
    if (s.latent_step_fraction > 0.0) {
      const double cap = s.latent_step_fraction * eps;
      auto limit = [&](Vec2& z, std::size_t off) {
        const double dx = z[0] - before[off], dy = z[1] - before[off + 1];
        const double len = std::hypot(dx, dy);
        if (len <= cap) return;
        z = {before[off] + dx * cap / len, before[off + 1] + dy * cap / len};
      };
      limit(design.z_hcm, n);
      limit(design.z_pcm, n + 2);
    }
    design.clamp_to_bounds();
    // The run may stop after this update, in which case the design is
    // reported under the current schedule; otherwise the next one applies.
    const int k_next = std::min(k + 1, s.max_iters - 1);
    auto worst = [&](const DesignState& d) {
      return std::max(worst_constraint(d, k), worst_constraint(d, k_next));
    };
    if (s.feasibility_guard && worst(design) > 0.0) {
      // Pull the step back towards the previous iterate while that one is
      // feasible: past g = 0 the barrier turns linear with slope tau, and the
      // resulting gradient spike wrecks the ADAM moments.
      DesignState prev = design;
      for (std::size_t e = 0; e < n; ++e) prev.gamma[e] = before[e];
      prev.z_hcm = {before[n], before[n + 1]};
      prev.z_pcm = {before[n + 2], before[n + 3]};
      if (worst(prev) <= 0.0) {
        const DesignState full = design;
        double step = 1.0;
        bool found = false;
        for (int h = 0; h < 30 && !found; ++h) {
          step *= 0.5;
          for (std::size_t e = 0; e < n; ++e)
            design.gamma[e] = before[e] + step * (full.gamma[e] - before[e]);
          for (int i = 0; i < 2; ++i) {
            design.z_hcm[i] = before[n + i] + step * (full.z_hcm[i] - before[n + i]);
            design.z_pcm[i] = before[n + 2 + i] + step * (full.z_pcm[i] - before[n + 2 + i]);
          }
          found = worst(design) <= 0.0;
        }
        if (!found) design = prev;
      }
    }
    double change = 0.0;
    for (std::size_t e = 0; e < n; ++e)
      change = std::max(change, std::abs(design.gamma[e] - before[e]));
    for (int i = 0; i < 2; ++i) {
      change = std::max(change, std::abs(design.z_hcm[i] - before[n + i]));
      change = std::max(change, std::abs(design.z_pcm[i] - before[n + 2 + i]));
    }
    it.change = change;
    it.wall_time = t_offset + std::chrono::duration<double>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
    log.push_back(it);
    if (callback) callback(it);
    if (change < s.tolerance) {
      stop = "tolerance";
      break;
    }
  }
}

DesignReport Optimizer::snap(const OptimizationResult& r, const Stage& stage,
                             const OptimizerSettings& s) {
  const MaterialRecord* h = nullptr;
  const MaterialRecord* p = nullptr;
  double dh = 0.0, dp = 0.0;
  Vec2 zh = r.design.z_hcm, zp = r.design.z_pcm;
  if (stage.hcm.latent()) {
    const auto i = library_.hcm_atlas.nearest(r.design.z_hcm);
    h = &library_.hcm_db.at(library_.hcm_atlas.names[i]);
    dh = library_.hcm_atlas.distance_to_nearest(r.design.z_hcm);
    zh = library_.hcm_atlas.coords[i];
  } else {
    h = &library_.hcm_db.at(s.hcm_name);
  }
  if (stage.pcm.latent()) {
    const auto i = library_.pcm_atlas.nearest(r.design.z_pcm);
    p = &library_.pcm_db.at(library_.pcm_atlas.names[i]);
    dp = library_.pcm_atlas.distance_to_nearest(r.design.z_pcm);
    zp = library_.pcm_atlas.coords[i];
  } else {
    p = &library_.pcm_db.at(s.pcm_name);
  }
  DesignReport rep = evaluate(r.physical, r.chain.penal, *h, *p, s);
  rep.z_hcm = zh;
  rep.z_pcm = zp;
  rep.dist_hcm = dh;
  rep.dist_pcm = dp;
  return rep;
}

OptimizationResult Optimizer::run(const OptimizerSettings& s,
                                  const IterationCallback& callback) {
  if (s.max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (s.budget_kind == BudgetKind::cost && !(s.budget > 0.0))
    throw std::invalid_argument("budget must be positive");
  if (filter_.size() != mesh_.num_elements() ||
      filter_radius_ != s.filter_radius) {
    filter_ = FilterOperator(mesh_, s.filter_radius);
    filter_radius_ = s.filter_radius;
  }
  DesignState design;
  if (!s.initial_density.empty()) {
    if (s.initial_density.size() != mesh_.num_elements())
      throw std::invalid_argument("initial density length != element count");
    design.gamma = s.initial_density;
  } else {
    design.gamma.assign(mesh_.num_elements(), s.initial_gamma);
  }
  design.z_hcm = s.initial_z_hcm;
  design.z_pcm = s.initial_z_pcm;
  if (s.pcm_start_midrange)
    design.z_pcm = nearest_melting_point(
        library_, 0.5 * (settings_.transient.initial_temp +
                         settings_.transient.boundary_temp));
  design.clamp_to_bounds();

  const ChainSettings end_chain{s.schedules.penal(s.max_iters - 1),
                                s.schedules.beta(s.max_iters - 1), 0.5};
  const auto fixed_h = fixed_source(library_.hcm_db, s.hcm_name);
  const auto fixed_p = fixed_source(library_.pcm_db, s.pcm_name);
  const auto lat_h = latent_source(library_.hcm_decoder);
  const auto lat_p = latent_source(library_.pcm_decoder);

  OptimizationResult res;
  ChainSettings chain;
  Stage last;
  auto finish = [&](const Stage& stage, const OptimizerSettings& fs) {
    res.design = design;
    res.chain = chain;
    const auto ev = evaluate_design(design, filter_, stage.hcm, stage.pcm,
                                    chain, settings_.exec);
    res.physical = ev.physical;
    res.hcm_continuous = ev.hcm;
    res.pcm_continuous = ev.pcm;
    const auto hist = problem_.run_transient(ev.props, settings_.transient);
    res.discharged_continuous = hist.energy.front() - hist.energy.back();
    res.g_budget = budget_constraint(fs, ev.physical, mesh_, ev.hcm).value;
    res.eps_final = res.log.back().eps_star;
    if (stage.hcm.latent() || stage.pcm.latent()) {
      const double eps = res.eps_final;
      res.g_latent = latent_constraint_value(design, stage.hcm.latent() && stage.z_hcm,
                                             stage.pcm.latent() && stage.z_pcm,
                                             library_, eps, fs.sharpness(eps))
                         .value;
    }
    res.snapped = snap(res, stage, fs);
  };

  switch (s.mode) {
    case Mode::co_design: {
      last = {"co-design", true, true, true, lat_h, lat_p, std::nullopt};
      run_stage(s, last, design, chain, res.log, res.stop_reason, callback);
      break;
    }
    case Mode::geometry_only: {
      last = {"geometry-only", true, false, false, fixed_h, fixed_p, std::nullopt};
      run_stage(s, last, design, chain, res.log, res.stop_reason, callback);
      break;
    }
    case Mode::sequential_hcm: {
      design.z_hcm = atlas_point(library_.hcm_atlas, s.hcm_name);
      last = {"sequential-hcm", false, true, false, lat_h, fixed_p, end_chain};
      run_stage(s, last, design, chain, res.log, res.stop_reason, callback);
      break;
    }
    case Mode::sequential_pcm: {
      design.z_pcm = atlas_point(library_.pcm_atlas, s.pcm_name);
      last = {"sequential-pcm", false, false, true, fixed_h, lat_p, end_chain};
      run_stage(s, last, design, chain, res.log, res.stop_reason, callback);
      break;
    }
    case Mode::sequential: {
      Stage geo{"geometry-only", true, false, false, fixed_h, fixed_p, std::nullopt};
      run_stage(s, geo, design, chain, res.log, res.stop_reason, callback);
      const ChainSettings frozen = chain;
      design.z_hcm = atlas_point(library_.hcm_atlas, s.hcm_name);
      Stage hs{"sequential-hcm", false, true, false, lat_h, fixed_p, frozen};
      run_stage(s, hs, design, chain, res.log, res.stop_reason, callback);
      const auto ih = library_.hcm_atlas.nearest(design.z_hcm);
      OptimizerSettings s3 = s;
      s3.hcm_name = library_.hcm_atlas.names[ih];
      design.z_hcm = library_.hcm_atlas.coords[ih];
      design.z_pcm = atlas_point(library_.pcm_atlas, s.pcm_name);
      last = {"sequential-pcm", false, false, true,
              fixed_source(library_.hcm_db, s3.hcm_name), lat_p, frozen};
      run_stage(s3, last, design, chain, res.log, res.stop_reason, callback);
      finish(last, s3);
      return res;
    }
  }
  finish(last, s);
  return res;
}

Vec2 nearest_melting_point(const MaterialLibrary& library, double temp) {
  const MaterialRecord* best = nullptr;
  for (const auto& r : library.pcm_db.records) {
    if (!r.melt_temp) continue;
    if (!best || std::abs(*r.melt_temp - temp) < std::abs(*best->melt_temp - temp))
      best = &r;
  }
  if (!best) throw std::invalid_argument("PCM database has no melting points");
  for (std::size_t i = 0; i < library.pcm_atlas.size(); ++i)
    if (library.pcm_atlas.names[i] == best->name) return library.pcm_atlas.coords[i];
  throw std::invalid_argument("PCM atlas has no entry for " + best->name);
}

std::vector<double> fin_baseline(const QuadMesh& mesh, int n_fins,
                                 double hcm_fraction) {
  if (mesh.layout != MeshLayout::quarter_annulus)
    throw std::invalid_argument("fin baseline needs a quarter-annulus mesh");
  if (n_fins < 1) throw std::invalid_argument("need at least one fin");
  if (!(hcm_fraction >= 0.0) || hcm_fraction >= 1.0)
    throw std::invalid_argument("HCM fraction must be in [0, 1)");
  std::vector<double> gamma(mesh.num_elements(), 1.0);
  if (hcm_fraction == 0.0) return gamma;
  // whole element columns per fin; every column spans the same angle
  const double target = hcm_fraction * mesh.n_angular / n_fins;
  const long width = std::max(1L, std::lround(target));
  std::vector<char> used(mesh.n_angular, 0);
  for (int f = 0; f < n_fins; ++f) {
    const double centre = (f + 0.5) * mesh.n_angular / n_fins;
    const long first = std::lround(centre - 0.5 * width);
    for (long j = first; j < first + width; ++j) {
      if (j < 0 || j >= mesh.n_angular || used[j])
        throw std::invalid_argument(
            std::to_string(n_fins) + " fins of " + std::to_string(width) +
            " columns do not fit " + std::to_string(mesh.n_angular) +
            " angular elements");
      used[j] = 1;
      for (int i = 0; i < mesh.n_radial; ++i)
        gamma[mesh.element_index(i, static_cast<int>(j))] = 0.0;
    }
  }
  return gamma;
}

}  // namespace lhtes
