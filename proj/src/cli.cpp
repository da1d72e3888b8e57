#include "lhtes/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lhtes/config.hpp"
#include "lhtes/io.hpp"
#include "lhtes/optimizer.hpp"

namespace lhtes {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("-c,--config", a.config, "configuration file");
  cmd->add_option("--set", a.sets, "override, section.key=value (repeatable)");
  cmd->add_option("-o,--out", a.out, "output directory (overrides output.directory)");
}

RunConfig resolve(const CommonArgs& a) {
  RunConfig cfg = a.config.empty() ? default_config() : load_config(a.config);
  for (const auto& s : a.sets) apply_override(cfg, s);
  if (!a.out.empty()) cfg.output.directory = a.out;
  return cfg;
}

json config_json(const RunConfig& cfg) {
  json j = json::object();
  std::istringstream in(serialize_config(cfg));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json material_json(const DesignReport& r) {
  return {{"hcm", {{"name", r.hcm_name}, {"z", r.z_hcm}, {"latent_distance", r.dist_hcm}}},
          {"pcm", {{"name", r.pcm_name}, {"z", r.z_pcm}, {"latent_distance", r.dist_pcm}}}};
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("not a number in list: '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

// ---------------------------------------------------------------- train-vae

int cmd_train_vae(const CommonArgs& common, const std::string& kind_text,
                  const std::string& db_path, const std::string& model_out,
                  long long seed, int epochs) {
  RunConfig cfg = resolve(common);
  const MaterialKind kind = parse_kind(kind_text);
  if (seed >= 0) (kind == MaterialKind::hcm ? cfg.vae.hcm_seed : cfg.vae.pcm_seed) = seed;
  if (epochs > 0) cfg.vae.epochs = epochs;
  const MaterialDatabase db = load_database(db_path, kind);
  const auto norm = normalize(db.records);
  const std::string stem(to_string(kind));
  const fs::path model_path =
      model_out.empty() ? fs::path(cfg.data_dir) / (stem + ".vae") : fs::path(model_out);
  const fs::path dir = model_path.parent_path().empty() ? fs::path(".") : model_path.parent_path();
  const std::string base = model_path.stem().string();

  TrainReport report;
  const auto t0 = std::chrono::steady_clock::now();
  const VaeModel model = train_vae(norm.values, norm.params, kind,
                                   cfg.vae.options(kind), &report);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::vector<std::string> names;
  for (const auto& r : db.records) names.push_back(r.name);
  const LatentAtlas atlas = build_atlas(model, norm.values, names);
  const auto errors = reconstruction_errors(model, db);

  fs::create_directories(dir);
  save_model(model, model_path);
  save_atlas(atlas, dir / (base + "_atlas.csv"));
  json rep = {{"kind", stem},
              {"records", db.size()},
              {"seed", cfg.vae.options(kind).seed},
              {"epochs", cfg.vae.epochs},
              {"initial_loss", report.initial_loss},
              {"final_loss", report.final_loss},
              {"train_seconds", secs}};
  const auto attr = attribute_names(kind);
  std::cout << stem << ": " << db.size() << " records, final loss "
            << report.final_loss << " (" << secs << " s)\n";
  for (std::size_t i = 0; i < attr.size(); ++i) {
    rep["mean_relative_error"][attr[i]] = errors[i];
    std::printf("  %-6s mean relative error %.4f\n", attr[i].c_str(), errors[i]);
  }
  write_json(dir / (base + "_report.json"), rep);
  return kExitOk;
}

// ----------------------------------------------------------------- simulate

int cmd_simulate(const CommonArgs& common, const std::string& hcm,
                 const std::string& pcm, const std::string& density,
                 double uniform, int fins, double fraction, bool vtk) {
  RunConfig cfg = resolve(common);
  if (vtk) cfg.output.vtk_steps = true;
  const MaterialDatabase hdb = load_database(fs::path(cfg.data_dir) / "hcm.csv", MaterialKind::hcm);
  const MaterialDatabase pdb = load_database(fs::path(cfg.data_dir) / "pcm.csv", MaterialKind::pcm);
  const MaterialRecord& h = hdb.at(hcm.empty() ? cfg.optimizer.hcm_name : hcm);
  const MaterialRecord& p = pdb.at(pcm.empty() ? cfg.optimizer.pcm_name : pcm);

  const auto& ps = cfg.problem;
  const QuadMesh mesh = build_quarter_annulus(ps.r_inner, ps.r_outer, ps.n_radial,
                                              ps.n_angular, ps.radial_weighting);
  std::vector<double> gamma;
  if (!density.empty()) gamma = read_density_csv(density);
  else if (fins > 0) gamma = fin_baseline(mesh, fins, fraction);
  else gamma.assign(mesh.num_elements(), uniform);
  if (gamma.size() != mesh.num_elements())
    throw UsageError("density has " + std::to_string(gamma.size()) +
                     " entries, mesh has " + std::to_string(mesh.num_elements()));

  const auto props = interpolate(gamma, HcmProperties::from_attributes(h.attributes()),
                                 PcmProperties::from_attributes(p.attributes()),
                                 cfg.optimizer.schedules.penal_max);
  ThermalProblem problem(mesh, ps.phase, ps.ggls, ps.exec);
  const auto hist = problem.run_transient(props, ps.transient);
  std::vector<double> times;
  for (int i = 0; i <= hist.num_steps(); ++i) times.push_back(hist.time(i));
  const fs::path out = cfg.output.directory;
  write_energy_csv(out / "energy.csv", times, hist.energy);
  write_density_csv(out / "density.csv", gamma);
  if (cfg.output.vtk_steps) {
    for (int i = 0; i <= hist.num_steps(); ++i) {
      const std::vector<double> T(hist.states[i].data(),
                                  hist.states[i].data() + hist.states[i].size());
      char name[32];
      std::snprintf(name, sizeof name, "step_%04d.vtk", i);
      write_vtk(out / "vtk" / name, mesh, {{"gamma", &gamma}}, {{"temperature", &T}});
    }
  }
  const double discharged = hist.energy.front() - hist.energy.back();
  write_json(out / "manifest.json",
             {{"command", "simulate"},
              {"version", LHTES_VERSION},
              {"config_hash", config_hash(cfg)},
              {"config", config_json(cfg)},
              {"hcm", h.name},
              {"pcm", p.name},
              {"discharged_energy_J", discharged},
              {"steps", hist.num_steps()}});
  std::cout << "discharged " << discharged << " J over " << times.back() << " s ("
            << h.name << " / " << p.name << ")\n";
  return kExitOk;
}

// ----------------------------------------------------------------- optimize

json write_result(const fs::path& out, const RunConfig& cfg,
                  const Optimizer& opt, const OptimizationResult& r) {
  write_convergence_csv(out / "convergence.csv", r.log);
  write_density_csv(out / "density.csv", r.physical);
  write_density_csv(out / "design_variables.csv", r.design.gamma);
  write_vtk(out / "density.vtk", opt.mesh(), {{"gamma", &r.physical}});
  write_energy_csv(out / "energy.csv", r.snapped.times, r.snapped.energy);
  const double wall = r.log.empty() ? 0.0 : r.log.back().wall_time;
  json m = {{"command", "optimize"},
            {"version", LHTES_VERSION},
            {"mode", to_string(cfg.optimizer.mode)},
            {"config_hash", config_hash(cfg)},
            {"config", config_json(cfg)},
            {"materials", material_json(r.snapped)},
            {"discharged_energy_J", r.snapped.discharged},
            {"discharged_energy_continuous_J", r.discharged_continuous},
            {"g_budget", r.g_budget},
            {"g_budget_snapped", r.snapped.g_budget},
            {"g_latent", r.g_latent},
            {"eps_star_final", r.eps_final},
            {"iterations", r.log.size()},
            {"stop_reason", r.stop_reason},
            {"wall_time_s", wall},
            {"continuous_hcm", {{"k", r.hcm_continuous.k}, {"c_p", r.hcm_continuous.c_p},
                                {"rho", r.hcm_continuous.rho}, {"cost", r.hcm_continuous.cost}}},
            {"continuous_pcm", {{"k", r.pcm_continuous.k}, {"c_p", r.pcm_continuous.c_p},
                                {"rho", r.pcm_continuous.rho}, {"L", r.pcm_continuous.latent},
                                {"T_m", r.pcm_continuous.melt_temp}}}};
  write_json(out / "manifest.json", m);
  return m;
}

int cmd_optimize(const CommonArgs& common, const std::string& mode,
                 double budget, const std::string& hcm, const std::string& pcm,
                 const std::string& sweep, bool quiet) {
  RunConfig cfg = resolve(common);
  if (!mode.empty()) cfg.optimizer.mode = parse_mode(mode);
  if (budget > 0.0) cfg.optimizer.budget = budget;
  if (!hcm.empty()) cfg.optimizer.hcm_name = hcm;
  if (!pcm.empty()) cfg.optimizer.pcm_name = pcm;
  const MaterialLibrary lib = MaterialLibrary::load(cfg.data_dir);
  lib.hcm_db.at(cfg.optimizer.hcm_name);
  lib.pcm_db.at(cfg.optimizer.pcm_name);
  Optimizer opt(cfg.problem, lib);
  auto progress = [&](const IterationLog& l) {
    if (quiet) return;
    std::printf("%-15s %4d  J/J0 %+.5f  g_b %+.4f  g_l %+.4f  p %.2f  beta %.2f  %.1fs\n",
                l.stage.c_str(), l.iter, l.normalized, l.g_budget, l.g_latent,
                l.penal, l.beta, l.wall_time);
    std::fflush(stdout);
  };
  const fs::path root = cfg.output.directory;
  auto run_one = [&](const RunConfig& c, const fs::path& out) {
    try {
      const auto r = opt.run(c.optimizer, progress);
      const json m = write_result(out, c, opt, r);
      std::cout << "selected " << r.snapped.hcm_name << " / " << r.snapped.pcm_name
                << ", discharged " << r.snapped.discharged << " J\n";
      return r;
    } catch (const OptimizationAborted& ex) {
      write_density_csv(out / "failed_design_variables.csv", ex.design.gamma);
      write_json(out / "failed_state.json",
                 {{"iteration", ex.iteration}, {"error", ex.what()},
                  {"z_hcm", ex.design.z_hcm}, {"z_pcm", ex.design.z_pcm}});
      throw;
    }
  };
  const std::string budgets = sweep.empty() ? cfg.output.sweep_budgets : sweep;
  if (budgets.empty()) {
    run_one(cfg, root);
    return kExitOk;
  }
  CsvTable pareto;
  pareto.header = {"budget", "discharged_J", "hcm", "pcm", "g_budget", "directory"};
  for (double b : parse_list(budgets)) {
    RunConfig c = cfg;
    c.optimizer.budget = b;
    std::ostringstream name;
    name << "budget_" << b;
    const auto r = run_one(c, root / name.str());
    std::ostringstream e, g;
    e.precision(12);
    e << r.snapped.discharged;
    g << r.snapped.g_budget;
    pareto.rows.push_back({std::to_string(b), e.str(), r.snapped.hcm_name,
                           r.snapped.pcm_name, g.str(), name.str()});
  }
  write_csv(root / "pareto.csv", pareto);
  return kExitOk;
}

// ----------------------------------------------------------------- baseline

int cmd_baseline(const CommonArgs& common, const std::string& fins_text,
                 double fraction, const std::string& hcm, const std::string& pcm) {
  RunConfig cfg = resolve(common);
  if (!hcm.empty()) cfg.optimizer.hcm_name = hcm;
  if (!pcm.empty()) cfg.optimizer.pcm_name = pcm;
  const MaterialDatabase hdb = load_database(fs::path(cfg.data_dir) / "hcm.csv", MaterialKind::hcm);
  const MaterialDatabase pdb = load_database(fs::path(cfg.data_dir) / "pcm.csv", MaterialKind::pcm);
  const MaterialRecord& h = hdb.at(cfg.optimizer.hcm_name);
  const MaterialRecord& p = pdb.at(cfg.optimizer.pcm_name);
  MaterialLibrary lib;  // fixed materials only; no decoders needed
  lib.hcm_db = hdb;
  lib.pcm_db = pdb;
  Optimizer opt(cfg.problem, lib);
  const fs::path root = cfg.output.directory;
  CsvTable summary;
  summary.header = {"design", "hcm_fraction", "discharged_J"};
  auto record = [&](const std::string& label, const std::vector<double>& g) {
    const DesignReport r = opt.evaluate(g, cfg.optimizer.schedules.penal_max, h, p, cfg.optimizer);
    write_density_csv(root / label / "density.csv", g);
    write_energy_csv(root / label / "energy.csv", r.times, r.energy);
    double vh = 0.0;
    for (std::size_t e = 0; e < g.size(); ++e) vh += (1.0 - g[e]) * opt.mesh().volumes[e];
    std::ostringstream f, d;
    f.precision(12);
    d.precision(12);
    f << vh / opt.mesh().total_volume();
    d << r.discharged;
    summary.rows.push_back({label, f.str(), d.str()});
    std::cout << label << ": discharged " << r.discharged << " J\n";
  };
  record("pure_pcm", std::vector<double>(opt.mesh().num_elements(), 1.0));
  for (double n : parse_list(fins_text)) {
    const int k = static_cast<int>(n);
    record(std::to_string(k) + "_fins", fin_baseline(opt.mesh(), k, fraction));
  }
  write_csv(root / "baselines.csv", summary);
  return kExitOk;
}

// ------------------------------------------------------------- export-plots

int cmd_export_plots(const CommonArgs& common, const std::vector<std::string>& energy,
                     const std::vector<std::string>& labels,
                     const std::string& convergence, const std::string& density,
                     int pixels) {
  RunConfig cfg = resolve(common);
  const fs::path out = cfg.output.directory;
  if (energy.empty() && convergence.empty() && density.empty())
    throw UsageError("nothing to export: give --energy, --convergence or --density");
  if (!energy.empty()) {
    std::vector<CsvTable> curves;
    std::vector<std::string> names = labels;
    for (std::size_t i = 0; i < energy.size(); ++i) {
      curves.push_back(read_csv(energy[i]));
      if (names.size() <= i) names.push_back(fs::path(energy[i]).parent_path().filename().string());
    }
    if (names.size() != curves.size()) throw UsageError("more labels than energy files");
    write_csv(out / "energy_comparison.csv", merge_energy_curves(curves, names));
  }
  if (!convergence.empty())
    write_csv(out / "convergence_normalized.csv",
              add_normalized_objective(read_csv(convergence)));
  if (!density.empty()) {
    const auto& ps = cfg.problem;
    const QuadMesh mesh = build_quarter_annulus(ps.r_inner, ps.r_outer, ps.n_radial,
                                                ps.n_angular);
    const auto gamma = read_density_csv(density);
    write_pgm(out / "density.pgm", rasterize_density(mesh, gamma, pixels), pixels, pixels);
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Co-design of latent heat thermal energy storage: geometry and materials"};
  app.set_version_flag("--version", LHTES_VERSION);
  app.require_subcommand(1);

  CommonArgs common;
  std::string kind, db, model_out;
  long long seed = -1;
  int epochs = 0;
  auto* train = app.add_subcommand("train-vae", "train a material embedding");
  train->add_option("-c,--config", common.config, "configuration file");
  train->add_option("--set", common.sets, "override, section.key=value (repeatable)");
  train->add_option("--kind", kind, "hcm or pcm")->required();
  train->add_option("--db", db, "material database CSV")->required();
  train->add_option("-o,--out", model_out,
                    "model file (default <materials.data_dir>/<kind>.vae); the atlas "
                    "and report are written next to it");
  train->add_option("--seed", seed, "RNG seed (default vae.<kind>_seed)");
  train->add_option("--epochs", epochs, "training epochs (default vae.epochs)");

  std::string hcm, pcm, density;
  double uniform = 1.0, fraction = 0.2;
  int fins = 0;
  bool vtk = false;
  auto* sim = app.add_subcommand("simulate", "run the transient discharge of one design");
  add_common(sim, common);
  sim->add_option("--hcm", hcm, "HCM name");
  sim->add_option("--pcm", pcm, "PCM name");
  auto* dens_opt = sim->add_option("--density", density, "density CSV (element,gamma)");
  sim->add_option("--uniform", uniform, "uniform density when no file is given")
      ->excludes(dens_opt);
  sim->add_option("--fins", fins, "radial fin baseline with this many fins")->excludes(dens_opt);
  sim->add_option("--fraction", fraction, "HCM volume fraction of the fin baseline");
  sim->add_flag("--vtk", vtk, "write one VTK file per step");

  std::string mode, sweep;
  double budget = 0.0;
  bool quiet = false;
  auto* optc = app.add_subcommand("optimize", "optimize geometry and/or materials");
  add_common(optc, common);
  optc->add_option("--mode", mode, "co-design, geometry-only, sequential, sequential-hcm, sequential-pcm");
  optc->add_option("--budget", budget, "HCM cost budget");
  optc->add_option("--hcm", hcm, "fixed / starting HCM");
  optc->add_option("--pcm", pcm, "fixed / starting PCM");
  optc->add_option("--sweep-budget", sweep, "comma-separated budgets; one run each plus pareto.csv");
  optc->add_flag("-q,--quiet", quiet, "no per-iteration output");

  std::string fin_list = "2,3,4";
  auto* base = app.add_subcommand("baseline", "pure-PCM and radial-fin reference designs");
  add_common(base, common);
  base->add_option("--fins", fin_list, "comma-separated fin counts");
  base->add_option("--fraction", fraction, "HCM volume fraction");
  base->add_option("--hcm", hcm, "HCM name");
  base->add_option("--pcm", pcm, "PCM name");

  std::vector<std::string> energy, labels;
  std::string convergence, dens_in;
  int pixels = 400;
  auto* exp = app.add_subcommand("export-plots", "plot-ready CSVs and a density image");
  add_common(exp, common);
  exp->add_option("--energy", energy, "energy CSV (repeatable)");
  exp->add_option("--label", labels, "label per energy CSV (repeatable)");
  exp->add_option("--convergence", convergence, "convergence CSV");
  exp->add_option("--density", dens_in, "density CSV");
  exp->add_option("--pixels", pixels, "image side length")->check(CLI::Range(16, 8192));

  std::string ref_out;
  auto* ref = app.add_subcommand("config-reference", "print every configuration key");
  ref->add_option("-o,--out", ref_out, "write to this file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train_vae(common, kind, db, model_out, seed, epochs);
    if (*sim) return cmd_simulate(common, hcm, pcm, density, uniform, fins, fraction, vtk);
    if (*optc) return cmd_optimize(common, mode, budget, hcm, pcm, sweep, quiet);
    if (*base) return cmd_baseline(common, fin_list, fraction, hcm, pcm);
    if (*exp) return cmd_export_plots(common, energy, labels, convergence, dens_in, pixels);
    if (*ref) {
      if (ref_out.empty()) {
        std::cout << config_reference();
      } else {
        std::ofstream(ref_out) << config_reference();
      }
      return kExitOk;
    }
  } catch (const NonConvergence& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const TrainingDiverged& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DatabaseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}

}  // namespace lhtes
