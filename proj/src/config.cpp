#include "lhtes/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <vector>

namespace lhtes {

TrainOptions VaeSettings::options(MaterialKind kind) const {
  TrainOptions o;
  o.seed = kind == MaterialKind::hcm ? hcm_seed : pcm_seed;
  o.epochs = epochs;
  o.learning_rate = learning_rate;
  o.beta = beta;
  o.hidden = hidden;
  return o;
}

RunConfig default_config() {
  RunConfig c;
  c.problem.transient.initial_temp = 400.0;
  c.problem.transient.boundary_temp = 273.0;
  c.problem.transient.dt = 8000.0;
  c.problem.transient.n_steps = 60;
  return c;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("not a number: '" + v + "'");
  return out;
}

long long to_int(const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("not an integer: '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("not a boolean: '" + v + "'");
}

Vec2 to_vec2(const std::string& v) {
  const auto comma = v.find(',');
  if (comma == std::string::npos) throw ConfigError("expected 'a,b': '" + v + "'");
  return {to_double(trim(v.substr(0, comma))), to_double(trim(v.substr(comma + 1)))};
}

std::string fmt(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);  // shortest round-trip
  return std::string(buf, res.ptr);
}

std::string fmt(Vec2 z) { return fmt(z[0]) + "," + fmt(z[1]); }

struct Entry {
  std::string section, key, help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define LHTES_NUM(sec, name, field, help)                                   \
  Entry{sec, name, help,                                                    \
        [](RunConfig& c, const std::string& v) { c.field = to_double(v); }, \
        [](const RunConfig& c) { return fmt(c.field); }}
#define LHTES_INT(sec, name, field, help)                                   \
  Entry{sec, name, help,                                                    \
        [](RunConfig& c, const std::string& v) {                            \
          c.field = static_cast<decltype(c.field)>(to_int(v));              \
        },                                                                  \
        [](const RunConfig& c) { return std::to_string(c.field); }}
#define LHTES_BOOL(sec, name, field, help)                                  \
  Entry{sec, name, help,                                                    \
        [](RunConfig& c, const std::string& v) { c.field = to_bool(v); },   \
        [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }}
#define LHTES_STR(sec, name, field, help)                                   \
  Entry{sec, name, help,                                                    \
        [](RunConfig& c, const std::string& v) { c.field = v; },            \
        [](const RunConfig& c) { return c.field; }}
#define LHTES_VEC2(sec, name, field, help)                                  \
  Entry{sec, name, help,                                                    \
        [](RunConfig& c, const std::string& v) { c.field = to_vec2(v); },   \
        [](const RunConfig& c) { return fmt(c.field); }}

const std::vector<Entry>& table() {
  static const std::vector<Entry> t = {
      LHTES_NUM("mesh", "r_inner", problem.r_inner, "inner radius (m), cold boundary"),
      LHTES_NUM("mesh", "r_outer", problem.r_outer, "outer radius (m)"),
      LHTES_INT("mesh", "n_radial", problem.n_radial, "elements along r"),
      LHTES_INT("mesh", "n_angular", problem.n_angular, "elements along theta"),
      LHTES_BOOL("mesh", "radial_weighting", problem.radial_weighting,
                 "multiply integrals by r (axisymmetric variant)"),

      LHTES_NUM("thermal", "initial_temp", problem.transient.initial_temp, "T_I (K)"),
      LHTES_NUM("thermal", "boundary_temp", problem.transient.boundary_temp,
                "T_d (K); also the energy reference temperature"),
      LHTES_NUM("thermal", "dt", problem.transient.dt, "time step (s)"),
      LHTES_INT("thermal", "n_steps", problem.transient.n_steps, "number of time steps"),
      LHTES_NUM("thermal", "newton_tol", problem.transient.newton_tol,
                "relative residual tolerance of the nonlinear solve"),
      LHTES_INT("thermal", "max_newton_iters", problem.transient.max_newton_iters,
                "nonlinear iterations before a step is bisected"),
      LHTES_INT("thermal", "max_bisections", problem.transient.max_bisections,
                "step bisections before giving up"),
      LHTES_NUM("thermal", "mushy_width", problem.phase.mushy_width,
                "melting range width (K)"),
      LHTES_NUM("thermal", "alpha", problem.phase.alpha,
                "smooth-step width as a fraction of mushy_width"),
      LHTES_BOOL("thermal", "ggls", problem.ggls, "gradient least-squares stabilization"),
      LHTES_INT("thermal", "max_stored_states", problem.max_stored_states,
                "checkpoint budget for the adjoint (0 = keep all)"),
      Entry{"thermal", "exec", "element kernels: parallel or serial",
            [](RunConfig& c, const std::string& v) {
              if (v == "parallel") c.problem.exec = Exec::parallel;
              else if (v == "serial") c.problem.exec = Exec::serial;
              else throw ConfigError("exec must be parallel or serial");
            },
            [](const RunConfig& c) {
              return std::string(c.problem.exec == Exec::parallel ? "parallel" : "serial");
            }},

      LHTES_NUM("design", "filter_radius", optimizer.filter_radius, "density filter radius (m)"),
      LHTES_NUM("design", "initial_gamma", optimizer.initial_gamma,
                "uniform starting pseudo-density (1 = PCM)"),
      LHTES_VEC2("design", "initial_z_hcm", optimizer.initial_z_hcm, "starting HCM latent point"),
      LHTES_VEC2("design", "initial_z_pcm", optimizer.initial_z_pcm, "starting PCM latent point"),
      LHTES_BOOL("design", "pcm_start_midrange", optimizer.pcm_start_midrange,
                 "start the PCM latent point at the database PCM melting nearest "
                 "(initial_temp + boundary_temp) / 2; overrides initial_z_pcm"),

      Entry{"optimizer", "mode",
            "co-design, geometry-only, sequential, sequential-hcm, sequential-pcm",
            [](RunConfig& c, const std::string& v) { c.optimizer.mode = parse_mode(v); },
            [](const RunConfig& c) { return std::string(to_string(c.optimizer.mode)); }},
      Entry{"optimizer", "objective",
            "discharged (maximize J_0 - J_end) or remaining (minimize J_end)",
            [](RunConfig& c, const std::string& v) {
              c.optimizer.objective = parse_objective(v);
            },
            [](const RunConfig& c) { return std::string(to_string(c.optimizer.objective)); }},
      Entry{"optimizer", "budget_kind", "cost (HCM cost) or volume (HCM volume fraction)",
            [](RunConfig& c, const std::string& v) {
              c.optimizer.budget_kind = parse_budget_kind(v);
            },
            [](const RunConfig& c) { return std::string(to_string(c.optimizer.budget_kind)); }},
      LHTES_NUM("optimizer", "budget", optimizer.budget, "maximum HCM cost (currency)"),
      LHTES_NUM("optimizer", "volume_fraction", optimizer.volume_fraction,
                "maximum HCM volume fraction (budget_kind = volume)"),
      LHTES_INT("optimizer", "max_iters", optimizer.max_iters, "iterations per stage"),
      LHTES_NUM("optimizer", "tolerance", optimizer.tolerance,
                "stop when max |design change| falls below this"),
      LHTES_NUM("optimizer", "learning_rate", optimizer.adam.learning_rate, "ADAM step size"),
      LHTES_NUM("optimizer", "adam_beta1", optimizer.adam.beta1, "ADAM first-moment decay"),
      LHTES_NUM("optimizer", "adam_beta2", optimizer.adam.beta2, "ADAM second-moment decay"),
      LHTES_NUM("optimizer", "adam_epsilon", optimizer.adam.epsilon, "ADAM denominator guard"),
      LHTES_NUM("optimizer", "lse_sharpness", optimizer.lse_sharpness,
                "LogSumExp sharpness of the soft min/max in the latent constraint"),
      LHTES_NUM("optimizer", "lse_radius_scale", optimizer.lse_radius_scale,
                "sharpness is raised to at least this / eps_star (0 = fixed sharpness)"),
      LHTES_NUM("optimizer", "latent_step_fraction", optimizer.latent_step_fraction,
                "latent step per iteration capped at this fraction of eps_star (0 = off)"),
      LHTES_BOOL("optimizer", "feasibility_guard", optimizer.feasibility_guard,
                 "backtrack steps that would leave the feasible set"),

      LHTES_NUM("continuation", "penal_start", optimizer.schedules.penal_start, "SIMP exponent at k = 0"),
      LHTES_NUM("continuation", "penal_rate", optimizer.schedules.penal_rate, "SIMP increment per iteration"),
      LHTES_NUM("continuation", "penal_max", optimizer.schedules.penal_max, "SIMP cap"),
      LHTES_NUM("continuation", "beta_start", optimizer.schedules.beta_start, "projection sharpness at k = 0"),
      LHTES_NUM("continuation", "beta_rate", optimizer.schedules.beta_rate, "projection increment per iteration"),
      LHTES_NUM("continuation", "beta_max", optimizer.schedules.beta_max, "projection cap"),
      LHTES_NUM("continuation", "eps_start", optimizer.schedules.eps_start, "latent radius at k = 0"),
      LHTES_NUM("continuation", "eps_rate", optimizer.schedules.eps_rate, "latent radius decrement per iteration"),
      LHTES_NUM("continuation", "eps_min", optimizer.schedules.eps_min, "latent radius floor"),
      LHTES_NUM("continuation", "tau_start", optimizer.schedules.tau_start, "barrier weight at k = 0"),
      LHTES_NUM("continuation", "tau_growth", optimizer.schedules.tau_growth, "barrier growth factor per iteration"),

      LHTES_STR("optimizer", "sweep_budgets", output.sweep_budgets,
                "comma-separated budgets for a Pareto sweep (empty: single run)"),

      LHTES_STR("materials", "data_dir", data_dir, "directory with databases, models and atlases"),
      LHTES_STR("materials", "hcm", optimizer.hcm_name, "fixed / starting HCM name"),
      LHTES_STR("materials", "pcm", optimizer.pcm_name, "fixed / starting PCM name"),

      LHTES_INT("vae", "epochs", vae.epochs, "training epochs"),
      LHTES_NUM("vae", "learning_rate", vae.learning_rate, "ADAM step size"),
      LHTES_NUM("vae", "beta", vae.beta, "KL weight"),
      LHTES_INT("vae", "hidden", vae.hidden, "hidden layer width"),
      LHTES_INT("vae", "hcm_seed", vae.hcm_seed, "RNG seed of the HCM model"),
      LHTES_INT("vae", "pcm_seed", vae.pcm_seed, "RNG seed of the PCM model"),

      LHTES_STR("output", "directory", output.directory, "result directory"),
      LHTES_BOOL("output", "vtk_steps", output.vtk_steps, "write a VTK file per time step"),
  };
  return t;
}

#undef LHTES_NUM
#undef LHTES_INT
#undef LHTES_BOOL
#undef LHTES_STR
#undef LHTES_VEC2

const Entry* lookup(std::string_view section, std::string_view key) {
  for (const auto& e : table())
    if (e.section == section && e.key == key) return &e;
  return nullptr;
}

bool known_section(std::string_view section) {
  for (const auto& e : table())
    if (e.section == section) return true;
  return false;
}

void set_value(RunConfig& cfg, const std::string& section,
               const std::string& key, const std::string& value,
               const std::string& where) {
  const Entry* e = lookup(section, key);
  if (!e) throw ConfigError(where + ": unknown key '" + section + "." + key + "'");
  try {
    e->set(cfg, value);
  } catch (const std::exception& ex) {
    throw ConfigError(where + ": " + section + "." + key + ": " + ex.what());
  }
}

}  // namespace

void parse_config(std::string_view text, RunConfig& cfg, std::string_view origin) {
  std::istringstream in{std::string(text)};
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = std::string(origin) + ":" + std::to_string(lineno);
    const auto hash = line.find_first_of("#;");
    std::string s = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (!known_section(section))
        throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside of a section");
    set_value(cfg, section, trim(s.substr(0, eq)), trim(s.substr(eq + 1)), where);
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = default_config();
  parse_config(ss.str(), cfg, path.string());
  return cfg;
}

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq)
    throw ConfigError("override must look like section.key=value: '" +
                      std::string(assignment) + "'");
  set_value(cfg, trim(assignment.substr(0, dot)),
            trim(assignment.substr(dot + 1, eq - dot - 1)),
            trim(assignment.substr(eq + 1)), "--set");
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& e : table())
    out += e.section + "." + e.key + " = " + e.get(cfg) + "\n";
  return out;
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : serialize_config(cfg)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string config_reference() {
  const RunConfig d = default_config();
  std::string out = "# Configuration reference\n\n"
                    "Files are INI-style. Any key can also be set on the command "
                    "line with `--set section.key=value`; command-line values win.\n";
  std::string section;
  for (const auto& e : table()) {
    if (e.section != section) {
      section = e.section;
      out += "\n## [" + section + "]\n\n| key | default | meaning |\n|---|---|---|\n";
    }
    std::string def = e.get(d);
    if (e.section == "materials" && e.key == "data_dir") def = "(build tree data/)";
    out += "| " + e.key + " | " + def + " | " + e.help + " |\n";
  }
  return out;
}

}  // namespace lhtes
