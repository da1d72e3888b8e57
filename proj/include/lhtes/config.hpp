#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "lhtes/optimizer.hpp"
#include "lhtes/vae.hpp"

namespace lhtes {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OutputSettings {
  std::string directory = "out";
  bool vtk_steps = false;
  std::string sweep_budgets;  // comma list; optimize runs one design per budget
};

struct VaeSettings {
  int epochs = 150000;  // 50000 leaves PCM conductivities off by up to 20 %
  double learning_rate = 2e-3;
  double beta = 1e-7;
  int hidden = 250;
  std::uint64_t hcm_seed = 0;
  std::uint64_t pcm_seed = 5;

  TrainOptions options(MaterialKind kind) const;
};

/// Everything a command needs. Defaults reproduce the full-resolution
/// setup (5000 elements, 60 steps of 8000 s, 400 iterations).
struct RunConfig {
  ProblemSettings problem;
  OptimizerSettings optimizer;
  OutputSettings output;
  VaeSettings vae;
  std::string data_dir = LHTES_DATA_DIR;
};

RunConfig default_config();

/// INI-style text: `[section]` headers, `key = value` lines, `#` or `;`
/// comments. Unknown sections or keys are errors.
void parse_config(std::string_view text, RunConfig& cfg,
                  std::string_view origin = "<string>");
RunConfig load_config(const std::filesystem::path& path);

/// `section.key=value`.
void apply_override(RunConfig& cfg, std::string_view assignment);

/// Canonical `section.key = value` listing of every setting.
std::string serialize_config(const RunConfig& cfg);
/// FNV-1a of the canonical listing, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

/// Markdown table of all keys, defaults and meanings.
std::string config_reference();

}  // namespace lhtes
