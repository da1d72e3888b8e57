#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace lhtes {

enum class MaterialKind { hcm, pcm };

std::string_view to_string(MaterialKind kind);
MaterialKind parse_kind(std::string_view text);

/// Number of attributes fed to the embedding: k, c_p, rho, cost for HCM;
/// k, c_p, rho, L, T_m for PCM.
constexpr std::size_t attribute_count(MaterialKind kind) {
  return kind == MaterialKind::hcm ? 4 : 5;
}

std::vector<std::string> attribute_names(MaterialKind kind);

class DatabaseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One row of a material database, SI units throughout.
struct MaterialRecord {
  std::string name;
  MaterialKind kind = MaterialKind::hcm;
  double k = 0.0;    // W/(m K)
  double c_p = 0.0;  // J/(kg K)
  double rho = 0.0;  // kg/m^3
  std::optional<double> cost;       // currency/kg, HCM only
  std::optional<double> latent;     // J/kg, PCM only
  std::optional<double> melt_temp;  // K, PCM only

  /// Attribute vector in embedding order.
  std::vector<double> attributes() const;
  static MaterialRecord from_attributes(std::string name, MaterialKind kind,
                                        std::span<const double> values);
};

struct MaterialDatabase {
  MaterialKind kind = MaterialKind::hcm;
  std::vector<MaterialRecord> records;

  std::size_t size() const { return records.size(); }
  const MaterialRecord* find(std::string_view name) const;
  const MaterialRecord& at(std::string_view name) const;
  std::string names_joined() const;
};

/// Reads `name,k,c_p,rho,cost` (HCM) or `name,k,c_p,rho,L,T_m` (PCM).
MaterialDatabase load_database(const std::filesystem::path& path,
                               MaterialKind kind);
MaterialDatabase parse_database(std::string_view text, MaterialKind kind);

struct AttributeScaling {
  bool log_applied = true;
  double min = 0.0;  // in transformed (log) units
  double max = 1.0;
};

struct NormalizationParams {
  std::vector<AttributeScaling> attributes;

  std::size_t size() const { return attributes.size(); }
};

struct NormalizedData {
  Eigen::MatrixXd values;  // rows = records, cols = attributes, in [0, 1]
  NormalizationParams params;
};

/// Log transform followed by min-max scaling per attribute.
NormalizedData normalize(std::span<const MaterialRecord> records);

/// Normalized row -> physical attributes. Entries are clamped to [0, 1]
/// first.
std::vector<double> denormalize(std::span<const double> row,
                                const NormalizationParams& params);

/// d(physical)/d(normalized) on the clamped row; zero where the input was
/// outside [0, 1].
std::vector<double> denormalize_derivative(std::span<const double> row,
                                           const NormalizationParams& params);

std::vector<double> normalize_row(std::span<const double> physical,
                                  const NormalizationParams& params);

}  // namespace lhtes
