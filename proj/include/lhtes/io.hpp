#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lhtes/mesh.hpp"
#include "lhtes/optimizer.hpp"

namespace lhtes {

using NamedField = std::pair<std::string, const std::vector<double>*>;

/// Legacy ASCII VTK unstructured grid with optional cell and point scalars.
void write_vtk(const std::filesystem::path& path, const QuadMesh& mesh,
               const std::vector<NamedField>& cell_fields,
               const std::vector<NamedField>& point_fields = {});

/// `element,gamma`
void write_density_csv(const std::filesystem::path& path,
                       const std::vector<double>& gamma);
std::vector<double> read_density_csv(const std::filesystem::path& path);

/// `step,time_s,J_joules`
void write_energy_csv(const std::filesystem::path& path,
                      const std::vector<double>& times,
                      const std::vector<double>& energy);

void write_convergence_csv(const std::filesystem::path& path,
                           const std::vector<IterationLog>& log);

/// Parsed CSV with a header row; all cells kept as text.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
};
CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Joins energy curves on the step column; one J column per input, named
/// after `labels`.
CsvTable merge_energy_curves(const std::vector<CsvTable>& curves,
                             const std::vector<std::string>& labels);

/// Adds `J_normalized` = J / |J(first row)|.
CsvTable add_normalized_objective(const CsvTable& convergence);

/// Square grayscale raster of a quarter-annulus element field in [0, 1]
/// (0 = black = HCM, 1 = white = PCM; outside the domain mid-gray).
std::vector<unsigned char> rasterize_density(const QuadMesh& mesh,
                                             const std::vector<double>& gamma,
                                             int pixels);
void write_pgm(const std::filesystem::path& path,
               const std::vector<unsigned char>& image, int width, int height);

}  // namespace lhtes
