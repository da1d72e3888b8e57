#include "lhtes/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace lhtes {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(12);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_vtk(const std::filesystem::path& path, const QuadMesh& mesh,
               const std::vector<NamedField>& cell_fields,
               const std::vector<NamedField>& point_fields) {
  auto out = open_out(path);
  out << "# vtk DataFile Version 3.0\nlhtes\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_nodes() << " double\n";
  for (const auto& p : mesh.nodes) out << p[0] << ' ' << p[1] << " 0\n";
  out << "CELLS " << mesh.num_elements() << ' ' << 5 * mesh.num_elements() << '\n';
  for (const auto& el : mesh.elements)
    out << "4 " << el[0] << ' ' << el[1] << ' ' << el[2] << ' ' << el[3] << '\n';
  out << "CELL_TYPES " << mesh.num_elements() << '\n';
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) out << "9\n";
  if (!cell_fields.empty()) {
    out << "CELL_DATA " << mesh.num_elements() << '\n';
    for (const auto& [name, f] : cell_fields) {
      if (f->size() != mesh.num_elements())
        throw std::invalid_argument("cell field '" + name + "' has wrong length");
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : *f) out << v << '\n';
    }
  }
  if (!point_fields.empty()) {
    out << "POINT_DATA " << mesh.num_nodes() << '\n';
    for (const auto& [name, f] : point_fields) {
      if (f->size() != mesh.num_nodes())
        throw std::invalid_argument("point field '" + name + "' has wrong length");
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : *f) out << v << '\n';
    }
  }
}

void write_density_csv(const std::filesystem::path& path,
                       const std::vector<double>& gamma) {
  auto out = open_out(path);
  out << "element,gamma\n" << std::setprecision(17);
  for (std::size_t e = 0; e < gamma.size(); ++e) out << e << ',' << gamma[e] << '\n';
}

std::vector<double> read_density_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const int col = t.column("gamma");
  if (col < 0) throw std::runtime_error(path.string() + ": no 'gamma' column");
  std::vector<double> out;
  for (const auto& r : t.rows) out.push_back(std::stod(r.at(col)));
  return out;
}

void write_energy_csv(const std::filesystem::path& path,
                      const std::vector<double>& times,
                      const std::vector<double>& energy) {
  auto out = open_out(path);
  out << "step,time_s,J_joules\n";
  for (std::size_t i = 0; i < energy.size(); ++i)
    out << i << ',' << times.at(i) << ',' << energy[i] << '\n';
}

void write_convergence_csv(const std::filesystem::path& path,
                           const std::vector<IterationLog>& log) {
  auto out = open_out(path);
  out << "iter,J,J_over_J0,g_m,g_l,p,beta_proj,eps_star,tau,wall_time_s,"
         "discharged_J,loss,change,stage\n";
  for (const auto& l : log)
    out << l.iter << ',' << l.objective << ',' << l.normalized << ','
        << l.g_budget << ',' << l.g_latent << ',' << l.penal << ',' << l.beta
        << ',' << l.eps_star << ',' << l.tau << ',' << l.wall_time << ','
        << l.discharged << ',' << l.loss << ',' << l.change << ',' << l.stage
        << '\n';
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    t.rows.push_back(split(line));
    if (t.rows.back().size() != t.header.size())
      throw std::runtime_error(path.string() + ": ragged row " +
                               std::to_string(t.rows.size() + 1));
  }
  return t;
}

void write_csv(const std::filesystem::path& path, const CsvTable& t) {
  auto out = open_out(path);
  auto row = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
    out << '\n';
  };
  row(t.header);
  for (const auto& r : t.rows) row(r);
}

CsvTable merge_energy_curves(const std::vector<CsvTable>& curves,
                             const std::vector<std::string>& labels) {
  if (curves.size() != labels.size())
    throw std::invalid_argument("one label per energy curve");
  std::map<long, std::vector<std::string>> by_step;
  std::map<long, std::string> times;
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const int s = curves[c].column("step"), t = curves[c].column("time_s"),
              j = curves[c].column("J_joules");
    if (s < 0 || t < 0 || j < 0)
      throw std::runtime_error("energy CSV needs step,time_s,J_joules");
    for (const auto& r : curves[c].rows) {
      auto& slot = by_step[std::stol(r[s])];
      slot.resize(curves.size());
      slot[c] = r[j];
      times.emplace(std::stol(r[s]), r[t]);
    }
  }
  CsvTable out;
  out.header = {"step", "time_s"};
  for (const auto& l : labels) out.header.push_back(l);
  for (auto& [step, vals] : by_step) {
    std::vector<std::string> r{std::to_string(step), times[step]};
    vals.resize(curves.size());
    r.insert(r.end(), vals.begin(), vals.end());
    out.rows.push_back(std::move(r));
  }
  return out;
}

CsvTable add_normalized_objective(const CsvTable& conv) {
  const int j = conv.column("J");
  if (j < 0) throw std::runtime_error("convergence CSV has no 'J' column");
  CsvTable out = conv;
  out.header.push_back("J_normalized");
  if (conv.rows.empty()) return out;
  const double j0 = std::stod(conv.rows.front()[j]);
  for (auto& r : out.rows) {
    std::ostringstream os;
    os << std::setprecision(12) << std::stod(r[j]) / std::abs(j0);
    r.push_back(os.str());
  }
  return out;
}

std::vector<unsigned char> rasterize_density(const QuadMesh& mesh,
                                             const std::vector<double>& gamma,
                                             int pixels) {
  if (mesh.layout != MeshLayout::quarter_annulus)
    throw std::invalid_argument("rasterization needs a quarter-annulus mesh");
  if (gamma.size() != mesh.num_elements())
    throw std::invalid_argument("density length != element count");
  std::vector<unsigned char> img(static_cast<std::size_t>(pixels) * pixels, 128);
  const double dr = (mesh.r_outer - mesh.r_inner) / mesh.n_radial;
  const double dt = 0.5 * std::numbers::pi / mesh.n_angular;
  for (int py = 0; py < pixels; ++py)
    for (int px = 0; px < pixels; ++px) {
      const double x = (px + 0.5) / pixels * mesh.r_outer;
      const double y = (pixels - py - 0.5) / pixels * mesh.r_outer;
      const double r = std::hypot(x, y);
      if (r < mesh.r_inner || r > mesh.r_outer) continue;
      const int i = std::min(mesh.n_radial - 1, static_cast<int>((r - mesh.r_inner) / dr));
      const int j = std::min(mesh.n_angular - 1, static_cast<int>(std::atan2(y, x) / dt));
      const double g = std::clamp(gamma[mesh.element_index(i, j)], 0.0, 1.0);
      img[static_cast<std::size_t>(py) * pixels + px] =
          static_cast<unsigned char>(std::lround(255.0 * g));
    }
  return img;
}

void write_pgm(const std::filesystem::path& path,
               const std::vector<unsigned char>& image, int width, int height) {
  if (image.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("image size mismatch");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data()),
            static_cast<std::streamsize>(image.size()));
}

}  // namespace lhtes
