#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <sstream>

#include "doctest.h"
#include "lhtes/config.hpp"
#include "lhtes/io.hpp"

using namespace lhtes;
namespace fs = std::filesystem;

TEST_CASE("defaults describe the full-resolution run") {
  const RunConfig c = default_config();
  CHECK(c.problem.n_radial == 50);
  CHECK(c.problem.n_angular == 100);
  CHECK(c.problem.transient.n_steps == 60);
  CHECK(c.problem.transient.dt == 8000.0);
  CHECK(c.optimizer.max_iters == 400);
  CHECK(c.optimizer.budget == 600.0);
  CHECK(c.optimizer.objective == ObjectiveKind::remaining);
}

TEST_CASE("INI parsing and overrides") {
  RunConfig c = default_config();
  parse_config(
      "# comment\n[mesh]\nn_radial = 12 ; trailing\n\n[thermal]\ndt=1500\nexec = serial\n"
      "[optimizer]\nmode = geometry-only\n[design]\ninitial_z_pcm = 0.5, -1\n",
      c);
  CHECK(c.problem.n_radial == 12);
  CHECK(c.problem.transient.dt == 1500.0);
  CHECK(c.problem.exec == Exec::serial);
  CHECK(c.optimizer.mode == Mode::geometry_only);
  CHECK(c.optimizer.initial_z_pcm == Vec2{0.5, -1.0});
  CHECK_THROWS_AS(parse_config("[mesh]\nbogus = 1\n", c), ConfigError);
  CHECK_THROWS_AS(parse_config("[nowhere]\nx = 1\n", c), ConfigError);
  CHECK_THROWS_AS(parse_config("[mesh]\nn_radial = many\n", c), ConfigError);
  CHECK_THROWS_AS(parse_config("n_radial = 3\n", c), ConfigError);
  apply_override(c, "optimizer.budget=150");
  CHECK(c.optimizer.budget == 150.0);
  CHECK_THROWS_AS(apply_override(c, "optimizer.budget"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "budget=3"), ConfigError);
}

TEST_CASE("serialized settings round trip and hash") {
  RunConfig a = default_config();
  apply_override(a, "mesh.n_angular=37");
  apply_override(a, "optimizer.objective=discharged");
  const std::string text = serialize_config(a);
  RunConfig b = default_config();
  std::string ini;
  std::string section;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    const auto dot = line.find('.');
    const std::string sec = line.substr(0, dot);
    if (sec != section) ini += "[" + (section = sec) + "]\n";
    ini += line.substr(dot + 1) + "\n";
  }
  parse_config(ini, b);
  CHECK(serialize_config(b) == text);
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) != config_hash(default_config()));
}

TEST_CASE("every shipped config parses") {
  for (const auto& e : fs::directory_iterator(LHTES_CONFIG_DIR))
    if (e.path().extension() == ".ini") CHECK_NOTHROW(load_config(e.path()));
}

TEST_CASE("configuration reference lists every key") {
  const std::string ref = config_reference();
  const std::string text = serialize_config(default_config());
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    const std::string key = line.substr(0, line.find(' '));
    const auto dot = key.find('.');
    const auto sec = ref.find("## [" + key.substr(0, dot) + "]");
    REQUIRE(sec != std::string::npos);
    CHECK_MESSAGE(ref.find("| " + key.substr(dot + 1) + " |", sec) != std::string::npos, key);
  }
}

TEST_CASE("CSV and density files round trip") {
  const fs::path dir = fs::path(LHTES_TEST_TMP) / "io";
  fs::create_directories(dir);
  const std::vector<double> g{0.0, 0.125, 1.0 / 3.0, 1.0};
  write_density_csv(dir / "d.csv", g);
  CHECK(read_density_csv(dir / "d.csv") == g);
  write_energy_csv(dir / "e.csv", {0.0, 10.0}, {5.0, 3.0});
  const CsvTable t = read_csv(dir / "e.csv");
  CHECK(t.header == std::vector<std::string>{"step", "time_s", "J_joules"});
  CHECK(t.rows.size() == 2);
  CHECK(t.column("J_joules") == 2);
  CHECK(t.column("nope") == -1);
  const CsvTable merged = merge_energy_curves({t, t}, {"a", "b"});
  CHECK(merged.header.size() == 4);
  CHECK(merged.rows.size() == 2);
  CsvTable conv;
  conv.header = {"iter", "J"};
  conv.rows = {{"0", "-4"}, {"1", "-2"}};
  const CsvTable n = add_normalized_objective(conv);
  CHECK(std::stod(n.rows[1][n.column("J_normalized")]) == doctest::Approx(-0.5));
}

TEST_CASE("VTK and raster output") {
  const fs::path dir = fs::path(LHTES_TEST_TMP) / "io";
  fs::create_directories(dir);
  const QuadMesh mesh = build_quarter_annulus(0.1, 1.0, 3, 4);
  const std::vector<double> g(mesh.num_elements(), 0.25);
  std::vector<double> T(mesh.num_nodes(), 300.0);
  write_vtk(dir / "m.vtk", mesh, {{"gamma", &g}}, {{"temperature", &T}});
  std::ifstream in(dir / "m.vtk");
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all.find("POINTS 20") != std::string::npos);
  CHECK(all.find("CELLS 12 60") != std::string::npos);
  CHECK(all.find("CELL_DATA 12") != std::string::npos);
  CHECK(all.find("POINT_DATA 20") != std::string::npos);
  const auto img = rasterize_density(mesh, std::vector<double>(mesh.num_elements(), 0.0), 64);
  CHECK(img.size() == 64u * 64u);
  // bottom-left corner lies inside the domain (dark), top-right outside
  CHECK(img[63 * 64 + 10] == 0);
  CHECK(img[0 * 64 + 63] != 0);
}
