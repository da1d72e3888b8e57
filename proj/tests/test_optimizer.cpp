#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numeric>

#include "doctest.h"
#include "lhtes/optimizer.hpp"

using namespace lhtes;

TEST_CASE("continuation schedules") {
  const Schedules s;
  CHECK(s.penal(0) == 1.0);
  CHECK(s.penal(100) == doctest::Approx(1.5));
  CHECK(s.penal(10000) == 3.0);
  CHECK(s.beta(100) == doctest::Approx(5.0));
  CHECK(s.beta(10000) == 64.0);
  CHECK(s.eps_star(49) == doctest::Approx(0.08));
  CHECK(s.eps_star(1000) == 0.02);
  for (int k : {0, 7, 150}) CHECK(s.tau(k) == doctest::Approx(3.0 * std::pow(1.02, k)));
}

TEST_CASE("adam step") {
  AdamState st;
  AdamSettings a;
  std::vector<double> x{0.5, 0.5, 0.5};
  adam_step(x, {0.0, 2.0, -1e-3}, {1, 1, 0}, st, a);
  CHECK(x[0] == 0.5);
  // first step has magnitude lr regardless of the gradient scale
  CHECK(x[1] == doctest::Approx(0.5 - a.learning_rate).epsilon(1e-8));
  CHECK(x[2] == 0.5);
  CHECK(st.t == 1);
  CHECK_THROWS(adam_step(x, {1.0}, {1, 1, 1}, st, a));
}

TEST_CASE("fin baselines") {
  const QuadMesh mesh = build_quarter_annulus(0.1, 1.0, 50, 100);
  const double V = mesh.total_volume();
  for (int n : {2, 4, 5}) {
    const auto g = fin_baseline(mesh, n, 0.2);
    double hcm = 0.0;
    for (std::size_t e = 0; e < g.size(); ++e) hcm += (1.0 - g[e]) * mesh.volumes[e];
    CHECK(hcm / V == doctest::Approx(0.2).epsilon(0.01));
  }
  const auto g2 = fin_baseline(mesh, 2, 0.2);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 100; ++j)
      CHECK(g2[mesh.element_index(i, j)] == g2[mesh.element_index(i, 99 - j)]);
  const auto none = fin_baseline(mesh, 3, 0.0);
  CHECK(std::all_of(none.begin(), none.end(), [](double v) { return v == 1.0; }));
  CHECK_THROWS(fin_baseline(mesh, 60, 0.9));
  CHECK_THROWS(fin_baseline(mesh, 0, 0.2));
  CHECK_THROWS(fin_baseline(build_rectangle(1.0, 1.0, 4, 4), 2, 0.2));
}

TEST_CASE("mode and objective names round trip") {
  for (Mode m : {Mode::co_design, Mode::geometry_only, Mode::sequential, Mode::sequential_hcm,
                 Mode::sequential_pcm})
    CHECK(parse_mode(to_string(m)) == m);
  CHECK(parse_objective(to_string(ObjectiveKind::discharged)) == ObjectiveKind::discharged);
  CHECK(parse_budget_kind(to_string(BudgetKind::volume)) == BudgetKind::volume);
  CHECK_THROWS(parse_mode("nope"));
}

TEST_CASE("nearest melting point") {
  const MaterialLibrary lib = MaterialLibrary::load(LHTES_DATA_DIR);
  const double target = 400.0;
  std::size_t best = 0;
  for (std::size_t i = 1; i < lib.pcm_db.size(); ++i)
    if (std::abs(*lib.pcm_db.records[i].melt_temp - target) <
        std::abs(*lib.pcm_db.records[best].melt_temp - target))
      best = i;
  const Vec2 z = nearest_melting_point(lib, target);
  const std::size_t idx = static_cast<std::size_t>(
      std::find(lib.pcm_atlas.names.begin(), lib.pcm_atlas.names.end(),
                lib.pcm_db.records[best].name) -
      lib.pcm_atlas.names.begin());
  REQUIRE(idx < lib.pcm_atlas.size());
  CHECK(z == lib.pcm_atlas.coords[idx]);
}

TEST_CASE("tiny optimization runs are deterministic and well formed") {
  const MaterialLibrary lib = MaterialLibrary::load(LHTES_DATA_DIR);
  ProblemSettings ps;
  ps.n_radial = 4;
  ps.n_angular = 6;
  ps.transient.n_steps = 3;
  ps.transient.dt = 24000.0;
  ps.exec = Exec::serial;
  OptimizerSettings os;
  os.max_iters = 4;
  os.filter_radius = 0.3;
  auto once = [&] {
    Optimizer opt(ps, lib);
    return opt.run(os);
  };
  const auto a = once();
  const auto b = once();
  REQUIRE(!a.log.empty());
  CHECK(a.log.front().normalized == doctest::Approx(1.0));
  CHECK(a.log.size() == b.log.size());
  CHECK(a.design.gamma == b.design.gamma);
  CHECK(a.design.z_hcm == b.design.z_hcm);
  CHECK(a.design.z_pcm == b.design.z_pcm);
  for (double g : a.design.gamma) {
    CHECK(g >= 0.0);
    CHECK(g <= 1.0);
  }
  CHECK(lib.hcm_db.find(a.snapped.hcm_name) != nullptr);
  CHECK(lib.pcm_db.find(a.snapped.pcm_name) != nullptr);
  CHECK(a.snapped.energy.size() == 4);
  CHECK(!a.stop_reason.empty());
}
