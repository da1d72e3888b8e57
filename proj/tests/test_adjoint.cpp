#include <cmath>
#include <initializer_list>

#include "doctest.h"
#include "lhtes/adjoint.hpp"
#include "lhtes/optimizer.hpp"

using namespace lhtes;

namespace {

TransientSetup small_setup() {
  TransientSetup s;
  s.initial_temp = 400.0;
  s.boundary_temp = 273.0;
  s.dt = 8000.0;
  s.n_steps = 4;
  s.newton_tol = 1e-13;
  s.max_newton_iters = 200;
  return s;
}

DesignState wavy(std::size_t n) {
  DesignState d;
  d.gamma.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.gamma[i] = 0.5 + 0.3 * std::sin(0.9 * static_cast<double>(i));
  return d;
}

}  // namespace

TEST_CASE("objective gradient with fixed materials matches finite differences") {
  const QuadMesh mesh = build_quarter_annulus(0.1, 1.0, 6, 6);
  PhaseModel ph;
  ThermalProblem prob(mesh, ph);
  const FilterOperator filter(mesh, 0.25);
  // PCM melting inside the discharge window so the latent terms are active
  const MaterialSource hcm{nullptr, {237.0, 897.0, 2700.0, 2.6}};
  const MaterialSource pcm{nullptr, {0.3, 2100.0, 860.0, 2.2e5, 330.0}};
  const ChainSettings chain{3.0, 2.0, 0.5};
  const auto setup = small_setup();
  const DesignState d = wavy(mesh.num_elements());

  for (double w0 : {0.0, -1.0}) {
    BundleOptions opt;
    opt.weights.initial_energy = w0;
    const auto g = adjoint_gradient(prob, d, filter, hcm, pcm, chain, setup, opt);
    auto value = [&](const DesignState& x) {
      const auto ev = evaluate_design(x, filter, hcm, pcm, chain);
      const auto h = prob.run_transient(ev.props, setup);
      return h.energy.back() + w0 * h.energy.front();
    };
    CHECK(g.objective == doctest::Approx(value(d)).epsilon(1e-12));
    for (std::size_t e = 0; e < d.gamma.size(); e += 7) {
      DesignState a = d, b = d;
      a.gamma[e] += 1e-5;
      b.gamma[e] -= 1e-5;
      const double fd = (value(a) - value(b)) / 2e-5;
      CHECK(g.d_objective.gamma[e] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("latent-coordinate gradients through the decoders") {
  const MaterialLibrary lib = MaterialLibrary::load(LHTES_DATA_DIR);
  const QuadMesh mesh = build_quarter_annulus(0.1, 1.0, 5, 5);
  PhaseModel ph;
  ThermalProblem prob(mesh, ph);
  const FilterOperator filter(mesh, 0.3);
  const MaterialSource hcm{&lib.hcm_decoder, {}}, pcm{&lib.pcm_decoder, {}};
  const ChainSettings chain{2.0, 1.0, 0.5};
  const auto setup = small_setup();
  DesignState d = wavy(mesh.num_elements());
  d.z_hcm = lib.hcm_atlas.coords[1];
  d.z_pcm = lib.pcm_atlas.coords[2];
  d.z_hcm[1] += 0.02;
  d.z_pcm[0] -= 0.015;

  BundleOptions opt;
  opt.budget = 300.0;
  opt.atlas_hcm = &lib.hcm_atlas;
  opt.atlas_pcm = &lib.pcm_atlas;
  opt.eps_star = 0.1;
  const auto g = adjoint_gradient(prob, d, filter, hcm, pcm, chain, setup, opt);
  auto values = [&](const DesignState& x) {
    const auto ev = evaluate_design(x, filter, hcm, pcm, chain);
    const auto h = prob.run_transient(ev.props, setup);
    return std::pair{h.energy.back(),
                     cost_constraint(ev.physical, mesh, ev.hcm.cost, ev.hcm.rho, opt.budget).value};
  };
  for (int which = 0; which < 2; ++which)
    for (int i = 0; i < 2; ++i) {
      DesignState a = d, b = d;
      (which ? a.z_pcm : a.z_hcm)[i] += 1e-5;
      (which ? b.z_pcm : b.z_hcm)[i] -= 1e-5;
      const auto [ja, ga] = values(a);
      const auto [jb, gb] = values(b);
      const double adj = (which ? g.d_objective.z_pcm : g.d_objective.z_hcm)[i];
      CHECK(adj == doctest::Approx((ja - jb) / 2e-5).epsilon(1e-4));
      const double adj_g = (which ? g.d_cost.z_pcm : g.d_cost.z_hcm)[i];
      CHECK(adj_g == doctest::Approx((ga - gb) / 2e-5).epsilon(1e-5).scale(1e-12));
    }
  const auto lc = latent_constraint(d.z_hcm, d.z_pcm, lib.hcm_atlas, lib.pcm_atlas, 0.1, 20.0);
  CHECK(g.latent.value == doctest::Approx(lc.value));
}

TEST_CASE("checkpointed adjoint is bitwise identical to store-all") {
  const QuadMesh mesh = build_quarter_annulus(0.1, 1.0, 6, 6);
  PhaseModel ph;
  ThermalProblem prob(mesh, ph);
  const FilterOperator filter(mesh, 0.25);
  const MaterialSource hcm{nullptr, {237.0, 897.0, 2700.0, 2.6}};
  const MaterialSource pcm{nullptr, {0.3, 2100.0, 860.0, 2.2e5, 330.0}};
  const ChainSettings chain{3.0, 2.0, 0.5};
  auto setup = small_setup();
  setup.n_steps = 9;
  const DesignState d = wavy(mesh.num_elements());
  const auto all = make_schedule(9, 10);
  BundleOptions opt;
  opt.schedule = &all;
  const auto a = adjoint_gradient(prob, d, filter, hcm, pcm, chain, setup, opt);
  for (int kept : {2, 3, 4}) {
    const auto sched = make_schedule(9, kept);
    opt.schedule = &sched;
    const auto b = adjoint_gradient(prob, d, filter, hcm, pcm, chain, setup, opt);
    CHECK(a.objective == b.objective);
    CHECK(a.d_objective.gamma == b.d_objective.gamma);
  }
}
