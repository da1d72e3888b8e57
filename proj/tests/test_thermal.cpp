#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <utility>

#include "doctest.h"
#include "lhtes/thermal.hpp"

using namespace lhtes;

namespace {

EffectiveProperties uniform(std::size_t n, double k, double rho, double c, double L,
                            double tm) {
  EffectiveProperties p;
  p.k.assign(n, k);
  p.rho.assign(n, rho);
  p.c.assign(n, c);
  p.latent.assign(n, L);
  p.melt_temp = tm;
  return p;
}

EffectiveProperties mixed(const QuadMesh& mesh) {
  EffectiveProperties p = uniform(mesh.num_elements(), 0.2, 880.0, 2000.0, 1.7e5, 330.0);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e)
    if (e % 5 == 0) {
      p.k[e] = 237.0;
      p.rho[e] = 2700.0;
      p.c[e] = 897.0;
      p.latent[e] = 0.0;
    }
  return p;
}

TransientSetup setup(int steps, double dt) {
  TransientSetup s;
  s.initial_temp = 400.0;
  s.boundary_temp = 273.0;
  s.n_steps = steps;
  s.dt = dt;
  return s;
}

}  // namespace

TEST_CASE("initial state puts T_d on the cold boundary") {
  const QuadMesh mesh = build_quarter_annulus(0.1, 1.0, 4, 4);
  ThermalProblem prob(mesh, PhaseModel{});
  const VecX T0 = prob.initial_state(setup(1, 1.0));
  for (int d : mesh.dirichlet_nodes) CHECK(T0[d] == 273.0);
  CHECK(T0.maxCoeff() == 400.0);
  CHECK(prob.num_free() == mesh.num_nodes() - mesh.dirichlet_nodes.size());
}

TEST_CASE("accepted steps satisfy the residual contract") {
  const QuadMesh mesh = build_quarter_annulus(0.1, 1.0, 8, 8);
  ThermalProblem prob(mesh, PhaseModel{});
  const auto props = mixed(mesh);
  const auto s = setup(6, 8000.0);
  const auto h = prob.run_transient(props, s);
  for (int n = 1; n <= h.num_steps(); ++n) {
    SpMat J;
    VecX r, load;
    prob.assemble_step(props, h.states[n], h.states[n - 1], h.dts[n - 1], J, r, load);
    const VecX rf = prob.restrict_free(r), lf = prob.restrict_free(load);
    CHECK(rf.norm() <= s.newton_tol * (1.0 + lf.norm()));
  }
}

TEST_CASE("global Jacobian matches finite differences") {
  const QuadMesh mesh = build_quarter_annulus(0.1, 1.0, 4, 5);
  ThermalProblem prob(mesh, PhaseModel{});
  auto props = mixed(mesh);
  props.melt_temp = 350.0;
  VecX Tp = prob.initial_state(setup(1, 1.0));
  VecX T = Tp;
  for (Eigen::Index i = 0; i < T.size(); ++i) T[i] = 340.0 + 0.7 * static_cast<double>(i % 23);
  for (int d : mesh.dirichlet_nodes) T[d] = 273.0;
  SpMat J;
  VecX r, load;
  prob.assemble_step(props, T, Tp, 4000.0, J, r, load);
  const Eigen::MatrixXd Jd(J);
  const auto& fr = prob.free_nodes();
  for (std::size_t c = 0; c < fr.size(); c += 3) {
    VecX a = T, b = T;
    const double h = 1e-5;
    a[fr[c]] += h;
    b[fr[c]] -= h;
    const VecX fd = prob.restrict_free(prob.residual(props, a, Tp, 4000.0) -
                                       prob.residual(props, b, Tp, 4000.0)) / (2 * h);
    CHECK((Jd.col(static_cast<Eigen::Index>(c)) - fd).norm() <= 1e-6 * fd.norm());
  }
}

TEST_CASE("serial and OpenMP paths give identical bits") {
  const QuadMesh mesh = build_quarter_annulus(0.1, 1.0, 12, 16);
  const auto props = mixed(mesh);
  ThermalProblem a(mesh, PhaseModel{}, true, Exec::serial);
  ThermalProblem b(mesh, PhaseModel{}, true, Exec::parallel);
  const auto ha = a.run_transient(props, setup(5, 8000.0));
  const auto hb = b.run_transient(props, setup(5, 8000.0));
  REQUIRE(ha.num_steps() == hb.num_steps());
  for (int n = 0; n <= ha.num_steps(); ++n) CHECK((ha.states[n].array() == hb.states[n].array()).all());
  for (std::size_t i = 0; i < ha.energy.size(); ++i) CHECK(ha.energy[i] == hb.energy[i]);
  VecX lam = VecX::LinSpaced(static_cast<Eigen::Index>(mesh.num_nodes()), -1.0, 2.0);
  const VecX ca = a.previous_coupling(props, ha.states[2], ha.states[1], lam, 8000.0);
  const VecX cb = b.previous_coupling(props, ha.states[2], ha.states[1], lam, 8000.0);
  CHECK((ca.array() == cb.array()).all());
  PropertyGradient ga(mesh.num_elements()), gb(mesh.num_elements());
  a.accumulate_sensitivity(props, ha.states[2], ha.states[1], lam, 8000.0, ga);
  b.accumulate_sensitivity(props, ha.states[2], ha.states[1], lam, 8000.0, gb);
  CHECK(ga.k == gb.k);
  CHECK(ga.latent == gb.latent);
  CHECK(ga.melt_temp == gb.melt_temp);
}

TEST_CASE("energy decreases monotonically and matches the boundary heat") {
  // The stored-energy functional evaluates the phase state at element means
  // while the residual integrates it at quadrature points, so the balance is
  // checked where both agree: sensible heat only, and a full discharge.
  const QuadMesh mesh = build_quarter_annulus(0.1, 1.0, 10, 10);
  ThermalProblem prob(mesh, PhaseModel{}, false);
  for (auto [k, L] : {std::pair{0.2, 0.0}, std::pair{20.0, 1.7e5}}) {
    const auto props = uniform(mesh.num_elements(), k, 880.0, 2000.0, L, 298.15);
    const auto h = prob.run_transient(props, setup(20, 24000.0));
    for (std::size_t i = 1; i < h.energy.size(); ++i) CHECK(h.energy[i] < h.energy[i - 1]);
    double released = 0.0;
    for (int n = 1; n <= h.num_steps(); ++n)
      released -= boundary_heat(mesh, prob.residual(props, h.states[n], h.states[n - 1], h.dts[n - 1]));
    const double drop = h.energy.front() - h.energy.back();
    CHECK(released == doctest::Approx(drop).epsilon(0.02));
  }
}

TEST_CASE("backward Euler stays bounded across three decades of step size") {
  const QuadMesh mesh = build_quarter_annulus(0.1, 1.0, 8, 8);
  ThermalProblem prob(mesh, PhaseModel{});
  const auto props = uniform(mesh.num_elements(), 0.2, 880.0, 2000.0, 1.7e5, 330.0);
  for (double dt : {100.0, 1000.0, 10000.0, 100000.0}) {
    const auto h = prob.run_transient(props, setup(4, dt));
    for (const auto& T : h.states) {
      CHECK(T.allFinite());
      CHECK(T.maxCoeff() <= 400.0 + 0.5);
      CHECK(T.minCoeff() >= 273.0 - 0.5);
    }
  }
}

TEST_CASE("GGLS damps the first-step overshoot of a high-contrast layout") {
  const QuadMesh mesh = build_quarter_annulus(0.1, 1.0, 8, 8);
  const auto props = mixed(mesh);
  for (double dt : {100.0, 1000.0, 10000.0}) {
    double peak[2] = {0.0, 0.0};
    for (int g = 0; g < 2; ++g) {
      ThermalProblem prob(mesh, PhaseModel{}, g == 1);
      for (const auto& T : prob.run_transient(props, setup(4, dt)).states) {
        CHECK(T.allFinite());
        peak[g] = std::max(peak[g], T.maxCoeff());
      }
    }
    CHECK(peak[1] < peak[0]);
  }
}

TEST_CASE("stored energy of a uniform state") {
  const QuadMesh mesh = build_quarter_annulus(0.1, 1.0, 6, 6);
  const auto props = uniform(mesh.num_elements(), 1.0, 900.0, 2000.0, 1.5e5, 300.0);
  PhaseModel ph;
  const VecX T = VecX::Constant(static_cast<Eigen::Index>(mesh.num_nodes()), 350.0);
  const double V = mesh.total_volume();
  // fully liquid: sensible plus latent
  CHECK(stored_energy(mesh, props, ph, T, 273.0) ==
        doctest::Approx(900.0 * (2000.0 * 77.0 + 1.5e5) * V).epsilon(1e-9));
  const auto parts = stored_energy_partials(mesh, props, ph, T, 273.0);
  VecX Tp = T;
  Tp[7] += 1e-3;
  const double fd = (stored_energy(mesh, props, ph, Tp, 273.0) -
                     stored_energy(mesh, props, ph, T, 273.0)) / 1e-3;
  CHECK(parts.dT[7] == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("checkpoint schedules") {
  const auto all = make_schedule(60, 61);
  CHECK(all.stored_steps().size() == 61);
  const auto three = make_schedule(5, 3);
  CHECK(three.stored_steps() == std::vector<int>{0, 3, 5});
  CHECK(make_schedule(60, 7).stored_steps().size() <= 7);
}

TEST_CASE("dropped states are rebuilt exactly") {
  const QuadMesh mesh = build_quarter_annulus(0.1, 1.0, 6, 6);
  ThermalProblem prob(mesh, PhaseModel{});
  const auto props = mixed(mesh);
  const auto s = setup(7, 8000.0);
  const auto full = prob.run_transient(props, s);
  const auto sched = make_schedule(7, 3);
  const auto sparse = prob.run_transient(props, s, &sched);
  CHECK(!sparse.stored(2));
  std::vector<VecX> span;
  prob.recompute_span(props, s, sparse, 0, 4, span);
  REQUIRE(span.size() >= 3);
  CHECK((span[2].array() == full.states[2].array()).all());
  CHECK((sparse.final_state().array() == full.final_state().array()).all());
}
