// Serial reference vs OpenMP kernels on the full-resolution mesh.
#include <benchmark/benchmark.h>

#include <random>

#include "lhtes/design_field.hpp"
#include "lhtes/thermal.hpp"

using namespace lhtes;

namespace {

Exec exec_of(const benchmark::State& s) {
  return s.range(0) ? Exec::parallel : Exec::serial;
}

const QuadMesh& full_mesh() {
  static const QuadMesh m = build_quarter_annulus(0.1, 1.0, 50, 100);
  return m;
}

std::vector<double> random_gamma(std::size_t n) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> g(n);
  for (auto& v : g) v = u(rng);
  return g;
}

EffectiveProperties test_props(const QuadMesh& m) {
  const HcmProperties h{205.0, 900.0, 2700.0, 2.0};
  const PcmProperties p{0.2, 2000.0, 880.0, 170000.0, 298.15};
  return interpolate(random_gamma(m.num_elements()), h, p, 3.0);
}

void BM_AssembleStep(benchmark::State& state) {
  const auto& mesh = full_mesh();
  PhaseModel phase;
  ThermalProblem problem(mesh, phase, true, exec_of(state));
  const auto props = test_props(mesh);
  TransientSetup setup;
  const VecX Tp = problem.initial_state(setup);
  VecX T = Tp.array() - 50.0;
  SpMat J;
  VecX r, load;
  for (auto _ : state) {
    problem.assemble_step(props, T, Tp, setup.dt, J, r, load);
    benchmark::DoNotOptimize(r.data());
  }
}
BENCHMARK(BM_AssembleStep)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

void BM_PreviousCoupling(benchmark::State& state) {
  const auto& mesh = full_mesh();
  PhaseModel phase;
  ThermalProblem problem(mesh, phase, true, exec_of(state));
  const auto props = test_props(mesh);
  TransientSetup setup;
  const VecX Tp = problem.initial_state(setup);
  VecX T = Tp.array() - 50.0;
  const VecX lambda = VecX::Ones(T.size());
  for (auto _ : state) {
    VecX c = problem.previous_coupling(props, T, Tp, lambda, setup.dt);
    benchmark::DoNotOptimize(c.data());
  }
}
BENCHMARK(BM_PreviousCoupling)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

void BM_Filter(benchmark::State& state) {
  const auto& mesh = full_mesh();
  static const FilterOperator filter(mesh, 0.03);
  const auto g = random_gamma(mesh.num_elements());
  for (auto _ : state) {
    auto f = filter.apply(g, exec_of(state));
    auto b = filter.apply_transpose(f, exec_of(state));
    benchmark::DoNotOptimize(b.data());
  }
}
BENCHMARK(BM_Filter)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMicrosecond);

void BM_Transient(benchmark::State& state) {
  const auto& mesh = full_mesh();
  PhaseModel phase;
  ThermalProblem problem(mesh, phase, true, exec_of(state));
  const auto props = test_props(mesh);
  TransientSetup setup;
  setup.n_steps = 10;
  for (auto _ : state) {
    auto h = problem.run_transient(props, setup);
    benchmark::DoNotOptimize(h.energy.data());
  }
}
BENCHMARK(BM_Transient)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
