// Timings for the per-iteration kernels: FE solve, filter, projection, OC.

#include <benchmark/benchmark.h>

#include <random>

#include "topoctl/fem.hpp"
#include "topoctl/oc.hpp"
#include "topoctl/problems.hpp"
#include "topoctl/run.hpp"
#include "topoctl/three_field.hpp"

using namespace topoctl;

namespace {

DensityField noisy(const Mesh& mesh, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  DensityField f(mesh, 0.0);
  for (double& v : f.values) v = u(rng);
  return f;
}

ProblemSpec cantilever(int nx, int ny, SolveMode mode) {
  ProblemOverrides ov;
  ov.mesh = Mesh(nx, ny);
  LinearSolveConfig ls;
  ls.mode = mode;
  ov.solver = ls;
  return build_problem(ProblemId::kCantilever, Preset::kFast, ov);
}

void BM_SolveDirect(benchmark::State& state) {
  const int nx = static_cast<int>(state.range(0));
  const ProblemSpec spec = cantilever(nx, nx / 2, SolveMode::kDirect);
  FeSystem fe(spec.mesh, spec.material, spec.load, spec.solver);
  const auto rho = noisy(spec.mesh, 1);
  const auto moduli = simp_moduli(rho.values, 3.0, spec.material);
  for (auto _ : state) benchmark::DoNotOptimize(fe.solve(moduli));
  state.counters["dofs"] = fe.free_dof_count();
}
BENCHMARK(BM_SolveDirect)->Arg(60)->Arg(120)->Arg(180)->Unit(benchmark::kMillisecond);

// Alternating two close designs so the preconditioner is reused.
void BM_SolvePcg3d(benchmark::State& state) {
  ProblemOverrides ov;
  ov.mesh = Mesh(16, 8, 4);
  const ProblemSpec spec = build_problem(ProblemId::kCantilever3d, Preset::k3d, ov);
  FeSystem fe(spec.mesh, spec.material, spec.load, spec.solver);
  const auto rho = noisy(spec.mesh, 2);
  const auto a = simp_moduli(rho.values, 3.0, spec.material);
  auto b = a;
  for (double& e : b) e *= 1.01;
  bool flip = false;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fe.solve(flip ? b : a));
    flip = !flip;
  }
  state.counters["rebuilds"] = fe.stats().precond_rebuilds;
}
BENCHMARK(BM_SolvePcg3d)->Unit(benchmark::kMillisecond);

void BM_FilterBuild(benchmark::State& state) {
  const Mesh mesh(180, 90);
  const double r = static_cast<double>(state.range(0)) / 10.0;
  for (auto _ : state) benchmark::DoNotOptimize(build_filter(mesh, r));
}
BENCHMARK(BM_FilterBuild)->Arg(12)->Arg(15)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_PipelineForward(benchmark::State& state) {
  const Mesh mesh(180, 90);
  const FilterKernel k = build_filter(mesh, 1.5);
  const DesignPipeline pipe(&k, ProjectionParams{8.0, 0.5});
  const auto rho = noisy(mesh, 3);
  for (auto _ : state) benchmark::DoNotOptimize(pipe.forward(rho));
}
BENCHMARK(BM_PipelineForward)->Unit(benchmark::kMicrosecond);

void BM_OcStep(benchmark::State& state) {
  const Mesh mesh(180, 90);
  const FilterKernel k = build_filter(mesh, 1.5);
  const DesignPipeline pipe(&k, ProjectionParams{8.0, 0.5});
  const auto rho = noisy(mesh, 4);
  std::vector<double> dc(rho.size());
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10.0, -0.1);
  for (double& d : dc) d = u(rng);
  const OcConfig oc;
  for (auto _ : state) benchmark::DoNotOptimize(oc_step(rho, dc, pipe, 0.4, oc));
}
BENCHMARK(BM_OcStep)->Unit(benchmark::kMillisecond);

void BM_Iteration(benchmark::State& state) {
  const ProblemSpec spec = cantilever(60, 30, SolveMode::kDirect);
  DesignEvaluator ev(spec);
  const SolverParams params{3.0, 4.0, 1.5, 0.2};
  auto rho = initialize_design(spec.mesh, 0.4, 0);
  for (auto _ : state) {
    const Evaluation e = ev.evaluate(rho, params);
    rho = ev.update(rho, e, params, 0.4, OcConfig{}).rho;
  }
}
BENCHMARK(BM_Iteration)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
