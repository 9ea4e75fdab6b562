#include "hjforms/cover.hpp"
#include "hjforms/fokker_planck.hpp"
#include "hjforms/inviscid.hpp"
#include "hjforms/viscous.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

using namespace hjforms;

namespace {

Field cosine(int n) {
  Field f(n);
  for (int i = 0; i < n; ++i) f[i] = 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return f;
}

ViscousProblem cycle_problem(int n, double dt) {
  const GraphSpace s = GraphSpace::cycle(n);
  return {s, Cocycle::constant(s, 1.0), Potential::autonomous(0.25 * cosine(n)), 1.0, cosine(n),
          TimeGrid::over(0.5, dt)};
}

void BM_SolveValue(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const GraphSpace s = GraphSpace::cycle(n);
  const InviscidProblem p{s, Cocycle::constant(s, 1.0), Potential::zero(n), cosine(n), TimeGrid::over(0.5, 1.0 / n),
                          {}};
  for (auto _ : state) benchmark::DoNotOptimize(solve_value(p));
  state.SetComplexityN(n);
}
BENCHMARK(BM_SolveValue)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

void BM_Picard(benchmark::State& state) {
  const ViscousProblem p = cycle_problem(static_cast<int>(state.range(0)), 1e-3);
  for (auto _ : state) benchmark::DoNotOptimize(picard_solve(p));
}
BENCHMARK(BM_Picard)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Mol(benchmark::State& state) {
  const ViscousProblem p = cycle_problem(static_cast<int>(state.range(0)), 1e-3);
  for (auto _ : state) benchmark::DoNotOptimize(mol_solve(p));
}
BENCHMARK(BM_Mol)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_GradientFlow(benchmark::State& state) {
  const ViscousProblem p = cycle_problem(static_cast<int>(state.range(0)), 1e-2);
  const CoverWindow cover = CoverWindow::build(p.space, p.omega, 1, p.beta);
  for (auto _ : state) benchmark::DoNotOptimize(gradient_flow_solve(p, cover));
}
BENCHMARK(BM_GradientFlow)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_FpStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const GraphSpace s = GraphSpace::cycle(n);
  const Cocycle drift = Cocycle::constant(s, 1.0) - coboundary(s, cosine(n));
  const Field rho = Field::Constant(n, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(fp_step(s, rho, drift, drift, 1e-3, 1.0));
}
BENCHMARK(BM_FpStep)->RangeMultiplier(2)->Range(64, 1024);

}  // namespace

BENCHMARK_MAIN();
