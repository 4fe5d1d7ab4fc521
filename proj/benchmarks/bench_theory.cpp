#include <benchmark/benchmark.h>

#include "sgcrl/theory.hpp"

namespace {

using namespace sgcrl;

void BM_DynamicsStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  DynamicsState st = init_theorem3(n, n, 0.6, 3);
  for (auto _ : state) benchmark::DoNotOptimize(dynamics_step(st, 0.01, LossDirection::Backward));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_DynamicsStep)->Arg(32)->Arg(64)->Arg(128)->Arg(256);

void BM_ComputeStats(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const DynamicsState st = init_theorem3(n, n, 0.6, 3);
  for (auto _ : state) benchmark::DoNotOptimize(compute_stats(st).alpha);
}
BENCHMARK(BM_ComputeStats)->Arg(64)->Arg(128);

// Short fixed-length run including the per-step spread tracking.
void BM_RunDynamics(benchmark::State& state) {
  DynamicsConfig cfg;
  cfg.max_steps = state.range(0);
  cfg.record_every = 100;
  cfg.tol = 1e-300;
  for (auto _ : state) {
    DynamicsState st = init_theorem3(64, 64, 0.6, 3);
    benchmark::DoNotOptimize(run_dynamics(st, cfg).max_c_spread);
  }
}
BENCHMARK(BM_RunDynamics)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace
