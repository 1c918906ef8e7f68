#include <benchmark/benchmark.h>

#include "gmfkit/gmfkit.hpp"

using namespace gmfkit;

namespace {

SimData instance(Index n, Index m) {
  SimConfig cfg;
  cfg.n = n;
  cfg.m = m;
  cfg.seed = 3;
  return generate(cfg);
}

const FamilySpec kFam(FamilyKind::Poisson);
const LinkSpec kLink(LinkKind::Log);

}  // namespace

// One aSGD block update with a fixed 100 x 20 minibatch. The cost should not
// move with n.
static void BM_AsgdStep(benchmark::State& state) {
  const Index n = state.range(0);
  const SimData sim = instance(n, 200);
  const FactorizationState init = initialize(sim.data, sim.covs, kFam, kLink, 5).state;
  SgdConfig cfg;
  cfg.nafill_every = 0;
  AsgdStepper st(sim.data, sim.covs, kFam, kLink, {}, cfg, init);
  const std::size_t blocks = st.col_blocks().size();
  std::size_t s = 0;
  for (auto _ : state) {
    st.step(s);
    s = (s + 1) % blocks;
  }
  state.counters["n"] = static_cast<double>(n);
}

static void BM_MinibatchGradients(benchmark::State& state) {
  const Index n = state.range(0);
  const SimData sim = instance(n, 200);
  const FactorizationState init = initialize(sim.data, sim.covs, kFam, kLink, 5).state;
  Minibatch mb;
  for (Index i = 0; i < 100; ++i) mb.rows.push_back(i * (n / 100));
  for (Index j = 0; j < 20; ++j) mb.cols.push_back(j * 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        minibatch_gradients(init, sim.data, sim.covs, kFam, kLink, {}, mb));
  }
}

static void BM_FullGradients(benchmark::State& state) {
  const Index n = state.range(0);
  const SimData sim = instance(n, 200);
  const FactorizationState init = initialize(sim.data, sim.covs, kFam, kLink, 5).state;
  for (auto _ : state) {
    benchmark::DoNotOptimize(full_gradients(init, sim.data, sim.covs, kFam, kLink, {}));
  }
  state.SetComplexityN(n);
}

static void BM_NewtonStep(benchmark::State& state) {
  const SimData sim = instance(state.range(0), 200);
  const FactorizationState init = initialize(sim.data, sim.covs, kFam, kLink, 5).state;
  NewtonStepper st(sim.data, sim.covs, kFam, kLink, {}, NewtonConfig{}, init);
  for (auto _ : state) st.step();
}

static void BM_AirwlsSweep(benchmark::State& state) {
  const SimData sim = instance(state.range(0), 200);
  const FactorizationState init = initialize(sim.data, sim.covs, kFam, kLink, 5).state;
  AirwlsStepper st(sim.data, sim.covs, kFam, kLink, {}, AirwlsConfig{}, init);
  for (auto _ : state) st.step();
}

static void BM_InitOlsSvd(benchmark::State& state) {
  const SimData sim = instance(state.range(0), 200);
  for (auto _ : state) {
    benchmark::DoNotOptimize(init_ols_svd(sim.data, sim.covs, kFam, kLink, 5));
  }
}

BENCHMARK(BM_AsgdStep)->RangeMultiplier(4)->Range(500, 8000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MinibatchGradients)->RangeMultiplier(4)->Range(500, 8000)
    ->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FullGradients)->RangeMultiplier(4)->Range(500, 8000)
    ->Unit(benchmark::kMillisecond)->Complexity(benchmark::oN);
BENCHMARK(BM_NewtonStep)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AirwlsSweep)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InitOlsSvd)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
