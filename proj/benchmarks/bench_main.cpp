// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "gridsched/offline_nonpreemptive.hpp"
#include "gridsched/offline_preemptive.hpp"
#include "gridsched/sim_engine.hpp"
#include "gridsched/stochastic_analysis.hpp"

using namespace gridsched;

namespace {

std::vector<DemandTask> random_tasks(int n, double horizon, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<DemandTask> tasks;
  for (int i = 0; i < n; ++i) {
    const double a = (horizon - 1) * u(rng);
    const double d = a + 0.5 + (horizon - a - 0.5) * u(rng);
    tasks.emplace_back(i, a, (d - a) * (0.1 + 0.8 * u(rng)), 0.5 + 2 * u(rng), d);
  }
  return tasks;
}

void BM_PreemptiveSolve(benchmark::State& state) {
  const auto tasks = random_tasks(static_cast<int>(state.range(0)), 24.0, 1);
  const auto cost = CostFunction::quadratic(1, 0, 0);
  for (auto _ : state) {
    auto r = preemptive::solve(tasks, cost, 24.0);
    benchmark::DoNotOptimize(r.objective);
    state.counters["rounds"] = r.rounds_used;
  }
}
BENCHMARK(BM_PreemptiveSolve)->Arg(5)->Arg(20)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_ExactMinBins(benchmark::State& state) {
  std::mt19937_64 rng(2);
  nonpreemptive::PackingInstance in{{}, 100.0, 1.0};
  for (int i = 0; i < state.range(0); ++i) in.item_sizes.push_back(std::uniform_int_distribution<int>(10, 60)(rng));
  for (auto _ : state) benchmark::DoNotOptimize(nonpreemptive::exact_min_bins(in).bin_count);
}
BENCHMARK(BM_ExactMinBins)->Arg(10)->Arg(15)->Arg(20)->Unit(benchmark::kMicrosecond);

void BM_FirstFitDecreasing(benchmark::State& state) {
  std::mt19937_64 rng(3);
  nonpreemptive::PackingInstance in{{}, 1.0, 1.0};
  for (int i = 0; i < state.range(0); ++i) in.item_sizes.push_back(std::uniform_real_distribution<double>(0.05, 0.7)(rng));
  for (auto _ : state) benchmark::DoNotOptimize(nonpreemptive::first_fit_decreasing(in).bin_count);
}
BENCHMARK(BM_FirstFitDecreasing)->Arg(100)->Arg(10000);

void BM_Simulate(benchmark::State& state) {
  sim::SimConfig c;
  c.params = {8.0, 1.0, 0.1, {{1.0, 1.0}}};
  c.cost = CostFunction::quadratic(1, 0, 0);
  c.horizon = 1e4;
  switch (state.range(0)) {
    case 0: c.policy = sim::DefaultPolicy{}; break;
    case 1: c.policy = sim::ControlledRelease{9}; break;
    case 2: c.policy = sim::ThresholdPostponement{sim::SwitchingCurve(9)}; break;
    default: c.policy = sim::EnhancedThresholdPostponement{8}; break;
  }
  state.SetLabel(sim::policy_name(c.policy));
  std::uint64_t events = 0;
  for (auto _ : state) {
    const auto r = sim::run(c);
    events += r.counters.arrivals + r.counters.completions + r.counters.deadline_activations;
    benchmark::DoNotOptimize(r.avg_cost);
  }
  state.counters["events/s"] = benchmark::Counter(static_cast<double>(events), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Simulate)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_MmcPowerCost(benchmark::State& state) {
  const auto cost = CostFunction::quadratic(1, 0, 0);
  const auto c = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(stochastic::mmc_power_cost(0.95 * c, 1.0, c, cost));
}
BENCHMARK(BM_MmcPowerCost)->Arg(10)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
