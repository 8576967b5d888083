// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "gridsched/offline_nonpreemptive.hpp"
#include "gridsched/offline_preemptive.hpp"
#include "oracles.hpp"

using namespace gridsched;
using namespace gridsched::nonpreemptive;

namespace {

PackingInstance inst(std::vector<double> sizes, double D, double p = 1.0) { return {std::move(sizes), D, p}; }

void expect_valid_packing(const PackingInstance& in, const PackingResult& r) {
  std::vector<int> seen(in.item_sizes.size(), 0);
  EXPECT_EQ(r.bins.size(), r.bin_count);
  for (const auto& bin : r.bins) {
    double total = 0.0;
    for (auto i : bin) {
      ++seen[i];
      total += in.item_sizes[i];
    }
    EXPECT_LE(total, in.capacity * (1 + 1e-9));
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_DOUBLE_EQ(r.peak_power, static_cast<double>(r.bin_count) * in.power_step);
}

}  // namespace

TEST(DecidePacking, Examples) {
  EXPECT_TRUE(decide_packing(inst({3, 3, 2, 2}, 5), 2));
  EXPECT_FALSE(decide_packing(inst({3, 3, 2, 2}, 5), 1));
  EXPECT_TRUE(decide_packing(inst({}, 5), 1));
  const auto oversize = decide_packing(inst({6, 1}, 5), 3);
  EXPECT_FALSE(oversize);
  EXPECT_FALSE(oversize.diagnostic.empty());
}

TEST(ExactMinBins, Examples) {
  EXPECT_EQ(exact_min_bins(inst({3, 3, 2, 2}, 5)).bin_count, 2u);
  const auto in = inst({4, 3, 3, 2, 2, 2}, 8);
  const auto r = exact_min_bins(in);
  EXPECT_EQ(r.bin_count, 2u);
  expect_valid_packing(in, r);
  EXPECT_EQ(exact_min_bins(inst({7, 7, 7}, 7)).bin_count, 3u);
}

TEST(FirstFitDecreasing, Examples) {
  const auto in = inst({4, 3, 3, 2, 2, 2}, 8);
  const auto r = first_fit_decreasing(in);
  ASSERT_EQ(r.bin_count, 3u);
  // ({4,3},{3,2,2},{2}) in item indices.
  EXPECT_EQ(r.bins[0], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(r.bins[1], (std::vector<std::size_t>{2, 3, 4}));
  EXPECT_EQ(r.bins[2], (std::vector<std::size_t>{5}));
  EXPECT_EQ(first_fit_decreasing(inst({3, 3, 2, 2}, 5)).bin_count, 2u);
  EXPECT_EQ(first_fit_decreasing(inst({}, 5)).bin_count, 0u);
  EXPECT_THROW(first_fit_decreasing(inst({6}, 5)), InvalidArgument);
}

TEST(Packing, RandomInstancesAgreeWithPartitionEnumeration) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 150; ++trial) {
    const int n = std::uniform_int_distribution<int>(0, 9)(rng);
    const double D = std::uniform_int_distribution<int>(4, 20)(rng);
    std::vector<double> sizes;
    for (int i = 0; i < n; ++i) sizes.push_back(std::uniform_int_distribution<int>(1, static_cast<int>(D))(rng));
    const auto in = inst(sizes, D, 1.5);
    const auto exact = exact_min_bins(in);
    expect_valid_packing(in, exact);
    EXPECT_EQ(exact.bin_count, oracle::min_bins_by_partition(sizes, D));
    const auto ffd = first_fit_decreasing(in);
    expect_valid_packing(in, ffd);
    EXPECT_GE(ffd.bin_count, exact.bin_count);
    EXPECT_LE(static_cast<double>(ffd.bin_count), 11.0 / 9.0 * static_cast<double>(exact.bin_count) + 1.0);
    if (n > 0) {
      EXPECT_TRUE(decide_packing(in, exact.bin_count));
      if (exact.bin_count > 1) EXPECT_FALSE(decide_packing(in, exact.bin_count - 1));
    }
  }
}

TEST(Packing, BudgetExceededCarriesFeasibleFallback) {
  std::vector<double> sizes;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 40; ++i) sizes.push_back(std::uniform_real_distribution<double>(0.2, 0.7)(rng));
  const auto in = inst(sizes, 1.0);
  try {
    exact_min_bins(in, SearchBudget{10});
    SUCCEED() << "solved within a tiny budget";
  } catch (const PackingBudgetExceeded& e) {
    expect_valid_packing(in, e.best_known());
  }
}

TEST(ScheduleFromPacking, Examples) {
  const auto single = inst({3, 2}, 5);
  const PackingResult one{{{0, 1}}, 1, 1.0};
  const auto s = schedule_from_packing(single, one);
  EXPECT_EQ(s.schedule.starts.at(0), 0.0);
  EXPECT_EQ(s.schedule.starts.at(1), 3.0);
  EXPECT_EQ(s.load.segment_count(), 1u);
  EXPECT_EQ(s.load.values()[0], 1.0);

  const auto in = inst({3, 3, 2, 2}, 5, 2.0);
  const auto packed = schedule_from_packing(in, exact_min_bins(in));
  EXPECT_EQ(packed.load.max_value(), 4.0);
  for (const auto& t : packed.tasks) EXPECT_LE(packed.schedule.starts.at(t.id()) + t.duration(), 5.0 + 1e-12);

  const auto empty = schedule_from_packing(inst({}, 5), PackingResult{});
  EXPECT_TRUE(empty.schedule.starts.empty());
  EXPECT_EQ(empty.load.max_value(), 0.0);
}

TEST(ScheduleFromPacking, PeakEqualsBinsTimesStep) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> sizes;
    for (int i = 0; i < 8; ++i) sizes.push_back(std::uniform_real_distribution<double>(0.5, 6)(rng));
    const auto in = inst(sizes, 6, 0.75);
    const auto r = exact_min_bins(in);
    const auto s = schedule_from_packing(in, r);
    EXPECT_NEAR(s.load.max_value(), r.peak_power, 1e-12);
    const auto rebuilt = total_load(s.tasks, s.schedule, in.capacity);
    EXPECT_NEAR(rebuilt.max_value(), r.peak_power, 1e-9);
  }
}

TEST(QuantizePowers, Examples) {
  const std::vector<DemandTask> t3{DemandTask(5, 1, 2, 3, 4)};
  const auto q = quantize_powers(t3, 1.0);
  ASSERT_EQ(q.tasks.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(q.tasks[i].power(), 1.0);
    EXPECT_EQ(q.tasks[i].arrival(), 1.0);
    EXPECT_EQ(q.tasks[i].duration(), 2.0);
    EXPECT_EQ(q.tasks[i].deadline(), 4.0);
    EXPECT_EQ(q.origin[i], 5);
  }
  EXPECT_EQ(quantize_powers(std::vector<DemandTask>{DemandTask(0, 0, 1, 2.5, 1)}, 0.5).tasks.size(), 5u);

  const std::vector<DemandTask> same{DemandTask(0, 0, 1, 0.7, 2), DemandTask(1, 0, 1, 0.7, 3)};
  EXPECT_EQ(quantize_powers(same, 0.7).tasks.size(), 2u);
  EXPECT_THROW(quantize_powers(std::vector<DemandTask>{DemandTask(9, 0, 1, 1.3, 1)}, 0.5), InvalidArgument);
}

TEST(QuantizePowers, PreservesLoadPointwise) {
  const std::vector<DemandTask> tasks{DemandTask(0, 0, 2, 3, 5), DemandTask(1, 1, 1, 1.5, 4), DemandTask(2, 0, 3, 2, 3)};
  NonPreemptiveSchedule sched{{{0, 1.0}, {1, 2.5}, {2, 0.0}}};
  const auto q = quantize_powers(tasks, 0.5);
  NonPreemptiveSchedule expanded;
  for (std::size_t i = 0; i < q.tasks.size(); ++i) expanded.starts[q.tasks[i].id()] = sched.starts.at(q.origin[i]);
  const auto a = total_load(tasks, sched, 5.0);
  const auto b = total_load(q.tasks, expanded, 5.0);
  for (double t = 0; t < 5; t += 0.01) EXPECT_NEAR(a.at(t), b.at(t), 1e-12);
}

TEST(ExactNonPreemptive, SingleTaskTieBreaksToArrival) {
  const std::vector<DemandTask> one{DemandTask(0, 1, 1, 1, 4)};
  const auto r = exact_nonpreemptive_min_cost(one, CostFunction::quadratic(1, 0, 0), 5.0, 0.5);
  EXPECT_EQ(r.schedule.starts.at(0), 1.0);
  EXPECT_NEAR(r.objective, 1.0, 1e-12);
}

TEST(ExactNonPreemptive, TwoUnitTasksSeparate) {
  const std::vector<DemandTask> two{DemandTask(0, 0, 1, 1, 2), DemandTask(1, 0, 1, 1, 2)};
  const auto r = exact_nonpreemptive_min_cost(two, CostFunction::quadratic(1, 0, 0), 2.0, 1.0);
  EXPECT_NEAR(r.objective, 2.0, 1e-12);
  EXPECT_EQ(r.schedule.starts.at(0), 0.0);
  EXPECT_EQ(r.schedule.starts.at(1), 1.0);
}

TEST(ExactNonPreemptive, MatchesBruteForceAndBoundsRelaxation) {
  std::mt19937_64 rng(31);
  const auto sq = CostFunction::quadratic(1, 0.5, 0);
  const auto pw = CostFunction::piecewise({{1, 0}, {3, -4}});
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<DemandTask> tasks;
    const int n = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int i = 0; i < n; ++i) {
      const int a = std::uniform_int_distribution<int>(0, 5)(rng);
      const double s = std::uniform_int_distribution<int>(1, 6)(rng) * 0.5;
      const double d = a + s + std::uniform_int_distribution<int>(0, 6)(rng) * 0.5;
      tasks.emplace_back(i, a, s, std::uniform_int_distribution<int>(1, 3)(rng), d);
    }
    const double T = 12.0;
    for (const auto& c : {sq, pw}) {
      const auto r = exact_nonpreemptive_min_cost(tasks, c, T, 0.5);
      const auto b = oracle::brute_force_starts(tasks, c, T, 0.5);
      EXPECT_NEAR(r.objective, b.objective, 1e-9 * std::max(1.0, b.objective));
      for (std::size_t i = 0; i < tasks.size(); ++i) EXPECT_EQ(r.schedule.starts.at(tasks[i].id()), b.starts[i]);
      const auto relax = preemptive::solve(tasks, c, T);
      EXPECT_GE(r.objective, relax.objective - 1e-6 * std::max(1.0, relax.objective));
    }
  }
}

TEST(ExactNonPreemptive, UniformInstanceMatchesPacking) {
  const auto in = inst({4, 3, 3, 2, 2, 2}, 8, 1.0);
  const auto tasks = uniform_tasks(in);
  // Piecewise cost that makes a third power level strictly costly.
  const auto c = CostFunction::piecewise({{0, 0}, {10, -20}});
  const auto r = exact_nonpreemptive_min_cost(tasks, c, 8.0, 1.0);
  const auto packed = schedule_from_packing(in, exact_min_bins(in));
  EXPECT_NEAR(r.objective, schedule_cost(c, packed.load), 1e-9);
  EXPECT_EQ(r.load.max_value(), 2.0);
}

TEST(ExactNonPreemptive, BudgetExceeded) {
  std::vector<DemandTask> tasks;
  for (int i = 0; i < 8; ++i) tasks.emplace_back(i, 0, 1, 1, 20);
  EXPECT_THROW(exact_nonpreemptive_min_cost(tasks, CostFunction::quadratic(1, 0, 0), 20.0, 0.1, SearchBudget{1000}),
               ScheduleBudgetExceeded);
}

TEST(AsUniformInstance, RecognisesUniformTasks) {
  const auto in = inst({1, 2, 3}, 4, 2);
  const auto back = as_uniform_instance(uniform_tasks(in));
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(back->item_sizes, in.item_sizes);
  EXPECT_EQ(back->capacity, 4.0);
  EXPECT_EQ(back->power_step, 2.0);
  const std::vector<DemandTask> mixed{DemandTask(0, 0, 1, 1, 4), DemandTask(1, 1, 1, 1, 4)};
  EXPECT_FALSE(as_uniform_instance(mixed).has_value());
}
