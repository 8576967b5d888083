// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gridsched/task_model.hpp"

namespace gridsched::preemptive {

enum class SweepOrder {
  Sequential,                 // 1..n, 1..n, ...
  RandomPermutationPerRound,  // fresh permutation each round, seeded
};

struct BalanceConfig {
  SweepOrder sweep_order = SweepOrder::Sequential;
  std::uint64_t seed = 0;
  /// Stop when a full round lowers the objective by less than this fraction.
  double objective_tolerance = 1e-8;
  int max_rounds = 1000;
  /// Absolute tolerance on |integral of x_n - s_n| for each best response.
  double waterlevel_tolerance = 1e-10;

  void validate() const;
};

struct WaterFill {
  Allocation allocation;
  double level;  // water level nu
};

struct BalanceResult {
  PreemptiveSchedule schedule;
  LoadProfile load;
  double objective;
  int rounds_used;
  bool converged;
  /// Objective before any update followed by the objective after every best response.
  std::vector<double> objective_trace;
};

/// Single-task water filling against the load of all other tasks:
/// x(t) = clamp((nu - other(t)) / p, 0, 1) on [a, d], with nu found by bisection
/// so that the allocation integrates to the task's duration.
WaterFill best_response(const DemandTask& task, const LoadProfile& other_load, double tolerance);

/// Iterated best responses (block coordinate descent) over all tasks, starting
/// from each task spread uniformly over its window.
BalanceResult solve(std::span<const DemandTask> tasks, const CostFunction& cost, double horizon,
                    const BalanceConfig& config = {});

struct FractionalEntry {
  TaskId task;
  double fractional_mass;  // integral of x_n over the times where 0 < x_n < 1
  double fractional_time;  // measure of those times
};

/// Tasks whose allocation is strictly between 0 and 1 somewhere.
std::vector<FractionalEntry> rounding_hint(const BalanceResult& result);

}  // namespace gridsched::preemptive
