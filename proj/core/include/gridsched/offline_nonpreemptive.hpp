// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridsched/task_model.hpp"

namespace gridsched::nonpreemptive {

/// Uniform instance: every task arrives at 0, has deadline D and power p.
/// Durations are bin-packing item sizes, D is the bin capacity, and each bin
/// is one power level of height p.
struct PackingInstance {
  std::vector<double> item_sizes;
  double capacity = 1.0;
  double power_step = 1.0;

  void validate() const;
};

struct PackingResult {
  std::vector<std::vector<std::size_t>> bins;  // item indices
  std::size_t bin_count = 0;
  double peak_power = 0.0;
};

struct SearchBudget {
  std::uint64_t max_nodes = 10'000'000;
};

/// A search ran out of budget. Carries the best solution found so far.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PackingBudgetExceeded : public BudgetExceeded {
 public:
  PackingBudgetExceeded(const std::string& what, PackingResult best)
      : BudgetExceeded(what), best_(std::move(best)) {}
  const PackingResult& best_known() const noexcept { return best_; }

 private:
  PackingResult best_;
};

struct PackingDecision {
  bool feasible = false;
  std::string diagnostic;  // set when an item cannot fit any bin
  explicit operator bool() const noexcept { return feasible; }
};

/// Exact: can the items be split into at most m bins of the instance capacity?
PackingDecision decide_packing(const PackingInstance& inst, std::size_t m, const SearchBudget& budget = {});

/// Provably minimal packing by branch and bound between ceil(sum/D) and the FFD count.
PackingResult exact_min_bins(const PackingInstance& inst, const SearchBudget& budget = {});

PackingResult first_fit_decreasing(const PackingInstance& inst);

struct PackedSchedule {
  std::vector<DemandTask> tasks;  // item i becomes task id i
  NonPreemptiveSchedule schedule;
  LoadProfile load;
};

/// Items of each bin run back to back from time 0; the peak load is bin_count * p.
PackedSchedule schedule_from_packing(const PackingInstance& inst, const PackingResult& result);

/// The task set of a uniform instance (ids are item indices).
std::vector<DemandTask> uniform_tasks(const PackingInstance& inst);

/// Inverse of uniform_tasks when every task shares arrival 0, one deadline and one power.
std::optional<PackingInstance> as_uniform_instance(std::span<const DemandTask> tasks);

struct QuantizedTasks {
  std::vector<DemandTask> tasks;  // fresh ids 0..k-1
  std::vector<TaskId> origin;     // originating task id per entry
};

/// Replaces a task of power n * quantum by n copies of power p / n with the same timing.
QuantizedTasks quantize_powers(std::span<const DemandTask> tasks, double quantum);

struct NonPreemptiveSolution {
  NonPreemptiveSchedule schedule;
  LoadProfile load;
  double objective;
  std::uint64_t nodes;
};

class ScheduleBudgetExceeded : public BudgetExceeded {
 public:
  ScheduleBudgetExceeded(const std::string& what, std::optional<NonPreemptiveSolution> best)
      : BudgetExceeded(what), best_(std::move(best)) {}
  const std::optional<NonPreemptiveSolution>& best_known() const noexcept { return best_; }

 private:
  std::optional<NonPreemptiveSolution> best_;
};

/// Minimum of the integral of C(load) over start times a, a+g, a+2g, ... <= d-s
/// (plus d-s itself when off-grid). Ties resolve to the lexicographically
/// smallest start vector in input order.
NonPreemptiveSolution exact_nonpreemptive_min_cost(std::span<const DemandTask> tasks, const CostFunction& cost,
                                                   double horizon, double grid_step,
                                                   const SearchBudget& budget = {});

}  // namespace gridsched::nonpreemptive
