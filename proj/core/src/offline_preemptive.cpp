// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#include "gridsched/offline_preemptive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "gridsched/rng.hpp"

namespace gridsched::preemptive {

namespace {

constexpr int kBisectionIterations = 200;

struct WindowSegment {
  double begin;
  double end;
  double other;
};

std::vector<WindowSegment> window_segments(const LoadProfile& load, double begin, double end) {
  std::vector<WindowSegment> out;
  for (std::size_t i = 0; i < load.segment_count(); ++i) {
    const double lo = std::max(begin, load.segment_begin(i));
    const double hi = std::min(end, load.segment_end(i));
    if (hi > lo) out.push_back({lo, hi, load.values()[i]});
  }
  return out;
}

double fill_fraction(double level, double other, double power) {
  return std::clamp((level - other) / power, 0.0, 1.0);
}

double filled_mass(const std::vector<WindowSegment>& segs, double level, double power) {
  double mass = 0.0;
  for (const auto& s : segs) mass += (s.end - s.begin) * fill_fraction(level, s.other, power);
  return mass;
}

Allocation allocation_from(const std::vector<WindowSegment>& segs, double horizon, double level,
                           double power, bool full) {
  std::vector<double> bp{0.0};
  std::vector<double> vals;
  if (segs.front().begin > 0.0) {
    bp.push_back(segs.front().begin);
    vals.push_back(0.0);
  }
  for (const auto& s : segs) {
    bp.push_back(s.end);
    vals.push_back(full ? 1.0 : fill_fraction(level, s.other, power));
  }
  if (bp.back() < horizon) {
    bp.push_back(horizon);
    vals.push_back(0.0);
  }
  return Allocation(std::move(bp), std::move(vals));
}

Allocation uniform_allocation(const DemandTask& task, double horizon) {
  return LoadProfile::rectangle(horizon, task.arrival(), std::min(task.deadline(), horizon),
                                std::min(1.0, task.duration() / task.window()));
}

LoadProfile sum_load(std::span<const DemandTask> tasks, const std::vector<Allocation>& xs, double horizon) {
  LoadProfile load = LoadProfile::zero(horizon);
  for (std::size_t i = 0; i < tasks.size(); ++i) load = load + xs[i].scaled(tasks[i].power());
  return load;
}

}  // namespace

void BalanceConfig::validate() const {
  if (!(objective_tolerance > 0.0)) throw InvalidArgument("objective_tolerance must be > 0");
  if (!(waterlevel_tolerance > 0.0)) throw InvalidArgument("waterlevel_tolerance must be > 0");
  if (max_rounds < 1) throw InvalidArgument("max_rounds must be >= 1");
}

WaterFill best_response(const DemandTask& task, const LoadProfile& other_load, double tolerance) {
  const double horizon = other_load.horizon();
  check_within_horizon(task, horizon);
  const double begin = task.arrival();
  const double end = std::min(task.deadline(), horizon);
  const double window = end - begin;
  const double mass = task.duration();
  if (mass > window * (1.0 + kFeasibilityTolerance)) {
    throw InvalidArgument("task " + std::to_string(task.id()) + " does not fit its window");
  }

  const auto segs = window_segments(other_load, begin, end);
  const double power = task.power();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : segs) {
    lo = std::min(lo, s.other);
    hi = std::max(hi, s.other);
  }

  // Zero slack: the whole window is needed.
  if (mass >= window * (1.0 - kFeasibilityTolerance)) {
    return {allocation_from(segs, horizon, hi + power, power, true), hi + power};
  }

  hi += power;
  for (int it = 0; it < kBisectionIterations && hi > lo; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (filled_mass(segs, mid, power) < mass) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // hi always satisfies filled_mass >= mass; pick whichever end is closer.
  double level = hi;
  if (std::abs(filled_mass(segs, lo, power) - mass) < std::abs(filled_mass(segs, hi, power) - mass)) {
    level = lo;
  }
  const double error = std::abs(filled_mass(segs, level, power) - mass);
  if (error > tolerance) {
    throw std::logic_error("water level bisection did not bracket the duration of task " +
                           std::to_string(task.id()) + " (mass error " + std::to_string(error) + ")");
  }
  return {allocation_from(segs, horizon, level, power, false), level};
}

BalanceResult solve(std::span<const DemandTask> tasks, const CostFunction& cost, double horizon,
                    const BalanceConfig& config) {
  config.validate();
  std::set<TaskId> ids;
  for (const auto& task : tasks) {
    check_within_horizon(task, horizon);
    if (!ids.insert(task.id()).second) throw InvalidArgument("duplicate task id " + std::to_string(task.id()));
  }

  std::vector<Allocation> xs;
  xs.reserve(tasks.size());
  for (const auto& task : tasks) xs.push_back(uniform_allocation(task, horizon));

  LoadProfile load = sum_load(tasks, xs, horizon);
  double objective = schedule_cost(cost, load);
  BalanceResult result{{}, load, objective, 0, false, {objective}};

  std::vector<std::size_t> order(tasks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(config.seed);

  for (int round = 1; round <= config.max_rounds && !tasks.empty(); ++round) {
    if (config.sweep_order == SweepOrder::RandomPermutationPerRound) {
      rng = CounterRng::stream(config.seed, static_cast<std::uint64_t>(round), 0);
      portable_shuffle(order.begin(), order.end(), rng);
    }
    // Rebuilt each round so subtract/add rounding does not accumulate.
    load = sum_load(tasks, xs, horizon);
    const double round_start = schedule_cost(cost, load);
    for (std::size_t idx : order) {
      const auto& task = tasks[idx];
      const LoadProfile other = load - xs[idx].scaled(task.power());
      auto fill = best_response(task, other, config.waterlevel_tolerance);
      xs[idx] = std::move(fill.allocation);
      load = other + xs[idx].scaled(task.power());
      objective = schedule_cost(cost, load);
      result.objective_trace.push_back(objective);
    }
    result.rounds_used = round;
    const double decrease = round_start - objective;
    if (decrease <= config.objective_tolerance * std::max(std::abs(round_start), 1e-300)) {
      result.converged = true;
      break;
    }
  }
  if (tasks.empty()) result.converged = true;

  for (std::size_t i = 0; i < tasks.size(); ++i) result.schedule.allocations.emplace(tasks[i].id(), xs[i]);
  result.load = sum_load(tasks, xs, horizon);
  result.objective = schedule_cost(cost, result.load);
  return result;
}

std::vector<FractionalEntry> rounding_hint(const BalanceResult& result) {
  constexpr double kEdge = 1e-9;
  std::vector<FractionalEntry> out;
  for (const auto& [id, x] : result.schedule.allocations) {
    FractionalEntry entry{id, 0.0, 0.0};
    for (std::size_t i = 0; i < x.segment_count(); ++i) {
      const double v = x.values()[i];
      if (v > kEdge && v < 1.0 - kEdge) {
        entry.fractional_mass += v * x.segment_length(i);
        entry.fractional_time += x.segment_length(i);
      }
    }
    if (entry.fractional_time > 0.0) out.push_back(entry);
  }
  return out;
}

}  // namespace gridsched::preemptive
