// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace gridsched {

using TaskId = std::int64_t;

/// Relative tolerance used by every feasibility check on time and power.
inline constexpr double kFeasibilityTolerance = 1e-9;

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A schedule violates a task's window, mass, or range constraint.
class InfeasibleSchedule : public std::runtime_error {
 public:
  InfeasibleSchedule(TaskId task, const std::string& what)
      : std::runtime_error("task " + std::to_string(task) + ": " + what), task_(task) {}

  TaskId task() const noexcept { return task_; }

 private:
  TaskId task_;
};

/// One power demand: generated at `arrival`, runs for `duration` at `power` Watts,
/// and must be complete by `deadline`.
class DemandTask {
 public:
  DemandTask(TaskId id, double arrival, double duration, double power, double deadline);

  TaskId id() const noexcept { return id_; }
  double arrival() const noexcept { return arrival_; }
  double duration() const noexcept { return duration_; }
  double power() const noexcept { return power_; }
  double deadline() const noexcept { return deadline_; }

  /// Latest admissible start delay: deadline - duration - arrival.
  double slack() const noexcept { return deadline_ - duration_ - arrival_; }
  double window() const noexcept { return deadline_ - arrival_; }

  bool operator==(const DemandTask&) const = default;

 private:
  TaskId id_;
  double arrival_;
  double duration_;
  double power_;
  double deadline_;
};

/// Increasing convex instantaneous cost of total power.
class CostFunction {
 public:
  struct Segment {
    double slope;
    double intercept;
    bool operator==(const Segment&) const = default;
  };
  struct PiecewiseLinear {
    std::vector<Segment> segments;
    bool operator==(const PiecewiseLinear&) const = default;
  };
  struct Quadratic {
    double c2;
    double c1;
    double c0;
    bool operator==(const Quadratic&) const = default;
  };

  /// max_i { k_i x + b_i }; slopes must be nonnegative and nondecreasing.
  static CostFunction piecewise(std::vector<Segment> segments);
  static CostFunction quadratic(double c2, double c1, double c0);
  static CostFunction linear(double slope, double intercept = 0.0);
  static CostFunction constant(double value);

  /// Cost per unit time at total power x. Throws InvalidArgument for x < 0.
  double operator()(double x) const;

  /// Right derivative. At a kink of a piecewise-linear cost this is the slope
  /// of the segment to the right.
  double derivative(double x) const;

  /// Coefficients (u0, u1, u2) with |C(x)| <= u0 + u1 x + u2 x^2 for x >= 0.
  /// Used to bound truncated tails of expectations.
  std::array<double, 3> growth_envelope() const;

  bool is_piecewise() const noexcept { return std::holds_alternative<PiecewiseLinear>(form_); }
  const std::variant<PiecewiseLinear, Quadratic>& form() const noexcept { return form_; }

  bool operator==(const CostFunction&) const = default;

 private:
  explicit CostFunction(std::variant<PiecewiseLinear, Quadratic> form) : form_(std::move(form)) {}

  std::variant<PiecewiseLinear, Quadratic> form_;
};

/// Piecewise-constant nonnegative function on [0, T] with right-open segments
/// [t_i, t_{i+1}). Canonical form: adjacent segments never share a value.
class LoadProfile {
 public:
  LoadProfile(std::vector<double> breakpoints, std::vector<double> values);

  /// The zero function on [0, horizon].
  static LoadProfile zero(double horizon);

  /// `level` on [begin, end), zero elsewhere in [0, horizon].
  static LoadProfile rectangle(double horizon, double begin, double end, double level);

  double horizon() const noexcept { return breakpoints_.back(); }
  std::span<const double> breakpoints() const noexcept { return breakpoints_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t segment_count() const noexcept { return values_.size(); }
  double segment_begin(std::size_t i) const { return breakpoints_[i]; }
  double segment_end(std::size_t i) const { return breakpoints_[i + 1]; }
  double segment_length(std::size_t i) const { return breakpoints_[i + 1] - breakpoints_[i]; }

  /// Value at time t (t == T returns the last segment's value).
  double at(double t) const;
  double integral() const;
  double integral(double begin, double end) const;
  double max_value() const;
  double min_value(double begin, double end) const;
  double max_value(double begin, double end) const;

  LoadProfile operator+(const LoadProfile& other) const;
  /// Pointwise difference, clamped to zero where rounding would leave it slightly negative.
  LoadProfile operator-(const LoadProfile& other) const;
  LoadProfile scaled(double factor) const;

  /// Same function with extra breakpoints inserted; not canonical.
  LoadProfile refined(std::span<const double> extra) const;

  bool operator==(const LoadProfile&) const = default;

 private:
  struct Raw {};
  LoadProfile(Raw, std::vector<double> breakpoints, std::vector<double> values);
  static LoadProfile combine(const LoadProfile& a, const LoadProfile& b, double sign);
  void canonicalize();

  std::vector<double> breakpoints_;
  std::vector<double> values_;
};

/// Fractional allocation x_n(t) in [0,1] of a preemptive schedule.
using Allocation = LoadProfile;

struct PreemptiveSchedule {
  std::map<TaskId, Allocation> allocations;
};

struct NonPreemptiveSchedule {
  std::map<TaskId, double> starts;
};

using Schedule = std::variant<PreemptiveSchedule, NonPreemptiveSchedule>;

/// Throws InvalidArgument when the window of `task` leaves [0, horizon].
void check_within_horizon(const DemandTask& task, double horizon);

/// Checks one allocation against its task; throws InfeasibleSchedule.
void check_allocation(const DemandTask& task, const Allocation& x);

double eval_cost(const CostFunction& cost, double power);

/// Sum of p_n x_n(t) over all tasks. Rejects infeasible schedules with the
/// offending task id.
LoadProfile total_load(std::span<const DemandTask> tasks, const Schedule& schedule, double horizon);

/// Exact integral of C(l(t)) over the horizon.
double schedule_cost(const CostFunction& cost, const LoadProfile& load);

}  // namespace gridsched
