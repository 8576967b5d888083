// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#include "gridsched/task_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace gridsched {

namespace {

double tolerance_at(double magnitude) {
  return kFeasibilityTolerance * std::max(1.0, std::abs(magnitude));
}

// Breakpoints closer than this fraction of the horizon are treated as one.
constexpr double kBreakpointMerge = 1e-12;
// Adjacent segment values closer than this (relative) are merged.
constexpr double kValueMerge = 1e-12;

bool finite(double x) { return std::isfinite(x); }

}  // namespace

DemandTask::DemandTask(TaskId id, double arrival, double duration, double power, double deadline)
    : id_(id), arrival_(arrival), duration_(duration), power_(power), deadline_(deadline) {
  const std::string tag = "task " + std::to_string(id) + ": ";
  if (!finite(arrival) || !finite(duration) || !finite(power) || !finite(deadline)) {
    throw InvalidArgument(tag + "fields must be finite");
  }
  if (arrival < 0.0) throw InvalidArgument(tag + "arrival must be >= 0");
  if (duration <= 0.0) throw InvalidArgument(tag + "duration must be > 0");
  if (power <= 0.0) throw InvalidArgument(tag + "power must be > 0");
  if (deadline < arrival + duration - tolerance_at(deadline)) {
    throw InvalidArgument(tag + "deadline precedes arrival + duration");
  }
}

// ---------------------------------------------------------------------------
// CostFunction

CostFunction CostFunction::piecewise(std::vector<Segment> segments) {
  if (segments.empty()) throw InvalidArgument("piecewise cost needs at least one segment");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    if (!finite(seg.slope) || !finite(seg.intercept)) {
      throw InvalidArgument("piecewise cost coefficients must be finite");
    }
    if (seg.slope < 0.0) throw InvalidArgument("piecewise cost slopes must be >= 0");
    if (i > 0 && seg.slope < segments[i - 1].slope) {
      throw InvalidArgument("piecewise cost slopes must be nondecreasing");
    }
  }
  return CostFunction(PiecewiseLinear{std::move(segments)});
}

CostFunction CostFunction::quadratic(double c2, double c1, double c0) {
  if (!finite(c2) || !finite(c1) || !finite(c0)) {
    throw InvalidArgument("quadratic cost coefficients must be finite");
  }
  if (c2 < 0.0 || c1 < 0.0) throw InvalidArgument("quadratic cost needs c2 >= 0 and c1 >= 0");
  return CostFunction(Quadratic{c2, c1, c0});
}

CostFunction CostFunction::linear(double slope, double intercept) {
  return piecewise({{slope, intercept}});
}

CostFunction CostFunction::constant(double value) { return piecewise({{0.0, value}}); }

double CostFunction::operator()(double x) const {
  if (!(x >= 0.0)) throw InvalidArgument("cost evaluated at negative power");
  if (const auto* pl = std::get_if<PiecewiseLinear>(&form_)) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& seg : pl->segments) best = std::max(best, seg.slope * x + seg.intercept);
    return best;
  }
  const auto& q = std::get<Quadratic>(form_);
  return (q.c2 * x + q.c1) * x + q.c0;
}

double CostFunction::derivative(double x) const {
  if (!(x >= 0.0)) throw InvalidArgument("cost derivative at negative power");
  if (const auto* pl = std::get_if<PiecewiseLinear>(&form_)) {
    const double value = (*this)(x);
    const double eps = 1e-12 * std::max(1.0, std::abs(value));
    double slope = 0.0;
    // Slopes are sorted, so the last active segment is the right one at a kink.
    for (const auto& seg : pl->segments) {
      if (seg.slope * x + seg.intercept >= value - eps) slope = seg.slope;
    }
    return slope;
  }
  const auto& q = std::get<Quadratic>(form_);
  return 2.0 * q.c2 * x + q.c1;
}

std::array<double, 3> CostFunction::growth_envelope() const {
  if (const auto* pl = std::get_if<PiecewiseLinear>(&form_)) {
    double u0 = 0.0;
    for (const auto& seg : pl->segments) u0 = std::max(u0, std::abs(seg.intercept));
    return {u0, pl->segments.back().slope, 0.0};
  }
  const auto& q = std::get<Quadratic>(form_);
  return {std::abs(q.c0), q.c1, q.c2};
}

double eval_cost(const CostFunction& cost, double power) { return cost(power); }

// ---------------------------------------------------------------------------
// LoadProfile

LoadProfile::LoadProfile(std::vector<double> breakpoints, std::vector<double> values)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
  if (breakpoints_.size() < 2 || values_.size() + 1 != breakpoints_.size()) {
    throw InvalidArgument("load profile needs n+1 breakpoints for n >= 1 values");
  }
  if (breakpoints_.front() != 0.0) throw InvalidArgument("load profile must start at 0");
  for (std::size_t i = 0; i + 1 < breakpoints_.size(); ++i) {
    if (!finite(breakpoints_[i + 1]) || !(breakpoints_[i + 1] > breakpoints_[i])) {
      throw InvalidArgument("load profile breakpoints must be finite and strictly increasing");
    }
  }
  double scale = 1.0;
  for (double v : values_) {
    if (!finite(v)) throw InvalidArgument("load profile values must be finite");
    scale = std::max(scale, std::abs(v));
  }
  for (double& v : values_) {
    if (v < 0.0) {
      if (v < -kFeasibilityTolerance * scale) throw InvalidArgument("load profile values must be >= 0");
      v = 0.0;
    }
  }
  canonicalize();
}

LoadProfile::LoadProfile(Raw, std::vector<double> breakpoints, std::vector<double> values)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {}

LoadProfile LoadProfile::zero(double horizon) {
  if (!(horizon > 0.0) || !finite(horizon)) throw InvalidArgument("horizon must be positive");
  return LoadProfile(Raw{}, {0.0, horizon}, {0.0});
}

LoadProfile LoadProfile::rectangle(double horizon, double begin, double end, double level) {
  LoadProfile out = zero(horizon);
  begin = std::clamp(begin, 0.0, horizon);
  end = std::clamp(end, 0.0, horizon);
  if (!(end > begin) || level == 0.0) return out;
  std::vector<double> bp{0.0};
  std::vector<double> vals;
  if (begin > 0.0) {
    bp.push_back(begin);
    vals.push_back(0.0);
  }
  bp.push_back(end);
  vals.push_back(level);
  if (end < horizon) {
    bp.push_back(horizon);
    vals.push_back(0.0);
  }
  return LoadProfile(std::move(bp), std::move(vals));
}

void LoadProfile::canonicalize() {
  std::vector<double> bp{breakpoints_.front()};
  std::vector<double> vals;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double len = breakpoints_[i + 1] - breakpoints_[i];
    if (!vals.empty()) {
      const double prev = vals.back();
      const double v = values_[i];
      const double scale = std::max({1.0, std::abs(prev), std::abs(v)});
      if (std::abs(prev - v) <= kValueMerge * scale) {
        // Length-weighted merge keeps the integral.
        const double prev_len = bp.back() - bp[bp.size() - 2];
        if (prev != v) vals.back() = (prev * prev_len + v * len) / (prev_len + len);
        bp.back() = breakpoints_[i + 1];
        continue;
      }
    }
    vals.push_back(values_[i]);
    bp.push_back(breakpoints_[i + 1]);
  }
  breakpoints_ = std::move(bp);
  values_ = std::move(vals);
}

double LoadProfile::at(double t) const {
  if (t <= 0.0) return values_.front();
  if (t >= horizon()) return values_.back();
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
  return values_[static_cast<std::size_t>(it - breakpoints_.begin()) - 1];
}

double LoadProfile::integral() const {
  double total = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) total += segment_length(i) * values_[i];
  return total;
}

double LoadProfile::integral(double begin, double end) const {
  double total = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double lo = std::max(begin, breakpoints_[i]);
    const double hi = std::min(end, breakpoints_[i + 1]);
    if (hi > lo) total += (hi - lo) * values_[i];
  }
  return total;
}

double LoadProfile::max_value() const { return *std::max_element(values_.begin(), values_.end()); }

double LoadProfile::min_value(double begin, double end) const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (breakpoints_[i + 1] > begin && breakpoints_[i] < end) m = std::min(m, values_[i]);
  }
  return m;
}

double LoadProfile::max_value(double begin, double end) const {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (breakpoints_[i + 1] > begin && breakpoints_[i] < end) m = std::max(m, values_[i]);
  }
  return m;
}

LoadProfile LoadProfile::combine(const LoadProfile& a, const LoadProfile& b, double sign) {
  const double horizon = a.horizon();
  if (std::abs(b.horizon() - horizon) > tolerance_at(horizon)) {
    throw InvalidArgument("load profiles have different horizons");
  }
  const double merge = kBreakpointMerge * horizon;
  std::vector<double> bp;
  bp.reserve(a.breakpoints_.size() + b.breakpoints_.size());
  std::merge(a.breakpoints_.begin(), a.breakpoints_.end() - 1, b.breakpoints_.begin(),
             b.breakpoints_.end() - 1, std::back_inserter(bp));
  std::vector<double> times;
  times.reserve(bp.size() + 1);
  for (double t : bp) {
    if (times.empty() || t - times.back() > merge) times.push_back(t);
  }
  if (horizon - times.back() <= merge && times.size() > 1) times.pop_back();
  times.push_back(horizon);

  std::vector<double> vals(times.size() - 1);
  double scale = 1.0;
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double mid = 0.5 * (times[i] + times[i + 1]);
    const double va = a.at(mid);
    const double vb = b.at(mid);
    vals[i] = va + sign * vb;
    scale = std::max({scale, std::abs(va), std::abs(vb)});
  }
  for (double& v : vals) {
    if (v < 0.0) {
      if (v < -kFeasibilityTolerance * scale) throw InvalidArgument("load profile difference is negative");
      v = 0.0;
    }
  }
  LoadProfile out(Raw{}, std::move(times), std::move(vals));
  out.canonicalize();
  return out;
}

LoadProfile LoadProfile::operator+(const LoadProfile& other) const { return combine(*this, other, 1.0); }

LoadProfile LoadProfile::operator-(const LoadProfile& other) const { return combine(*this, other, -1.0); }

LoadProfile LoadProfile::scaled(double factor) const {
  if (!(factor >= 0.0) || !finite(factor)) throw InvalidArgument("scale factor must be finite and >= 0");
  std::vector<double> vals(values_);
  for (double& v : vals) v *= factor;
  LoadProfile out(Raw{}, breakpoints_, std::move(vals));
  out.canonicalize();
  return out;
}

LoadProfile LoadProfile::refined(std::span<const double> extra) const {
  std::set<double> times(breakpoints_.begin(), breakpoints_.end());
  for (double t : extra) {
    if (t > 0.0 && t < horizon()) times.insert(t);
  }
  std::vector<double> bp(times.begin(), times.end());
  std::vector<double> vals(bp.size() - 1);
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) vals[i] = at(0.5 * (bp[i] + bp[i + 1]));
  return LoadProfile(Raw{}, std::move(bp), std::move(vals));
}

// ---------------------------------------------------------------------------
// Schedules

void check_within_horizon(const DemandTask& task, double horizon) {
  if (task.arrival() < 0.0 || task.deadline() > horizon + tolerance_at(horizon)) {
    throw InvalidArgument("task " + std::to_string(task.id()) + ": window [" +
                          std::to_string(task.arrival()) + ", " + std::to_string(task.deadline()) +
                          "] leaves horizon [0, " + std::to_string(horizon) + "]");
  }
}

void check_allocation(const DemandTask& task, const Allocation& x) {
  const double lo = task.arrival() - tolerance_at(task.arrival());
  const double hi = task.deadline() + tolerance_at(task.deadline());
  for (std::size_t i = 0; i < x.segment_count(); ++i) {
    const double v = x.values()[i];
    if (v > 1.0 + kFeasibilityTolerance) throw InfeasibleSchedule(task.id(), "allocation exceeds 1");
    if (v > kFeasibilityTolerance && (x.segment_begin(i) < lo || x.segment_end(i) > hi)) {
      throw InfeasibleSchedule(task.id(), "allocation outside [arrival, deadline]");
    }
  }
  const double mass = x.integral();
  if (std::abs(mass - task.duration()) > kFeasibilityTolerance * task.duration()) {
    throw InfeasibleSchedule(task.id(), "allocated time " + std::to_string(mass) +
                                            " differs from duration " + std::to_string(task.duration()));
  }
}

LoadProfile total_load(std::span<const DemandTask> tasks, const Schedule& schedule, double horizon) {
  LoadProfile load = LoadProfile::zero(horizon);
  std::set<TaskId> seen;
  for (const auto& task : tasks) {
    if (!seen.insert(task.id()).second) throw InvalidArgument("duplicate task id " + std::to_string(task.id()));
    check_within_horizon(task, horizon);
  }

  if (const auto* pre = std::get_if<PreemptiveSchedule>(&schedule)) {
    for (const auto& [id, x] : pre->allocations) {
      if (!seen.contains(id)) throw InfeasibleSchedule(id, "scheduled but not in task list");
    }
    for (const auto& task : tasks) {
      auto it = pre->allocations.find(task.id());
      if (it == pre->allocations.end()) throw InfeasibleSchedule(task.id(), "not scheduled");
      if (std::abs(it->second.horizon() - horizon) > tolerance_at(horizon)) {
        throw InfeasibleSchedule(task.id(), "allocation horizon mismatch");
      }
      check_allocation(task, it->second);
      load = load + it->second.scaled(task.power());
    }
    return load;
  }

  const auto& np = std::get<NonPreemptiveSchedule>(schedule);
  for (const auto& [id, start] : np.starts) {
    if (!seen.contains(id)) throw InfeasibleSchedule(id, "scheduled but not in task list");
  }
  for (const auto& task : tasks) {
    auto it = np.starts.find(task.id());
    if (it == np.starts.end()) throw InfeasibleSchedule(task.id(), "not scheduled");
    const double start = it->second;
    const double latest = task.deadline() - task.duration();
    if (start < task.arrival() - tolerance_at(task.arrival()) || start > latest + tolerance_at(latest)) {
      throw InfeasibleSchedule(task.id(), "start time " + std::to_string(start) +
                                              " outside [arrival, deadline - duration]");
    }
    load = load + LoadProfile::rectangle(horizon, start, start + task.duration(), task.power());
  }
  return load;
}

double schedule_cost(const CostFunction& cost, const LoadProfile& load) {
  double total = 0.0;
  for (std::size_t i = 0; i < load.segment_count(); ++i) {
    total += load.segment_length(i) * cost(load.values()[i]);
  }
  return total;
}

}  // namespace gridsched
