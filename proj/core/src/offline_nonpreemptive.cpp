// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#include "gridsched/offline_nonpreemptive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace gridsched::nonpreemptive {

namespace {

double fit_slack(double capacity) { return kFeasibilityTolerance * std::max(1.0, capacity); }

std::vector<std::size_t> decreasing_order(const std::vector<double>& sizes) {
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
  return order;
}

std::size_t volume_bound(const PackingInstance& inst) {
  const double total = std::accumulate(inst.item_sizes.begin(), inst.item_sizes.end(), 0.0);
  const double bins = total / inst.capacity;
  return static_cast<std::size_t>(std::max(0.0, std::ceil(bins - kFeasibilityTolerance * std::max(1.0, bins))));
}

std::string oversize_diagnostic(const PackingInstance& inst) {
  const double slack = fit_slack(inst.capacity);
  for (std::size_t i = 0; i < inst.item_sizes.size(); ++i) {
    if (inst.item_sizes[i] > inst.capacity + slack) {
      return "item " + std::to_string(i) + " of size " + std::to_string(inst.item_sizes[i]) +
             " exceeds capacity " + std::to_string(inst.capacity);
    }
  }
  return {};
}

PackingResult make_result(std::vector<std::vector<std::size_t>> bins, double power_step) {
  PackingResult r;
  for (auto& b : bins) std::sort(b.begin(), b.end());
  r.bin_count = bins.size();
  r.peak_power = static_cast<double>(r.bin_count) * power_step;
  r.bins = std::move(bins);
  return r;
}

// Depth-first search over items in decreasing size. A bin is only opened if no
// earlier open bin has the same residual capacity, and failed (item, residual
// multiset) states are memoized.
class PackingSearch {
 public:
  PackingSearch(const PackingInstance& inst, std::size_t max_bins, std::uint64_t& nodes, std::uint64_t budget)
      : inst_(inst),
        order_(decreasing_order(inst.item_sizes)),
        max_bins_(max_bins),
        slack_(fit_slack(inst.capacity)),
        nodes_(nodes),
        budget_(budget) {
    suffix_.assign(order_.size() + 1, 0.0);
    for (std::size_t k = order_.size(); k-- > 0;) suffix_[k] = suffix_[k + 1] + inst.item_sizes[order_[k]];
  }

  std::optional<std::vector<std::vector<std::size_t>>> run() {
    residual_.clear();
    contents_.clear();
    if (search(0)) return contents_;
    return std::nullopt;
  }

 private:
  bool search(std::size_t k) {
    if (k == order_.size()) return true;
    if (++nodes_ > budget_) throw BudgetExceeded("bin packing search budget exhausted");

    const double open_room = std::accumulate(residual_.begin(), residual_.end(), 0.0);
    const double new_room = static_cast<double>(max_bins_ - residual_.size()) * inst_.capacity;
    if (suffix_[k] > open_room + new_room + slack_ * static_cast<double>(order_.size())) return false;

    std::vector<double> key(residual_);
    std::sort(key.begin(), key.end());
    key.push_back(static_cast<double>(k));
    if (failed_.contains(key)) return false;

    const std::size_t item = order_[k];
    const double size = inst_.item_sizes[item];
    std::set<double> tried;
    for (std::size_t b = 0; b < residual_.size(); ++b) {
      if (size > residual_[b] + slack_ || !tried.insert(residual_[b]).second) continue;
      residual_[b] -= size;
      contents_[b].push_back(item);
      if (search(k + 1)) return true;
      contents_[b].pop_back();
      residual_[b] += size;
    }
    if (residual_.size() < max_bins_) {
      residual_.push_back(inst_.capacity - size);
      contents_.push_back({item});
      if (search(k + 1)) return true;
      contents_.pop_back();
      residual_.pop_back();
    }
    failed_.insert(std::move(key));
    return false;
  }

  const PackingInstance& inst_;
  std::vector<std::size_t> order_;
  std::vector<double> suffix_;
  std::size_t max_bins_;
  double slack_;
  std::uint64_t& nodes_;
  std::uint64_t budget_;
  std::vector<double> residual_;
  std::vector<std::vector<std::size_t>> contents_;
  std::set<std::vector<double>> failed_;
};

}  // namespace

void PackingInstance::validate() const {
  if (!(capacity > 0.0) || !std::isfinite(capacity)) throw InvalidArgument("bin capacity must be > 0");
  if (!(power_step > 0.0) || !std::isfinite(power_step)) throw InvalidArgument("power step must be > 0");
  for (double s : item_sizes) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InvalidArgument("item sizes must be finite and > 0");
  }
}

PackingDecision decide_packing(const PackingInstance& inst, std::size_t m, const SearchBudget& budget) {
  inst.validate();
  if (m < 1) throw InvalidArgument("bin count must be >= 1");
  if (auto diag = oversize_diagnostic(inst); !diag.empty()) return {false, diag};
  if (inst.item_sizes.empty()) return {true, {}};
  if (volume_bound(inst) > m) return {false, {}};
  if (first_fit_decreasing(inst).bin_count <= m) return {true, {}};
  std::uint64_t nodes = 0;
  PackingSearch search(inst, m, nodes, budget.max_nodes);
  return {search.run().has_value(), {}};
}

PackingResult first_fit_decreasing(const PackingInstance& inst) {
  inst.validate();
  if (auto diag = oversize_diagnostic(inst); !diag.empty()) throw InvalidArgument(diag);
  const double slack = fit_slack(inst.capacity);
  std::vector<double> residual;
  std::vector<std::vector<std::size_t>> bins;
  for (std::size_t item : decreasing_order(inst.item_sizes)) {
    const double size = inst.item_sizes[item];
    std::size_t b = 0;
    while (b < residual.size() && size > residual[b] + slack) ++b;
    if (b == residual.size()) {
      residual.push_back(inst.capacity);
      bins.emplace_back();
    }
    residual[b] -= size;
    bins[b].push_back(item);
  }
  return make_result(std::move(bins), inst.power_step);
}

PackingResult exact_min_bins(const PackingInstance& inst, const SearchBudget& budget) {
  PackingResult upper = first_fit_decreasing(inst);
  const std::size_t lower = volume_bound(inst);
  std::uint64_t nodes = 0;
  try {
    for (std::size_t m = std::max<std::size_t>(lower, 1); m < upper.bin_count; ++m) {
      PackingSearch search(inst, m, nodes, budget.max_nodes);
      if (auto bins = search.run()) return make_result(std::move(*bins), inst.power_step);
    }
  } catch (const BudgetExceeded& e) {
    throw PackingBudgetExceeded(std::string(e.what()) + " after " + std::to_string(nodes) + " nodes",
                                std::move(upper));
  }
  return upper;
}

std::vector<DemandTask> uniform_tasks(const PackingInstance& inst) {
  inst.validate();
  std::vector<DemandTask> tasks;
  tasks.reserve(inst.item_sizes.size());
  for (std::size_t i = 0; i < inst.item_sizes.size(); ++i) {
    tasks.emplace_back(static_cast<TaskId>(i), 0.0, inst.item_sizes[i], inst.power_step, inst.capacity);
  }
  return tasks;
}

std::optional<PackingInstance> as_uniform_instance(std::span<const DemandTask> tasks) {
  if (tasks.empty()) return std::nullopt;
  const double deadline = tasks.front().deadline();
  const double power = tasks.front().power();
  PackingInstance inst{{}, deadline, power};
  for (const auto& t : tasks) {
    if (t.arrival() != 0.0 || std::abs(t.deadline() - deadline) > fit_slack(deadline) ||
        std::abs(t.power() - power) > kFeasibilityTolerance * power) {
      return std::nullopt;
    }
    inst.item_sizes.push_back(t.duration());
  }
  return inst;
}

PackedSchedule schedule_from_packing(const PackingInstance& inst, const PackingResult& result) {
  inst.validate();
  std::vector<bool> placed(inst.item_sizes.size(), false);
  PackedSchedule out{uniform_tasks(inst), {}, LoadProfile::zero(inst.capacity)};
  for (const auto& bin : result.bins) {
    double clock = 0.0;
    for (std::size_t item : bin) {
      if (item >= placed.size() || placed[item]) throw InvalidArgument("packing is not a partition of the items");
      placed[item] = true;
      out.schedule.starts[static_cast<TaskId>(item)] = clock;
      clock += inst.item_sizes[item];
    }
    if (clock > inst.capacity + fit_slack(inst.capacity) * static_cast<double>(bin.size())) {
      throw InvalidArgument("bin overfilled");
    }
  }
  if (std::find(placed.begin(), placed.end(), false) != placed.end()) {
    throw InvalidArgument("packing leaves items unplaced");
  }
  out.load = total_load(out.tasks, out.schedule, inst.capacity);
  return out;
}

QuantizedTasks quantize_powers(std::span<const DemandTask> tasks, double quantum) {
  if (!(quantum > 0.0) || !std::isfinite(quantum)) throw InvalidArgument("power quantum must be > 0");
  QuantizedTasks out;
  TaskId next = 0;
  for (const auto& t : tasks) {
    const double ratio = t.power() / quantum;
    const auto copies = std::llround(ratio);
    if (copies < 1 || std::abs(t.power() - static_cast<double>(copies) * quantum) > kFeasibilityTolerance * t.power()) {
      throw InvalidArgument("task " + std::to_string(t.id()) + ": power " + std::to_string(t.power()) +
                            " is not a multiple of quantum " + std::to_string(quantum));
    }
    const double unit = t.power() / static_cast<double>(copies);
    for (long long c = 0; c < copies; ++c) {
      out.tasks.emplace_back(next++, t.arrival(), t.duration(), unit, t.deadline());
      out.origin.push_back(t.id());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid-search oracle for general non-preemptive instances.

namespace {

struct Choice {
  double start;
  std::size_t first;  // elementary segment range [first, last)
  std::size_t last;
};

class StartTimeSearch {
 public:
  StartTimeSearch(std::span<const DemandTask> tasks, const CostFunction& cost, double horizon, double grid,
                  std::uint64_t budget)
      : tasks_(tasks), cost_(cost), budget_(budget) {
    std::vector<std::vector<double>> starts(tasks.size());
    std::vector<double> times{0.0, horizon};
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const auto& t = tasks[i];
      const double latest = t.deadline() - t.duration();
      const double eps = kFeasibilityTolerance * grid;
      for (std::uint64_t k = 0;; ++k) {
        const double s = t.arrival() + static_cast<double>(k) * grid;
        if (s > latest + eps) break;
        starts[i].push_back(std::min(s, latest));
      }
      if (latest - starts[i].back() > eps) starts[i].push_back(latest);
      for (double s : starts[i]) {
        times.push_back(s);
        times.push_back(std::min(s + t.duration(), horizon));
      }
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    lengths_.resize(times.size() - 1);
    for (std::size_t k = 0; k + 1 < times.size(); ++k) lengths_[k] = times[k + 1] - times[k];
    load_.assign(lengths_.size(), 0.0);

    auto index_of = [&](double t) {
      return static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t) - times.begin());
    };
    choices_.resize(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      for (double s : starts[i]) {
        choices_[i].push_back({s, index_of(s), index_of(std::min(s + tasks[i].duration(), horizon))});
      }
    }
    base_cost_ = 0.0;
    for (double len : lengths_) base_cost_ += len * cost_(0.0);
    picked_.assign(tasks.size(), 0);
  }

  void run() { descend(0, base_cost_); }

  bool found() const { return !best_pick_.empty(); }
  const std::vector<std::size_t>& best_pick() const { return best_pick_; }
  const std::vector<std::vector<Choice>>& choices() const { return choices_; }
  std::uint64_t nodes() const { return nodes_; }

 private:
  double delta(std::size_t task, const Choice& c) const {
    const double p = tasks_[task].power();
    double d = 0.0;
    for (std::size_t k = c.first; k < c.last; ++k) d += lengths_[k] * (cost_(load_[k] + p) - cost_(load_[k]));
    return d;
  }

  void apply(std::size_t task, const Choice& c, double sign) {
    const double p = sign * tasks_[task].power();
    for (std::size_t k = c.first; k < c.last; ++k) load_[k] = std::max(0.0, load_[k] + p);
  }

  double margin() const { return std::isfinite(best_) ? 1e-12 * std::max(1.0, std::abs(best_)) : 0.0; }

  void descend(std::size_t i, double cost) {
    if (i == tasks_.size()) {
      if (cost < best_ - margin()) {
        best_ = cost;
        best_pick_ = picked_;
      }
      return;
    }
    // Convexity: each remaining task adds at least its cheapest increment on
    // the current partial load.
    double bound = cost;
    for (std::size_t j = i + 1; j < tasks_.size(); ++j) {
      double cheapest = std::numeric_limits<double>::infinity();
      for (const auto& c : choices_[j]) cheapest = std::min(cheapest, delta(j, c));
      bound += cheapest;
    }
    for (std::size_t ci = 0; ci < choices_[i].size(); ++ci) {
      if (++nodes_ > budget_) throw BudgetExceeded("start-time search budget exhausted");
      const auto& c = choices_[i][ci];
      const double d = delta(i, c);
      // `bound` already counts the cheapest choice of task i+1.. ; add this task's own increment.
      if (bound + d >= best_ - margin()) continue;
      apply(i, c, 1.0);
      picked_[i] = ci;
      descend(i + 1, cost + d);
      apply(i, c, -1.0);
    }
  }

  std::span<const DemandTask> tasks_;
  const CostFunction& cost_;
  std::uint64_t budget_;
  std::vector<double> lengths_;
  std::vector<double> load_;
  std::vector<std::vector<Choice>> choices_;
  std::vector<std::size_t> picked_;
  std::vector<std::size_t> best_pick_;
  double base_cost_ = 0.0;
  double best_ = std::numeric_limits<double>::infinity();
  std::uint64_t nodes_ = 0;
};

NonPreemptiveSolution materialize(std::span<const DemandTask> tasks, const CostFunction& cost, double horizon,
                                  const StartTimeSearch& search) {
  NonPreemptiveSolution sol{{}, LoadProfile::zero(horizon), 0.0, search.nodes()};
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    sol.schedule.starts[tasks[i].id()] = search.choices()[i][search.best_pick()[i]].start;
  }
  sol.load = total_load(tasks, sol.schedule, horizon);
  sol.objective = schedule_cost(cost, sol.load);
  return sol;
}

}  // namespace

NonPreemptiveSolution exact_nonpreemptive_min_cost(std::span<const DemandTask> tasks, const CostFunction& cost,
                                                   double horizon, double grid_step, const SearchBudget& budget) {
  if (!(grid_step > 0.0) || !std::isfinite(grid_step)) throw InvalidArgument("grid step must be > 0");
  if (!(horizon > 0.0)) throw InvalidArgument("horizon must be > 0");
  std::set<TaskId> ids;
  for (const auto& t : tasks) {
    check_within_horizon(t, horizon);
    if (!ids.insert(t.id()).second) throw InvalidArgument("duplicate task id " + std::to_string(t.id()));
  }
  if (tasks.empty()) {
    const auto load = LoadProfile::zero(horizon);
    return {{}, load, schedule_cost(cost, load), 0};
  }

  StartTimeSearch search(tasks, cost, horizon, grid_step, budget.max_nodes);
  try {
    search.run();
  } catch (const BudgetExceeded& e) {
    std::optional<NonPreemptiveSolution> best;
    if (search.found()) best = materialize(tasks, cost, horizon, search);
    throw ScheduleBudgetExceeded(e.what(), std::move(best));
  }
  return materialize(tasks, cost, horizon, search);
}

}  // namespace gridsched::nonpreemptive
