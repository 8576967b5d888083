// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#include "gridsched/sim_engine.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>

#include "gridsched/rng.hpp"

namespace gridsched::sim {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

enum StreamRole : std::uint64_t { kArrivals = 1, kDurations = 2, kDeadlines = 3, kPowers = 4 };

void check_threshold(double t, const char* what) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument(std::string(what) + " threshold must be finite and >= 0");
}

}  // namespace

SwitchingCurve::SwitchingCurve(double base, std::vector<Step> steps) : base_(base), steps_(std::move(steps)) {
  check_threshold(base_, "switching curve");
  double prev = base_;
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    check_threshold(steps_[i].threshold, "switching curve");
    if (i > 0 && steps_[i].queue_length <= steps_[i - 1].queue_length) {
      throw InvalidArgument("switching curve steps must have strictly increasing queue lengths");
    }
    if (steps_[i].threshold < prev) throw InvalidArgument("switching curve must be nondecreasing in Q");
    prev = steps_[i].threshold;
  }
}

double SwitchingCurve::at(std::uint64_t queue_length) const {
  double t = base_;
  for (const auto& s : steps_) {
    if (s.queue_length > queue_length) break;
    t = s.threshold;
  }
  return t;
}

void validate(const PolicySpec& policy) {
  std::visit(Overloaded{[](const DefaultPolicy&) {},
                        [](const ControlledRelease& p) { check_threshold(p.threshold, "CR"); },
                        [](const ThresholdPostponement&) {},  // curve validated on construction
                        [](const EnhancedThresholdPostponement& p) { check_threshold(p.threshold, "ETP"); }},
             policy);
}

std::string policy_name(const PolicySpec& policy) {
  return std::visit(Overloaded{[](const DefaultPolicy&) { return std::string("Default"); },
                               [](const ControlledRelease&) { return std::string("CR"); },
                               [](const ThresholdPostponement&) { return std::string("TP"); },
                               [](const EnhancedThresholdPostponement&) { return std::string("ETP"); }},
                    policy);
}

double policy_threshold(const PolicySpec& policy) {
  return std::visit(Overloaded{[](const DefaultPolicy&) { return 0.0; },
                               [](const ControlledRelease& p) { return p.threshold; },
                               [](const ThresholdPostponement& p) { return p.curve.base(); },
                               [](const EnhancedThresholdPostponement& p) { return p.threshold; }},
                    policy);
}

Decision policy_on_arrival(const PolicySpec& policy, double power, std::uint64_t queued) {
  const bool activate =
      std::visit(Overloaded{[](const DefaultPolicy&) { return true; },
                            [&](const ControlledRelease& p) { return power < p.threshold; },
                            [&](const ThresholdPostponement& p) { return power < p.curve.at(queued); },
                            [&](const EnhancedThresholdPostponement& p) { return power <= p.threshold; }},
                 policy);
  return activate ? Decision::ActivateNow : Decision::Postpone;
}

std::size_t policy_on_completion(const PolicySpec& policy, double power_before, double power_after,
                                 std::span<const double> fifo_powers) {
  if (fifo_powers.empty()) return 0;
  return std::visit(
      Overloaded{[](const DefaultPolicy&) -> std::size_t { return 0; },
                 [](const ThresholdPostponement&) -> std::size_t { return 0; },
                 [&](const ControlledRelease& p) -> std::size_t {
                   std::size_t n = 0;
                   double power = power_after;
                   while (n < fifo_powers.size() && power < p.threshold) {
                     power += fifo_powers[n++];
                     if (p.release_one_per_completion) break;
                   }
                   return n;
                 },
                 // Decided on the state before the completion, as in the chain's u(P, Q).
                 [&](const EnhancedThresholdPostponement& p) -> std::size_t {
                   return power_before <= p.threshold ? 1 : 0;
                 }},
      policy);
}

void SimConfig::validate() const {
  params.validate();
  sim::validate(policy);
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("horizon must be finite and > 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw InvalidArgument("warmup fraction must be in [0, 1)");
  if (batches < 10) throw InvalidArgument("at least 10 batches are required");
  if (replications < 1) throw InvalidArgument("at least one replication is required");
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Start: return "start";
    case EventKind::ArrivalActivated: return "arrive_activate";
    case EventKind::ArrivalPostponed: return "arrive_postpone";
    case EventKind::Completion: return "complete";
    case EventKind::DeadlineActivation: return "deadline";
    case EventKind::End: return "end";
  }
  return "?";
}

void write_trace(std::ostream& out, std::span<const TraceRecord> trace) {
  out << "# time event P Q\n";
  char buf[128];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%.17g %s %.17g %llu\n", r.time, std::string(to_string(r.kind)).c_str(), r.power,
                  static_cast<unsigned long long>(r.queued));
    out << buf;
  }
}

std::vector<TraceRecord> read_trace(std::istream& in) {
  static constexpr EventKind kinds[] = {EventKind::Start,      EventKind::ArrivalActivated,
                                        EventKind::ArrivalPostponed, EventKind::Completion,
                                        EventKind::DeadlineActivation, EventKind::End};
  std::vector<TraceRecord> trace;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    TraceRecord r{};
    std::string kind;
    if (!(fields >> r.time >> kind >> r.power >> r.queued)) throw InvalidArgument("malformed trace line: " + line);
    auto it = std::find_if(std::begin(kinds), std::end(kinds), [&](EventKind k) { return to_string(k) == kind; });
    if (it == std::end(kinds)) throw InvalidArgument("unknown trace event: " + kind);
    r.kind = *it;
    trace.push_back(r);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Event-calendar simulation of one replication.

namespace {

class Replication {
 public:
  Replication(const SimConfig& config, std::uint32_t index)
      : cfg_(config),
        arrivals_(CounterRng::stream(config.seed, index, kArrivals)),
        durations_(CounterRng::stream(config.seed, index, kDurations)),
        deadlines_(CounterRng::stream(config.seed, index, kDeadlines)),
        powers_(CounterRng::stream(config.seed, index, kPowers)),
        class_power_(config.params.power_dist.size()),
        active_count_(config.params.power_dist.size(), 0),
        warm_(config.warmup_fraction * config.horizon),
        batch_len_((config.horizon - warm_) / config.batches) {
    double acc = 0.0;
    for (std::size_t k = 0; k < class_power_.size(); ++k) {
      class_power_[k] = config.params.power_dist[k].power;
      acc += config.params.power_dist[k].weight;
      cumulative_.push_back(acc);
    }
    min_power_ = *std::min_element(class_power_.begin(), class_power_.end());
    out_.batch_costs.assign(config.batches, 0.0);
    out_.batch_powers.assign(config.batches, 0.0);
    current_cost_ = cfg_.cost(0.0);
  }

  ReplicationResult run() {
    const double horizon = cfg_.horizon;
    const double lambda = cfg_.params.lambda;
    double next_arrival = arrivals_.exponential(lambda);
    record(EventKind::Start);

    for (;;) {
      const double t_done = active_.empty() ? kInf : active_.top().time;
      const double t_expire = timers_.empty() ? kInf : timers_.begin()->first;
      const double next = std::min({t_done, t_expire, next_arrival});
      if (next > horizon) {
        integrate(clock_, horizon);
        clock_ = horizon;
        break;
      }
      integrate(clock_, next);
      clock_ = next;
      // Ties: completion, then deadline, then arrival.
      if (t_done <= t_expire && t_done <= next_arrival) {
        on_completion();
      } else if (t_expire <= next_arrival) {
        on_deadline();
      } else {
        on_arrival();
        next_arrival = clock_ + arrivals_.exponential(lambda);
      }
    }
    record(EventKind::End);

    out_.counters.in_flight_end = active_.size() + queue_.size();
    const double span = horizon - warm_;
    double cost = 0.0;
    double power = 0.0;
    for (std::uint32_t b = 0; b < cfg_.batches; ++b) {
      cost += out_.batch_costs[b];
      power += out_.batch_powers[b];
      out_.batch_costs[b] /= batch_len_;
      out_.batch_powers[b] /= batch_len_;
    }
    out_.avg_cost = cost / span;
    out_.avg_power = power / span;
    return std::move(out_);
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  struct Active {
    double time;
    std::size_t power_class;
    bool operator>(const Active& o) const { return time > o.time; }
  };
  struct Queued {
    std::size_t power_class;
    double duration;
    double expiry;
  };

  double total_power() const {
    double p = 0.0;
    for (std::size_t k = 0; k < class_power_.size(); ++k) p += static_cast<double>(active_count_[k]) * class_power_[k];
    return p;
  }

  void refresh_power() {
    power_ = total_power();
    current_cost_ = cfg_.cost(power_);
    out_.peak_power = std::max(out_.peak_power, power_);
  }

  void record(EventKind kind) {
    if (cfg_.record_trace) out_.trace.push_back({clock_, kind, power_, queue_.size()});
  }

  bool measuring() const { return clock_ >= warm_; }

  void integrate(double from, double to) {
    double lo = std::max(from, warm_);
    if (to <= lo) return;
    out_.occupancy_time[power_] += to - lo;
    auto b = static_cast<std::uint32_t>(std::min<double>((lo - warm_) / batch_len_, cfg_.batches - 1));
    while (lo < to) {
      const double end = b + 1 == cfg_.batches ? to : std::min(to, warm_ + (b + 1) * batch_len_);
      out_.batch_costs[b] += (end - lo) * current_cost_;
      out_.batch_powers[b] += (end - lo) * power_;
      lo = end;
      if (b + 1 < cfg_.batches) ++b;
    }
  }

  void activate(std::size_t power_class, double duration) {
    active_.push({clock_ + duration, power_class});
    ++active_count_[power_class];
    ++out_.counters.activations;
    refresh_power();
  }

  std::size_t sample_class() {
    if (cumulative_.size() == 1) return 0;
    const double u = powers_.uniform() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
  }

  void on_arrival() {
    const std::size_t k = sample_class();
    const double duration = durations_.exponential(cfg_.params.service);
    const double timer = deadlines_.exponential(cfg_.params.deadline_rate);
    ++out_.counters.arrivals;
    if (measuring()) ++out_.counters.measured_arrivals;
    if (policy_on_arrival(cfg_.policy, power_, queue_.size()) == Decision::ActivateNow) {
      activate(k, duration);
      record(EventKind::ArrivalActivated);
      return;
    }
    const std::uint64_t seq = next_seq_++;
    queue_.emplace(seq, Queued{k, duration, clock_ + timer});
    if (std::isfinite(timer)) timers_.emplace(clock_ + timer, seq);
    ++out_.counters.postponed;
    if (measuring()) ++out_.counters.measured_postponed;
    record(EventKind::ArrivalPostponed);
  }

  void on_completion() {
    const Active done = active_.top();
    active_.pop();
    const double before = power_;
    --active_count_[done.power_class];
    ++out_.counters.completions;
    refresh_power();

    std::size_t cap = 0;
    if (!queue_.empty()) {
      if (const auto* cr = std::get_if<ControlledRelease>(&cfg_.policy)) {
        const double room = std::max(0.0, cr->threshold - power_);
        cap = static_cast<std::size_t>(std::ceil(room / min_power_)) + 1;
      } else if (std::holds_alternative<EnhancedThresholdPostponement>(cfg_.policy)) {
        cap = 1;
      }
    }
    fifo_prefix_.clear();
    for (auto it = queue_.begin(); it != queue_.end() && fifo_prefix_.size() < cap; ++it) {
      fifo_prefix_.push_back(class_power_[it->second.power_class]);
    }
    const std::size_t release = policy_on_completion(cfg_.policy, before, power_, fifo_prefix_);
    for (std::size_t i = 0; i < release; ++i) {
      auto it = queue_.begin();
      const Queued q = it->second;
      if (std::isfinite(q.expiry)) timers_.erase({q.expiry, it->first});
      queue_.erase(it);
      ++out_.counters.threshold_releases;
      activate(q.power_class, q.duration);
    }
    record(EventKind::Completion);
  }

  void on_deadline() {
    const auto [expiry, seq] = *timers_.begin();
    timers_.erase(timers_.begin());
    auto it = queue_.find(seq);
    const Queued q = it->second;
    queue_.erase(it);
    ++out_.counters.deadline_activations;
    if (measuring()) ++out_.counters.measured_deadline_activations;
    activate(q.power_class, q.duration);
    record(EventKind::DeadlineActivation);
  }

  const SimConfig& cfg_;
  CounterRng arrivals_;
  CounterRng durations_;
  CounterRng deadlines_;
  CounterRng powers_;
  std::vector<double> class_power_;
  std::vector<double> cumulative_;
  std::vector<std::uint64_t> active_count_;
  double min_power_ = 1.0;
  double warm_;
  double batch_len_;

  double clock_ = 0.0;
  double power_ = 0.0;
  double current_cost_ = 0.0;
  std::priority_queue<Active, std::vector<Active>, std::greater<>> active_;
  std::map<std::uint64_t, Queued> queue_;  // FIFO by arrival sequence
  std::set<std::pair<double, std::uint64_t>> timers_;
  std::uint64_t next_seq_ = 0;
  std::vector<double> fifo_prefix_;
  ReplicationResult out_;
};

}  // namespace

ReplicationResult run_replication(const SimConfig& config, std::uint32_t index) {
  config.validate();
  return Replication(config, index).run();
}

double ci95_halfwidth(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) return std::numeric_limits<double>::infinity();
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  return boost::math::quantile(dist, 0.975) * sd / std::sqrt(static_cast<double>(n));
}

SimResult run(const SimConfig& config) {
  config.validate();
  SimResult result;
  SimConfig rep_config = config;
  for (std::uint32_t r = 0; r < config.replications; ++r) {
    rep_config.record_trace = config.record_trace && r == 0;
    result.replicas.push_back(Replication(rep_config, r).run());
  }

  std::vector<double> batch_costs;
  std::vector<double> batch_powers;
  std::map<double, double> occupancy;
  double occupied = 0.0;
  auto& c = result.counters;
  for (const auto& rep : result.replicas) {
    batch_costs.insert(batch_costs.end(), rep.batch_costs.begin(), rep.batch_costs.end());
    batch_powers.insert(batch_powers.end(), rep.batch_powers.begin(), rep.batch_powers.end());
    result.avg_cost += rep.avg_cost;
    result.avg_power += rep.avg_power;
    result.peak_power = std::max(result.peak_power, rep.peak_power);
    for (const auto& [p, t] : rep.occupancy_time) {
      occupancy[p] += t;
      occupied += t;
    }
    const auto& rc = rep.counters;
    c.arrivals += rc.arrivals;
    c.activations += rc.activations;
    c.completions += rc.completions;
    c.in_flight_end += rc.in_flight_end;
    c.postponed += rc.postponed;
    c.deadline_activations += rc.deadline_activations;
    c.threshold_releases += rc.threshold_releases;
    c.measured_arrivals += rc.measured_arrivals;
    c.measured_postponed += rc.measured_postponed;
    c.measured_deadline_activations += rc.measured_deadline_activations;
  }
  const auto reps = static_cast<double>(config.replications);
  result.avg_cost /= reps;
  result.avg_power /= reps;
  result.ci_halfwidth = ci95_halfwidth(batch_costs);
  result.power_ci_halfwidth = ci95_halfwidth(batch_powers);
  result.postponed_fraction =
      c.measured_arrivals == 0 ? 0.0
                               : static_cast<double>(c.measured_postponed) / static_cast<double>(c.measured_arrivals);
  const double measured_time = reps * config.horizon * (1.0 - config.warmup_fraction);
  result.deadline_activation_rate = static_cast<double>(c.measured_deadline_activations) / measured_time;
  for (const auto& [p, t] : occupancy) result.occupancy.emplace_back(p, t / occupied);
  return result;
}

}  // namespace gridsched::sim
