// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "gridsched/stochastic_analysis.hpp"
#include "gridsched/task_model.hpp"

namespace gridsched::sim {

using stochastic::StochasticParams;

/// Activate every request on arrival.
struct DefaultPolicy {
  bool operator==(const DefaultPolicy&) const = default;
};

/// Controlled release: activate if P < threshold, else queue; queued requests
/// start on deadline expiry or when a completion takes P below the threshold.
struct ControlledRelease {
  double threshold = 0.0;
  /// Release at most one queued request per completion instead of filling up
  /// to the threshold.
  bool release_one_per_completion = false;
  bool operator==(const ControlledRelease&) const = default;
};

/// Nondecreasing step function Q -> P_b(Q): `base` for Q below the first
/// step, then the threshold of the last step whose queue length is <= Q.
class SwitchingCurve {
 public:
  struct Step {
    std::uint64_t queue_length;
    double threshold;
    bool operator==(const Step&) const = default;
  };

  explicit SwitchingCurve(double base, std::vector<Step> steps = {});

  double at(std::uint64_t queue_length) const;
  double base() const noexcept { return base_; }
  const std::vector<Step>& steps() const noexcept { return steps_; }
  bool constant() const noexcept { return steps_.empty(); }

  bool operator==(const SwitchingCurve&) const = default;

 private:
  double base_;
  std::vector<Step> steps_;
};

/// Threshold postponement: activate on arrival if P < P_b(Q), otherwise wait
/// for the deadline timer. Completions never release queued requests.
struct ThresholdPostponement {
  SwitchingCurve curve{0.0};
  bool operator==(const ThresholdPostponement&) const = default;
};

/// Enhanced threshold postponement: activate on arrival if P <= threshold;
/// while P <= threshold each completion hands its slot to one queued request.
struct EnhancedThresholdPostponement {
  double threshold = 0.0;
  bool operator==(const EnhancedThresholdPostponement&) const = default;
};

using PolicySpec =
    std::variant<DefaultPolicy, ControlledRelease, ThresholdPostponement, EnhancedThresholdPostponement>;

void validate(const PolicySpec& policy);
/// "Default", "CR", "TP" or "ETP".
std::string policy_name(const PolicySpec& policy);
/// Base threshold of the policy; 0 for Default.
double policy_threshold(const PolicySpec& policy);

enum class Decision { ActivateNow, Postpone };

/// Arrival rule evaluated on the state seen by the arriving request.
Decision policy_on_arrival(const PolicySpec& policy, double power, std::uint64_t queued);

/// Number of requests taken from the front of the FIFO queue after a
/// completion moved the total power from `power_before` to `power_after`.
/// `fifo_powers` lists the powers of (a prefix of) the queue, front first.
std::size_t policy_on_completion(const PolicySpec& policy, double power_before, double power_after,
                                 std::span<const double> fifo_powers);

/// Deadline expiry always activates the request.
inline Decision policy_on_deadline(const PolicySpec&) { return Decision::ActivateNow; }

struct SimConfig {
  StochasticParams params;
  PolicySpec policy = DefaultPolicy{};
  CostFunction cost = CostFunction::quadratic(1.0, 0.0, 0.0);
  double horizon = 1e4;
  double warmup_fraction = 0.1;
  std::uint64_t seed = 1;
  std::uint32_t batches = 20;
  std::uint32_t replications = 1;
  /// Keep an event trace of replication 0.
  bool record_trace = false;

  void validate() const;
};

enum class EventKind : std::uint8_t {
  Start,
  ArrivalActivated,
  ArrivalPostponed,
  Completion,         // completion, possibly with queued releases at the same instant
  DeadlineActivation,
  End,
};

std::string_view to_string(EventKind kind);

/// State right after an event.
struct TraceRecord {
  double time;
  EventKind kind;
  double power;
  std::uint64_t queued;
  bool operator==(const TraceRecord&) const = default;
};

/// One line per record: "<time> <event> <P> <Q>", time and P with 17
/// significant digits, preceded by the header line "# time event P Q".
void write_trace(std::ostream& out, std::span<const TraceRecord> trace);
std::vector<TraceRecord> read_trace(std::istream& in);

struct Counters {
  std::uint64_t arrivals = 0;
  std::uint64_t activations = 0;
  std::uint64_t completions = 0;
  std::uint64_t in_flight_end = 0;       // active + queued at the horizon
  std::uint64_t postponed = 0;
  std::uint64_t deadline_activations = 0;
  std::uint64_t threshold_releases = 0;  // queued requests started by a completion
  // Post-warmup counts feeding the reported fractions and rates.
  std::uint64_t measured_arrivals = 0;
  std::uint64_t measured_postponed = 0;
  std::uint64_t measured_deadline_activations = 0;
};

struct ReplicationResult {
  double avg_cost = 0.0;
  double avg_power = 0.0;
  double peak_power = 0.0;
  std::vector<double> batch_costs;
  std::vector<double> batch_powers;
  /// Post-warmup time spent at each total power value.
  std::map<double, double> occupancy_time;
  Counters counters;
  std::vector<TraceRecord> trace;
};

struct SimResult {
  double avg_cost = 0.0;
  double ci_halfwidth = 0.0;        // 95% batch means, pooled over replications
  double avg_power = 0.0;
  double power_ci_halfwidth = 0.0;
  double peak_power = 0.0;
  double postponed_fraction = 0.0;
  double deadline_activation_rate = 0.0;  // per unit time
  /// Fraction of post-warmup time at each total power value, all replications.
  std::vector<std::pair<double, double>> occupancy;
  Counters counters;  // summed over replications
  std::vector<ReplicationResult> replicas;
};

ReplicationResult run_replication(const SimConfig& config, std::uint32_t index);

/// Runs every replication and pools them. Deterministic given the config.
SimResult run(const SimConfig& config);

/// 97.5% Student-t quantile times the standard error of `samples`.
double ci95_halfwidth(std::span<const double> samples);

// ---------------------------------------------------------------------------
// Transition-rate audit of unit-power traces.

struct RateCheck {
  int dp;
  int dq;
  double expected_rate;
  std::uint64_t count;
  double observed_rate;
  double standard_error;  // sqrt(expected / exposure)
  double z;
  bool deviates;
};

struct StateAudit {
  std::int64_t power;
  std::int64_t queued;
  std::uint64_t visits;
  double exposure;  // total sojourn time
  std::vector<RateCheck> checks;
};

struct RateAuditReport {
  std::vector<StateAudit> audited;
  std::vector<std::pair<std::int64_t, std::int64_t>> excluded;  // visited, but too rarely
  std::size_t pairs = 0;
  std::size_t deviations = 0;
  double fraction_within() const {
    return pairs == 0 ? 1.0 : 1.0 - static_cast<double>(deviations) / static_cast<double>(pairs);
  }
};

/// Out-of-state transition rates of the (P, Q) chain, keyed by (dP, dQ).
std::map<std::pair<int, int>, double> expected_rates(const PolicySpec& policy, const StochasticParams& params,
                                                     std::int64_t power, std::int64_t queued);

/// Compares empirical exit rates of every state visited at least `min_visits`
/// times with `expected_rates`, flagging deviations beyond `z_limit` standard errors.
RateAuditReport ctmc_rate_audit(std::span<const TraceRecord> trace, const PolicySpec& policy,
                                const StochasticParams& params, std::uint64_t min_visits = 500,
                                double z_limit = 3.0);

}  // namespace gridsched::sim
