// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>

#include "gridsched/sim_engine.hpp"

namespace gridsched::sim {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::int64_t as_count(double power) {
  const auto n = std::llround(power);
  if (std::abs(power - static_cast<double>(n)) > 1e-9) {
    throw InvalidArgument("rate audit needs unit powers (integer P)");
  }
  return n;
}

}  // namespace

std::map<std::pair<int, int>, double> expected_rates(const PolicySpec& policy, const StochasticParams& params,
                                                     std::int64_t power, std::int64_t queued) {
  const double lambda = params.lambda;
  const double served = static_cast<double>(power) * params.service;
  const double expire = static_cast<double>(queued) * params.deadline_rate;
  std::map<std::pair<int, int>, double> rates;
  auto add = [&](int dp, int dq, double rate) { rates[{dp, dq}] += rate; };

  std::visit(
      Overloaded{
          [&](const DefaultPolicy&) {
            add(+1, 0, lambda);
            add(-1, 0, served);
          },
          [&](const ThresholdPostponement& p) {
            const double u = static_cast<double>(power) < p.curve.at(static_cast<std::uint64_t>(queued)) ? 1.0 : 0.0;
            add(+1, 0, lambda * u);
            add(0, +1, lambda * (1.0 - u));
            add(-1, 0, served);
            add(+1, -1, expire);
          },
          [&](const EnhancedThresholdPostponement& p) {
            const double u = static_cast<double>(power) <= p.threshold ? 1.0 : 0.0;
            // A completion can only hand over its slot when something is queued.
            const double handover = queued > 0 ? u : 0.0;
            add(+1, 0, lambda * u);
            add(0, +1, lambda * (1.0 - u));
            add(+1, -1, expire);
            add(-1, 0, served * (1.0 - handover));
            add(0, -1, served * handover);
          },
          [&](const ControlledRelease& p) {
            const double u = static_cast<double>(power) < p.threshold ? 1.0 : 0.0;
            add(+1, 0, lambda * u);
            add(0, +1, lambda * (1.0 - u));
            add(+1, -1, expire);
            // After a completion, release from the queue until P reaches the threshold.
            const double after = static_cast<double>(power - 1);
            std::int64_t released = 0;
            if (after < p.threshold) {
              released = p.release_one_per_completion
                             ? 1
                             : static_cast<std::int64_t>(std::ceil(p.threshold - after));
              released = std::min(released, queued);
            }
            add(static_cast<int>(released - 1), static_cast<int>(-released), served);
          }},
      policy);

  for (auto it = rates.begin(); it != rates.end();) {
    if (it->first == std::pair{0, 0} || it->second == 0.0) {
      it = rates.erase(it);
    } else {
      ++it;
    }
  }
  return rates;
}

RateAuditReport ctmc_rate_audit(std::span<const TraceRecord> trace, const PolicySpec& policy,
                                const StochasticParams& params, std::uint64_t min_visits, double z_limit) {
  struct Tally {
    std::uint64_t visits = 0;
    double exposure = 0.0;
    std::map<std::pair<int, int>, std::uint64_t> moves;
  };
  std::map<std::pair<std::int64_t, std::int64_t>, Tally> states;

  RateAuditReport report;
  if (trace.size() < 2) return report;

  for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
    const auto& from = trace[i];
    const auto& to = trace[i + 1];
    const std::pair key{as_count(from.power), static_cast<std::int64_t>(from.queued)};
    auto& tally = states[key];
    tally.exposure += to.time - from.time;
    ++tally.visits;
    if (to.kind == EventKind::End) continue;
    const auto dp = static_cast<int>(as_count(to.power) - key.first);
    const auto dq = static_cast<int>(static_cast<std::int64_t>(to.queued) - key.second);
    ++tally.moves[{dp, dq}];
  }

  for (const auto& [state, tally] : states) {
    if (tally.visits < min_visits || tally.exposure <= 0.0) {
      report.excluded.push_back(state);
      continue;
    }
    StateAudit audit{state.first, state.second, tally.visits, tally.exposure, {}};
    auto expected = expected_rates(policy, params, state.first, state.second);
    // Observed moves the rate table does not list are audited against rate 0.
    for (const auto& [move, count] : tally.moves) expected.try_emplace(move, 0.0);
    for (const auto& [move, rate] : expected) {
      RateCheck check{};
      check.dp = move.first;
      check.dq = move.second;
      check.expected_rate = rate;
      auto it = tally.moves.find(move);
      check.count = it == tally.moves.end() ? 0 : it->second;
      check.observed_rate = static_cast<double>(check.count) / tally.exposure;
      if (rate > 0.0) {
        check.standard_error = std::sqrt(rate / tally.exposure);
        check.z = (check.observed_rate - rate) / check.standard_error;
        check.deviates = std::abs(check.z) > z_limit;
      } else {
        check.standard_error = 0.0;
        check.z = check.count == 0 ? 0.0 : std::numeric_limits<double>::infinity();
        check.deviates = check.count > 0;
      }
      ++report.pairs;
      if (check.deviates) ++report.deviations;
      audit.checks.push_back(check);
    }
    report.audited.push_back(std::move(audit));
  }
  return report;
}

}  // namespace gridsched::sim
