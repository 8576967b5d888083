// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gridsched/task_model.hpp"

namespace gridsched::stochastic {

struct PowerClass {
  double power;   // Watts
  double weight;  // probability
};

/// Poisson arrivals at rate `lambda`, exponential durations of rate `service`,
/// exponential deadline timers of rate `deadline_rate`, i.i.d. power classes.
/// A zero deadline rate means timers never fire.
struct StochasticParams {
  double lambda = 1.0;
  double service = 1.0;
  double deadline_rate = 1.0;
  std::vector<PowerClass> power_dist{{1.0, 1.0}};

  void validate() const;
  double mean_power() const;
  /// Offered load in units of power: lambda * E[P] / s.
  double offered_power() const { return lambda * mean_power() / service; }
  bool unit_power() const;
};

/// Tail mass below which stationary distributions are truncated.
inline constexpr double kTailMass = 1e-12;

struct StationaryDistribution {
  std::vector<double> support;
  std::vector<double> probabilities;
  double truncation_error;  // upper bound on the mass beyond the support
};

/// Poisson(lambda/s) pmf at i, evaluated in log space.
double mm_inf_pmf(const StochasticParams& params, std::uint64_t i);

/// Truncated Poisson distribution with mean `mean`.
StationaryDistribution poisson_distribution(double mean);

/// E[C(N)] for N ~ Poisson(lambda/s); unit power only.
double default_policy_cost(const StochasticParams& params, const CostFunction& cost);

struct CompoundCost {
  double value;
  double standard_error;  // zero for the exact convolution
  bool exact;
  double quantum;         // common power quantum when exact
};

/// E[C(P)] with P = sum_k p_k N_k and independent N_k ~ Poisson(lambda w_k / s).
/// Exact on a common power quantum; Monte Carlo otherwise.
CompoundCost compound_default_cost(const StochasticParams& params, const CostFunction& cost,
                                   std::uint64_t mc_seed = 1, std::uint64_t mc_samples = 400'000);

/// sum_i sum_k q_i p_k C(i w_k) with q ~ Poisson(lambda/s). Not a model of the
/// system cost (it mixes weights into C's argument); kept only for comparison
/// against the compound model.
double power_weighted_mixture_cost(const StochasticParams& params, const CostFunction& cost);

/// C(lambda E[P] / s): no policy does better in long-run average cost.
double universal_lower_bound(const StochasticParams& params, const CostFunction& cost);

/// Thrown when lambda >= c s.
class UnstableQueue : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Stationary number-in-system of an M/M/c queue.
StationaryDistribution mmc_stationary(double lambda, double service, std::uint64_t servers);

/// Probability that all c servers are busy (Erlang C).
double erlang_c(double lambda, double service, std::uint64_t servers);

/// E[C(min(N, c))]: cost of the busy-server count of an M/M/c queue.
double mmc_power_cost(double lambda, double service, std::uint64_t servers, const CostFunction& cost);

struct AsymptoticRow {
  double epsilon;
  double threshold;       // lambda/s + epsilon
  std::uint64_t servers;  // ceil(threshold)
  double rho;
  double mmc_cost;        // NaN when unstable
  double lower_bound;
  double gap;             // mmc_cost - lower_bound
  bool stable;
};

/// Threshold sequence P0 = lambda/s + eps_n, rounded up to whole servers.
std::vector<AsymptoticRow> cr_asymptotics(const StochasticParams& params, std::span<const double> epsilons,
                                          const CostFunction& cost);

}  // namespace gridsched::stochastic
