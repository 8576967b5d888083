// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gridsched/offline_nonpreemptive.hpp"
#include "gridsched/offline_preemptive.hpp"
#include "gridsched/sim_engine.hpp"
#include "gridsched/task_model.hpp"

namespace gridsched::cli {

struct OfflineSection {
  double horizon = 0.0;
  std::vector<DemandTask> tasks;
  std::optional<nonpreemptive::PackingInstance> packing;  // uniform-instance input
};

struct PolicySweep {
  std::string name;                 // Default, CR, TP, ETP
  std::vector<double> thresholds;   // ignored for Default
  std::vector<sim::SwitchingCurve::Step> curve;  // TP steps above the swept base
  bool release_one_per_completion = false;
};

struct SimulationSection {
  double horizon = 1e4;
  std::uint64_t seed = 1;
  std::uint32_t replications = 1;
  std::uint32_t batches = 20;
  double warmup = 0.1;
};

struct StochasticSection {
  stochastic::StochasticParams params;  // deadline_rate unused; see deadline_rates
  std::vector<double> deadline_rates;
  std::vector<PolicySweep> policies;
  SimulationSection simulation;
  std::vector<double> epsilons;
};

struct SolverSection {
  preemptive::BalanceConfig balance;
  std::uint64_t max_nodes = nonpreemptive::SearchBudget{}.max_nodes;
  std::optional<double> grid;
};

struct Scenario {
  std::string name;
  CostFunction cost = CostFunction::quadratic(1, 0, 0);
  std::optional<OfflineSection> offline;
  std::optional<StochasticSection> stochastic;
  SolverSection solver;
};

/// Throws InvalidArgument with a message naming the offending key.
Scenario scenario_from_json(const nlohmann::json& doc);
Scenario load_scenario(const std::filesystem::path& path);

/// Policy built from a sweep entry and one threshold value.
sim::PolicySpec make_policy(const PolicySweep& sweep, double threshold);

}  // namespace gridsched::cli
