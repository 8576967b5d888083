// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <iostream>

#include "cli/commands.hpp"
#include "gridsched/task_model.hpp"

using namespace gridsched::cli;

int main(int argc, char** argv) {
  CLI::App app{"gridsched: demand-load scheduling and threshold-policy simulation"};
  app.require_subcommand(1);

  Options opt;
  std::uint64_t seed = 0;
  std::string policy;
  double threshold = 0.0;
  double grid = 0.0;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", opt.scenario, "Scenario JSON file")->required();
    cmd->add_option("--out", opt.out, "Output file (default: standard output; .json selects JSON)");
    cmd->add_option("--seed", seed, "Override the scenario seed");
  };
  auto* preemptive = app.add_subcommand("offline-preemptive", "Fractional load balancing by water filling");
  auto* nonpreemptive = app.add_subcommand("offline-nonpreemptive", "Bin packing or exact start-time search");
  auto* analyze = app.add_subcommand("analyze", "Analytic queueing quantities (CSV)");
  auto* simulate = app.add_subcommand("simulate", "Simulate every policy x threshold x d cell (CSV)");
  auto* compare = app.add_subcommand("compare", "Best threshold per policy and deadline rate (CSV)");
  for (auto* cmd : {preemptive, nonpreemptive, analyze, simulate, compare}) common(cmd);

  auto* exact = nonpreemptive->add_flag("--exact", "Exact branch and bound (default)");
  nonpreemptive->add_flag("--ffd", opt.ffd, "First-fit decreasing")->excludes(exact);
  nonpreemptive->add_option("--grid", grid, "Start-time grid step; enables the exact grid search")
      ->check(CLI::PositiveNumber);
  for (auto* cmd : {simulate, compare}) {
    cmd->add_option("--policy", policy, "Only this policy (Default, CR, TP, ETP)");
    cmd->add_option("--threshold", threshold, "Single threshold instead of the scenario sweep");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(kInputError);
  }

  for (auto* cmd : {preemptive, nonpreemptive, analyze, simulate, compare}) {
    if (cmd->count("--seed")) opt.seed = seed;
  }
  if (nonpreemptive->count("--grid")) opt.grid = grid;
  for (auto* cmd : {simulate, compare}) {
    if (cmd->count("--policy")) opt.policy = policy;
    if (cmd->count("--threshold")) opt.threshold = threshold;
  }
  try {
    opt.budget = budget_from_env();
  } catch (const gridsched::InvalidArgument& e) {
    std::cerr << "gridsched: " << e.what() << "\n";
    return kInputError;
  }

  if (preemptive->parsed()) return cmd_offline_preemptive(opt, std::cout, std::cerr);
  if (nonpreemptive->parsed()) return cmd_offline_nonpreemptive(opt, std::cout, std::cerr);
  if (analyze->parsed()) return cmd_analyze(opt, std::cout, std::cerr);
  if (simulate->parsed()) return cmd_simulate(opt, std::cout, std::cerr);
  return cmd_compare(opt, std::cout, std::cerr);
}
