// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gridsched::cli {

enum ExitCode : int {
  kSuccess = 0,
  kInputError = 1,
  kNotConverged = 2,
  kBudgetExceeded = 3,
};

struct Options {
  std::string scenario;
  std::string out;  // empty: standard output; ".json" suffix selects JSON
  std::optional<std::uint64_t> seed;
  std::optional<std::string> policy;
  std::optional<double> threshold;
  bool ffd = false;  // offline-nonpreemptive: heuristic packing instead of exact
  std::optional<double> grid;
  std::optional<std::uint64_t> budget;  // GRIDSCHED_BUDGET
};

/// Column names of the tabular commands, in output order.
const std::vector<std::string>& simulate_columns();
const std::vector<std::string>& compare_columns();
const std::vector<std::string>& analyze_columns();

int cmd_offline_preemptive(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_offline_nonpreemptive(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_analyze(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_simulate(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_compare(const Options& opt, std::ostream& out, std::ostream& err);

/// Parses GRIDSCHED_BUDGET; nullopt when unset. Throws on malformed values.
std::optional<std::uint64_t> budget_from_env();

}  // namespace gridsched::cli
