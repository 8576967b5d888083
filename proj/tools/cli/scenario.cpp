// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#include "scenario.hpp"

#include <fstream>

#include "gridsched/io.hpp"

namespace gridsched::cli {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw InvalidArgument("scenario: " + where + ": " + what);
}

const json& need(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) bad(where, std::string("missing \"") + key + "\"");
  return obj.at(key);
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) bad(where, "expected a number");
  return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const std::string& where) {
  return obj.contains(key) ? number(obj.at(key), where + "." + key) : fallback;
}

std::uint64_t count_or(const json& obj, const char* key, std::uint64_t fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned()) bad(where + "." + key, "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

std::vector<double> numbers(const json& v, const std::string& where) {
  if (!v.is_array()) bad(where, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(number(x, where));
  return out;
}

OfflineSection parse_offline(const json& doc) {
  OfflineSection out;
  if (doc.contains("packing")) {
    const auto& p = doc.at("packing");
    nonpreemptive::PackingInstance inst;
    inst.item_sizes = numbers(need(p, "sizes", "offline.packing"), "offline.packing.sizes");
    inst.capacity = number(need(p, "D", "offline.packing"), "offline.packing.D");
    inst.power_step = number_or(p, "p", 1.0, "offline.packing");
    inst.validate();
    out.tasks = nonpreemptive::uniform_tasks(inst);
    out.horizon = inst.capacity;
    out.packing = std::move(inst);
    return out;
  }
  out.tasks = tasks_from_json(need(doc, "tasks", "offline"));
  double latest = 0.0;
  for (const auto& t : out.tasks) latest = std::max(latest, t.deadline());
  out.horizon = number_or(doc, "horizon", latest, "offline");
  out.packing = nonpreemptive::as_uniform_instance(out.tasks);
  return out;
}

PolicySweep parse_policy(const json& doc, std::size_t index) {
  const std::string where = "policies[" + std::to_string(index) + "]";
  const auto& name = need(doc, "name", where);
  if (!name.is_string()) bad(where + ".name", "expected a string");
  PolicySweep out;
  out.name = name.get<std::string>();
  if (out.name != "Default" && out.name != "CR" && out.name != "TP" && out.name != "ETP") {
    bad(where + ".name", "unknown policy \"" + out.name + "\" (Default, CR, TP, ETP)");
  }
  if (out.name != "Default") {
    out.thresholds = numbers(need(doc, "thresholds", where), where + ".thresholds");
    if (out.thresholds.empty()) bad(where + ".thresholds", "sweep grid is empty");
  }
  if (doc.contains("curve")) {
    if (out.name != "TP") bad(where + ".curve", "only TP takes a switching curve");
    for (const auto& step : doc.at("curve")) {
      if (!step.is_array() || step.size() != 2 || !step[0].is_number_unsigned()) {
        bad(where + ".curve", "expected [[queue_length, threshold], ...]");
      }
      out.curve.push_back({step[0].get<std::uint64_t>(), number(step[1], where + ".curve")});
    }
  }
  out.release_one_per_completion = doc.value("release_one_per_completion", false);
  for (double t : out.thresholds) (void)make_policy(out, t);  // validates thresholds and curve
  return out;
}

StochasticSection parse_stochastic(const json& doc, const json& root) {
  StochasticSection out;
  auto& p = out.params;
  p.lambda = number(need(doc, "lambda", "stochastic"), "stochastic.lambda");
  p.service = number(need(doc, "s", "stochastic"), "stochastic.s");
  const auto& d = need(doc, "d", "stochastic");
  out.deadline_rates = d.is_array() ? numbers(d, "stochastic.d") : std::vector<double>{number(d, "stochastic.d")};
  if (out.deadline_rates.empty()) bad("stochastic.d", "no deadline rates");
  if (doc.contains("power_dist")) {
    p.power_dist.clear();
    for (const auto& c : doc.at("power_dist")) {
      if (!c.is_array() || c.size() != 2) bad("stochastic.power_dist", "expected [[power, weight], ...]");
      p.power_dist.push_back({number(c[0], "stochastic.power_dist"), number(c[1], "stochastic.power_dist")});
    }
  }
  for (double rate : out.deadline_rates) {
    p.deadline_rate = rate;
    p.validate();
  }
  p.deadline_rate = out.deadline_rates.front();

  if (root.contains("policies")) {
    const auto& list = root.at("policies");
    if (!list.is_array()) bad("policies", "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) out.policies.push_back(parse_policy(list[i], i));
  }
  if (root.contains("simulation")) {
    const auto& s = root.at("simulation");
    auto& sim = out.simulation;
    sim.horizon = number_or(s, "horizon", sim.horizon, "simulation");
    sim.seed = count_or(s, "seed", sim.seed, "simulation");
    sim.replications = static_cast<std::uint32_t>(count_or(s, "replications", sim.replications, "simulation"));
    sim.batches = static_cast<std::uint32_t>(count_or(s, "batches", sim.batches, "simulation"));
    sim.warmup = number_or(s, "warmup", sim.warmup, "simulation");
  }
  if (root.contains("analysis") && root.at("analysis").contains("epsilons")) {
    out.epsilons = numbers(root.at("analysis").at("epsilons"), "analysis.epsilons");
  }
  return out;
}

SolverSection parse_solver(const json& doc) {
  SolverSection out;
  auto& b = out.balance;
  b.objective_tolerance = number_or(doc, "objective_tolerance", b.objective_tolerance, "solver");
  b.waterlevel_tolerance = number_or(doc, "waterlevel_tolerance", b.waterlevel_tolerance, "solver");
  b.max_rounds = static_cast<int>(count_or(doc, "max_rounds", static_cast<std::uint64_t>(b.max_rounds), "solver"));
  b.seed = count_or(doc, "seed", b.seed, "solver");
  const std::string order = doc.value("sweep_order", std::string("sequential"));
  if (order == "sequential") {
    b.sweep_order = preemptive::SweepOrder::Sequential;
  } else if (order == "random") {
    b.sweep_order = preemptive::SweepOrder::RandomPermutationPerRound;
  } else {
    bad("solver.sweep_order", "expected \"sequential\" or \"random\"");
  }
  b.validate();
  out.max_nodes = count_or(doc, "max_nodes", out.max_nodes, "solver");
  if (doc.contains("grid")) out.grid = number(doc.at("grid"), "solver.grid");
  return out;
}

}  // namespace

sim::PolicySpec make_policy(const PolicySweep& sweep, double threshold) {
  sim::PolicySpec policy;
  if (sweep.name == "Default") {
    policy = sim::DefaultPolicy{};
  } else if (sweep.name == "CR") {
    policy = sim::ControlledRelease{threshold, sweep.release_one_per_completion};
  } else if (sweep.name == "TP") {
    policy = sim::ThresholdPostponement{sim::SwitchingCurve(threshold, sweep.curve)};
  } else if (sweep.name == "ETP") {
    policy = sim::EnhancedThresholdPostponement{threshold};
  } else {
    throw InvalidArgument("unknown policy \"" + sweep.name + "\"");
  }
  sim::validate(policy);
  return policy;
}

Scenario scenario_from_json(const json& doc) {
  if (!doc.is_object()) bad("root", "expected an object");
  Scenario out;
  out.name = doc.value("name", std::string("unnamed"));
  if (doc.contains("cost")) out.cost = cost_from_json(doc.at("cost"));
  const bool has_offline = doc.contains("offline");
  const bool has_stochastic = doc.contains("stochastic");
  if (has_offline == has_stochastic) bad("root", "exactly one of \"offline\" or \"stochastic\" is required");
  if (has_offline) out.offline = parse_offline(doc.at("offline"));
  if (has_stochastic) out.stochastic = parse_stochastic(doc.at("stochastic"), doc);
  if (doc.contains("solver")) out.solver = parse_solver(doc.at("solver"));
  return out;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open scenario file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument("scenario " + path.string() + ": " + e.what());
  }
  return scenario_from_json(doc);
}

}  // namespace gridsched::cli
