// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>
#include <variant>

#include "gridsched/io.hpp"
#include "gridsched/stochastic_analysis.hpp"
#include "scenario.hpp"

namespace gridsched::cli {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Tables: CSV with 9 significant digits, or JSON objects with the same values.

using Cell = std::variant<std::monostate, std::string, double>;

struct Table {
  const std::vector<std::string>* columns;
  std::vector<std::vector<Cell>> rows;
};

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string cell_text(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  return "";
}

json cell_json(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  if (const auto* d = std::get_if<double>(&c)) {
    if (!std::isfinite(*d)) return format_number(*d);
    return std::strtod(format_number(*d).c_str(), nullptr);
  }
  return nullptr;
}

bool wants_json(const std::string& path) { return path.size() >= 5 && path.ends_with(".json"); }

std::string render(const Table& t, bool as_json) {
  if (as_json) {
    json rows = json::array();
    for (const auto& r : t.rows) {
      json obj = json::object();
      for (std::size_t i = 0; i < r.size(); ++i) obj[(*t.columns)[i]] = cell_json(r[i]);
      rows.push_back(std::move(obj));
    }
    return json{{"columns", *t.columns}, {"rows", rows}}.dump(2) + "\n";
  }
  std::string out;
  for (std::size_t i = 0; i < t.columns->size(); ++i) out += (i ? "," : "") + (*t.columns)[i];
  out += "\n";
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + cell_text(r[i]);
    out += "\n";
  }
  return out;
}

void emit(const Options& opt, std::ostream& out, const std::string& text) {
  if (opt.out.empty()) {
    out << text;
    return;
  }
  std::ofstream file(opt.out, std::ios::binary);
  if (!file) throw InvalidArgument("cannot write " + opt.out);
  file << text;
}

std::string pretty(const json& doc) { return doc.dump(2) + "\n"; }

// Runs `body`, mapping exceptions to exit codes and diagnostics on `err`.
int guarded(std::ostream& err, const char* verb, const std::function<int()>& body) {
  try {
    return body();
  } catch (const InvalidArgument& e) {
    err << "gridsched " << verb << ": " << e.what() << "\n";
  } catch (const InfeasibleSchedule& e) {
    err << "gridsched " << verb << ": " << e.what() << "\n";
  } catch (const json::exception& e) {
    err << "gridsched " << verb << ": malformed input: " << e.what() << "\n";
  }
  return kInputError;
}

const OfflineSection& need_offline(const Scenario& s) {
  if (!s.offline) throw InvalidArgument("this command needs an \"offline\" scenario");
  return *s.offline;
}

const StochasticSection& need_stochastic(const Scenario& s) {
  if (!s.stochastic) throw InvalidArgument("this command needs a \"stochastic\" scenario");
  return *s.stochastic;
}

std::uint64_t node_budget(const Options& opt, const Scenario& s) {
  return opt.budget.value_or(s.solver.max_nodes);
}

// ---------------------------------------------------------------------------
// Simulation sweeps shared by simulate and compare.

struct Cellrun {
  std::string policy;
  std::optional<double> threshold;  // empty for Default
  double d;
  sim::SimResult result;
};

std::vector<PolicySweep> selected_policies(const Options& opt, const StochasticSection& st) {
  if (opt.threshold && !opt.policy) throw InvalidArgument("--threshold requires --policy");
  if (!opt.policy) return st.policies;
  std::vector<PolicySweep> out;
  for (const auto& p : st.policies) {
    if (p.name == *opt.policy) out.push_back(p);
  }
  if (out.empty()) {
    PolicySweep p;
    p.name = *opt.policy;
    if (p.name != "Default" && !opt.threshold) {
      throw InvalidArgument("policy " + p.name + " is not in the scenario; pass --threshold");
    }
    out.push_back(p);
  }
  for (auto& p : out) {
    if (opt.threshold) p.thresholds = {*opt.threshold};
    if (p.name != "Default") (void)make_policy(p, p.thresholds.front());
    else (void)make_policy(p, 0.0);
  }
  return out;
}

std::vector<Cellrun> run_sweep(const Options& opt, const Scenario& s, const StochasticSection& st) {
  std::vector<Cellrun> cells;
  for (const auto& sweep : selected_policies(opt, st)) {
    const std::vector<std::optional<double>> grid = [&] {
      std::vector<std::optional<double>> g;
      if (sweep.name == "Default") g.push_back(std::nullopt);
      for (double t : sweep.thresholds) {
        if (sweep.name != "Default") g.push_back(t);
      }
      return g;
    }();
    for (const auto& threshold : grid) {
      for (double d : st.deadline_rates) {
        sim::SimConfig cfg;
        cfg.params = st.params;
        cfg.params.deadline_rate = d;
        cfg.policy = make_policy(sweep, threshold.value_or(0.0));
        cfg.cost = s.cost;
        cfg.horizon = st.simulation.horizon;
        cfg.warmup_fraction = st.simulation.warmup;
        cfg.seed = opt.seed.value_or(st.simulation.seed);
        cfg.batches = st.simulation.batches;
        cfg.replications = st.simulation.replications;
        cells.push_back({sweep.name, threshold, d, sim::run(cfg)});
      }
    }
  }
  std::stable_sort(cells.begin(), cells.end(), [](const Cellrun& a, const Cellrun& b) {
    const double ta = a.threshold.value_or(-1.0), tb = b.threshold.value_or(-1.0);
    return std::tie(a.policy, ta, a.d) < std::tie(b.policy, tb, b.d);
  });
  return cells;
}

// Busy-server cost of CR's auxiliary M/M/c queue, c = ceil(P0), when defined.
std::optional<double> mmc_reference(const Cellrun& c, const stochastic::StochasticParams& p, const CostFunction& cost) {
  if (c.policy != "CR" || !p.unit_power() || !c.threshold) return std::nullopt;
  const double servers = std::ceil(*c.threshold - kFeasibilityTolerance);
  if (servers < 1.0 || p.lambda >= servers * p.service) return std::nullopt;
  return stochastic::mmc_power_cost(p.lambda, p.service, static_cast<std::uint64_t>(servers), cost);
}

Cell opt_cell(const std::optional<double>& v) { return v ? Cell{*v} : Cell{}; }

}  // namespace

const std::vector<std::string>& simulate_columns() {
  static const std::vector<std::string> cols{"policy",    "threshold", "d",    "avg_cost",
                                             "ci",        "avg_power", "peak", "postponed_fraction",
                                             "deadline_activation_rate", "lower_bound", "mmc_reference"};
  return cols;
}

const std::vector<std::string>& compare_columns() {
  static const std::vector<std::string> cols{"policy",   "d",  "mean_deadline", "best_threshold", "avg_cost",
                                             "ci",       "avg_power", "lower_bound", "default_cost"};
  return cols;
}

const std::vector<std::string>& analyze_columns() {
  static const std::vector<std::string> cols{"quantity", "epsilon", "threshold", "servers", "rho",
                                             "value",    "lower_bound", "gap", "stable"};
  return cols;
}

std::optional<std::uint64_t> budget_from_env() {
  const char* raw = std::getenv("GRIDSCHED_BUDGET");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw, &end, 10);
  if (*end != '\0' || v == 0 || raw[0] == '-') {
    throw InvalidArgument(std::string("GRIDSCHED_BUDGET must be a positive integer, got \"") + raw + "\"");
  }
  return v;
}

int cmd_offline_preemptive(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, "offline-preemptive", [&] {
    const auto s = load_scenario(opt.scenario);
    const auto& off = need_offline(s);
    auto cfg = s.solver.balance;
    if (opt.seed) cfg.seed = *opt.seed;
    const auto r = preemptive::solve(off.tasks, s.cost, off.horizon, cfg);

    json schedule = json::array();
    for (const auto& [id, x] : r.schedule.allocations) schedule.push_back({{"id", id}, {"allocation", profile_to_json(x)}});
    json fractional = json::array();
    for (const auto& e : preemptive::rounding_hint(r)) {
      fractional.push_back({{"id", e.task}, {"fractional_mass", e.fractional_mass}, {"fractional_time", e.fractional_time}});
    }
    const json doc{{"scenario", s.name},         {"objective", r.objective}, {"rounds", r.rounds_used},
                   {"converged", r.converged},   {"horizon", off.horizon},   {"load", profile_to_json(r.load)},
                   {"max_load", r.load.max_value()}, {"schedule", schedule}, {"fractional", fractional}};
    emit(opt, out, pretty(doc));
    if (!r.converged) {
      err << "gridsched offline-preemptive: no convergence after " << r.rounds_used << " rounds\n";
      return static_cast<int>(kNotConverged);
    }
    return static_cast<int>(kSuccess);
  });
}

int cmd_offline_nonpreemptive(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, "offline-nonpreemptive", [&] {
    const auto s = load_scenario(opt.scenario);
    const auto& off = need_offline(s);
    const nonpreemptive::SearchBudget budget{node_budget(opt, s)};
    const auto grid = opt.grid ? opt.grid : s.solver.grid;

    auto starts_json = [](const NonPreemptiveSchedule& sched) {
      json a = json::array();
      for (const auto& [id, t] : sched.starts) a.push_back({{"id", id}, {"start", t}});
      return a;
    };

    if (grid) {
      json doc{{"scenario", s.name}, {"mode", "grid"}, {"grid", *grid}, {"horizon", off.horizon}};
      try {
        const auto r = nonpreemptive::exact_nonpreemptive_min_cost(off.tasks, s.cost, off.horizon, *grid, budget);
        doc["objective"] = r.objective;
        doc["nodes"] = r.nodes;
        doc["peak_power"] = r.load.max_value();
        doc["load"] = profile_to_json(r.load);
        doc["schedule"] = starts_json(r.schedule);
        doc["budget_exceeded"] = false;
        emit(opt, out, pretty(doc));
        return static_cast<int>(kSuccess);
      } catch (const nonpreemptive::ScheduleBudgetExceeded& e) {
        doc["budget_exceeded"] = true;
        if (const auto& best = e.best_known()) {
          doc["objective"] = best->objective;
          doc["peak_power"] = best->load.max_value();
          doc["load"] = profile_to_json(best->load);
          doc["schedule"] = starts_json(best->schedule);
        }
        emit(opt, out, pretty(doc));
        err << "gridsched offline-nonpreemptive: " << e.what() << "\n";
        return static_cast<int>(kBudgetExceeded);
      }
    }

    if (!off.packing) {
      throw InvalidArgument("packing mode needs a uniform instance (common arrival 0, deadline and power); pass --grid");
    }
    const auto& inst = *off.packing;
    nonpreemptive::PackingResult packing;
    bool exceeded = false;
    std::string why;
    if (opt.ffd) {
      packing = nonpreemptive::first_fit_decreasing(inst);
    } else {
      try {
        packing = nonpreemptive::exact_min_bins(inst, budget);
      } catch (const nonpreemptive::PackingBudgetExceeded& e) {
        packing = e.best_known();
        exceeded = true;
        why = e.what();
      }
    }
    const auto packed = nonpreemptive::schedule_from_packing(inst, packing);
    const json doc{{"scenario", s.name},
                   {"mode", opt.ffd ? "ffd" : "exact"},
                   {"capacity", inst.capacity},
                   {"power_step", inst.power_step},
                   {"bins", packing.bins},
                   {"bin_count", packing.bin_count},
                   {"peak_power", packing.peak_power},
                   {"cost", schedule_cost(s.cost, packed.load)},
                   {"load", profile_to_json(packed.load)},
                   {"schedule", starts_json(packed.schedule)},
                   {"budget_exceeded", exceeded}};
    emit(opt, out, pretty(doc));
    if (exceeded) {
      err << "gridsched offline-nonpreemptive: " << why << "\n";
      return static_cast<int>(kBudgetExceeded);
    }
    return static_cast<int>(kSuccess);
  });
}

int cmd_analyze(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, "analyze", [&] {
    const auto s = load_scenario(opt.scenario);
    const auto& st = need_stochastic(s);
    const auto& p = st.params;
    const double bound = stochastic::universal_lower_bound(p, s.cost);
    Table t{&analyze_columns(), {}};
    auto row = [&](std::string q, Cell eps, Cell thr, Cell servers, Cell rho, Cell value, Cell gap, Cell stable) {
      t.rows.push_back({std::move(q), eps, thr, servers, rho, value, bound, gap, stable});
    };

    const auto dflt = stochastic::compound_default_cost(p, s.cost, opt.seed.value_or(st.simulation.seed));
    row("default_cost", {}, {}, {}, {}, dflt.value, dflt.value - bound, {});
    if (!dflt.exact) row("default_cost_stderr", {}, {}, {}, {}, dflt.standard_error, {}, {});
    row("mixture_formula", {}, {}, {}, {}, stochastic::power_weighted_mixture_cost(p, s.cost), {}, {});
    row("lower_bound", {}, {}, {}, {}, bound, 0.0, {});

    if (p.unit_power()) {
      std::vector<double> thresholds;
      for (const auto& sweep : st.policies) {
        if (sweep.name == "CR") thresholds.insert(thresholds.end(), sweep.thresholds.begin(), sweep.thresholds.end());
      }
      std::sort(thresholds.begin(), thresholds.end());
      thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
      for (double thr : thresholds) {
        const double c = std::max(1.0, std::ceil(thr - kFeasibilityTolerance));
        const double rho = p.lambda / (c * p.service);
        if (rho < 1.0) {
          const double v = stochastic::mmc_power_cost(p.lambda, p.service, static_cast<std::uint64_t>(c), s.cost);
          row("mmc_cost", {}, thr, c, rho, v, v - bound, std::string("true"));
        } else {
          row("mmc_cost", {}, thr, c, rho, {}, {}, std::string("false"));
        }
      }
      for (const auto& a : stochastic::cr_asymptotics(p, st.epsilons, s.cost)) {
        row("cr_asymptotic", a.epsilon, a.threshold, static_cast<double>(a.servers), a.rho,
            a.stable ? Cell{a.mmc_cost} : Cell{}, a.stable ? Cell{a.gap} : Cell{},
            std::string(a.stable ? "true" : "false"));
      }
    } else if (!st.epsilons.empty()) {
      err << "gridsched analyze: M/M/c rows need unit power; skipped\n";
    }
    emit(opt, out, render(t, wants_json(opt.out)));
    return static_cast<int>(kSuccess);
  });
}

int cmd_simulate(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, "simulate", [&] {
    const auto s = load_scenario(opt.scenario);
    const auto& st = need_stochastic(s);
    const double bound = stochastic::universal_lower_bound(st.params, s.cost);
    Table t{&simulate_columns(), {}};
    for (const auto& c : run_sweep(opt, s, st)) {
      const auto& r = c.result;
      t.rows.push_back({c.policy, opt_cell(c.threshold), c.d, r.avg_cost, r.ci_halfwidth, r.avg_power, r.peak_power,
                        r.postponed_fraction, r.deadline_activation_rate, bound,
                        opt_cell(mmc_reference(c, st.params, s.cost))});
    }
    emit(opt, out, render(t, wants_json(opt.out)));
    return static_cast<int>(kSuccess);
  });
}

int cmd_compare(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, "compare", [&] {
    const auto s = load_scenario(opt.scenario);
    const auto& st = need_stochastic(s);
    const double bound = stochastic::universal_lower_bound(st.params, s.cost);
    const double dflt = stochastic::compound_default_cost(st.params, s.cost, opt.seed.value_or(st.simulation.seed)).value;
    const auto cells = run_sweep(opt, s, st);

    // Best threshold per (policy, d); cells are sorted by (policy, threshold, d).
    std::map<std::pair<std::string, double>, const Cellrun*> best;
    for (const auto& c : cells) {
      auto& slot = best[{c.policy, c.d}];
      if (slot == nullptr || c.result.avg_cost < slot->result.avg_cost) slot = &c;
    }
    Table t{&compare_columns(), {}};
    for (const auto& [key, c] : best) {
      const auto& r = c->result;
      t.rows.push_back({c->policy, c->d, c->d > 0.0 ? Cell{1.0 / c->d} : Cell{std::string("inf")},
                        opt_cell(c->threshold), r.avg_cost, r.ci_halfwidth, r.avg_power, bound, dflt});
    }
    emit(opt, out, render(t, wants_json(opt.out)));
    return static_cast<int>(kSuccess);
  });
}

}  // namespace gridsched::cli
