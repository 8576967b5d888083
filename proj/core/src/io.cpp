// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#include "gridsched/io.hpp"

#include <string>

namespace gridsched {

using nlohmann::json;

namespace {

double number(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw InvalidArgument(std::string("missing key \"") + key + "\"");
  if (!it->is_number()) throw InvalidArgument(std::string("key \"") + key + "\" must be a number");
  return it->get<double>();
}

}  // namespace

std::vector<DemandTask> tasks_from_json(const json& doc) {
  if (!doc.is_array()) throw InvalidArgument("workload must be a JSON array of tasks");
  std::vector<DemandTask> tasks;
  tasks.reserve(doc.size());
  for (const auto& item : doc) {
    if (!item.is_object()) throw InvalidArgument("workload entries must be objects");
    auto id = item.find("id");
    if (id == item.end() || !id->is_number_integer()) throw InvalidArgument("task id must be an integer");
    tasks.emplace_back(id->get<TaskId>(), number(item, "arrival"), number(item, "duration"),
                       number(item, "power"), number(item, "deadline"));
  }
  return tasks;
}

json tasks_to_json(const std::vector<DemandTask>& tasks) {
  json out = json::array();
  for (const auto& t : tasks) {
    out.push_back({{"id", t.id()},
                   {"arrival", t.arrival()},
                   {"duration", t.duration()},
                   {"power", t.power()},
                   {"deadline", t.deadline()}});
  }
  return out;
}

CostFunction cost_from_json(const json& doc) {
  if (!doc.is_object()) throw InvalidArgument("cost function must be a JSON object");
  auto type = doc.find("type");
  if (type == doc.end() || !type->is_string()) throw InvalidArgument("cost function needs a \"type\"");
  const auto kind = type->get<std::string>();
  if (kind == "quadratic") {
    return CostFunction::quadratic(number(doc, "c2"), number(doc, "c1"), number(doc, "c0"));
  }
  if (kind == "piecewise") {
    auto segs = doc.find("segments");
    if (segs == doc.end() || !segs->is_array()) throw InvalidArgument("piecewise cost needs \"segments\"");
    std::vector<CostFunction::Segment> segments;
    for (const auto& s : *segs) {
      if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number()) {
        throw InvalidArgument("piecewise segments must be [slope, intercept] pairs");
      }
      segments.push_back({s[0].get<double>(), s[1].get<double>()});
    }
    return CostFunction::piecewise(std::move(segments));
  }
  throw InvalidArgument("unknown cost function type \"" + kind + "\"");
}

json cost_to_json(const CostFunction& cost) {
  if (const auto* pl = std::get_if<CostFunction::PiecewiseLinear>(&cost.form())) {
    json segs = json::array();
    for (const auto& s : pl->segments) segs.push_back({s.slope, s.intercept});
    return {{"type", "piecewise"}, {"segments", segs}};
  }
  const auto& q = std::get<CostFunction::Quadratic>(cost.form());
  return {{"type", "quadratic"}, {"c2", q.c2}, {"c1", q.c1}, {"c0", q.c0}};
}

json profile_to_json(const LoadProfile& profile) {
  return {{"breakpoints", std::vector<double>(profile.breakpoints().begin(), profile.breakpoints().end())},
          {"values", std::vector<double>(profile.values().begin(), profile.values().end())}};
}

LoadProfile profile_from_json(const json& doc) {
  try {
    return LoadProfile(doc.at("breakpoints").get<std::vector<double>>(),
                       doc.at("values").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed load profile: ") + e.what());
  }
}

}  // namespace gridsched
