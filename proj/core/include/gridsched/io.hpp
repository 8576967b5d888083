// Copyright 2026 The gridsched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <vector>

#include "gridsched/task_model.hpp"

namespace gridsched {

// Workload:  [{"id":1,"arrival":0,"duration":2,"power":1,"deadline":4}, ...]
// Cost:      {"type":"piecewise","segments":[[k,b],...]}
//            {"type":"quadratic","c2":1,"c1":0,"c0":0}
// Malformed input raises InvalidArgument.

std::vector<DemandTask> tasks_from_json(const nlohmann::json& doc);
nlohmann::json tasks_to_json(const std::vector<DemandTask>& tasks);

CostFunction cost_from_json(const nlohmann::json& doc);
nlohmann::json cost_to_json(const CostFunction& cost);

/// {"breakpoints":[...],"values":[...]}
nlohmann::json profile_to_json(const LoadProfile& profile);
LoadProfile profile_from_json(const nlohmann::json& doc);

}  // namespace gridsched
