/*
 * ContendScope
 * Copyright (c) The ContendScope Authors.
 * All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * THIS CODE IS PROVIDED ON AN *AS IS* BASIS, WITHOUT WARRANTIES OR
 * CONDITIONS OF ANY KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT
 * LIMITATION ANY IMPLIED WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR
 * A PARTICULAR PURPOSE, MERCHANTABLITY OR NON-INFRINGEMENT.
 *
 * See the Apache Version 2.0 License for specific language governing
 * permissions and limitations under the License.
 */

// Discrete-time multi-tenant cluster simulator with known ground truth.
//
// Every tick, each host splits each request's capacity among the tasks
// demanding it in proportion to demand. A task demanding d units/s with peak
// rate p that is granted g accrues, over a tick of length dt:
//
//   CT = g dt / p      WT = (d - g) dt / p      RA = g dt
//
// and its wait is charged to the other demanders of the request on the host
// in proportion to what they were granted. Slots are handed out fair per
// user. Samples are emitted at task starts and ends on the task's host, at
// heartbeat ticks, and at task end; host counters at the same instants.

#ifndef CONTENDSCOPE_SIMULATOR_H
#define CONTENDSCOPE_SIMULATOR_H

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "contendscope/analysis.h"
#include "contendscope/trace.h"

namespace contendscope {

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Demand {
  double units = 0.0;  // total units a task needs
  double peak = 1.0;   // units/s it can use when uncontended
};

struct StageSpec {
  std::string id;
  std::vector<std::string> parents;
  int tasks = 1;
  PerRequest<std::optional<Demand>> demand{};
  // Pins every task of the stage to this host (e.g. "h0").
  std::optional<std::string> host;
};

struct QuerySpec {
  std::string id;
  std::string user;
  double submit = 0.0;
  std::vector<StageSpec> stages;
};

// Queries drawn from the seed in addition to the explicit ones: chains of
// stages, each stage depending on its predecessor.
struct RandomQueries {
  int count = 0;
  int users = 1;
  int min_stages = 1;
  int max_stages = 3;
  int min_tasks = 1;
  int max_tasks = 4;
  double submit_spread = 0.0;  // submit times uniform in [0, spread]
  // Per request: units uniform in [units * (1 - jitter), units * (1 + jitter)].
  PerRequest<std::optional<Demand>> demand{};
  double jitter = 0.5;
};

enum class InjectionKind { kCpuInternal, kIoInternal, kMemInternal, kIoExternal, kCpuExternal };

struct InjectionSpec {
  InjectionKind kind = InjectionKind::kCpuInternal;
  // Absolute start, or `offset` seconds after `after_query` starts running.
  double start = 0.0;
  std::optional<std::string> after_query;
  double offset = 0.0;
  double magnitude = 0.0;  // units/s demanded
  double duration = 0.0;
  std::vector<std::string> hosts;  // empty means every host
};

struct SimConfig {
  std::uint64_t seed = 1;
  double tick = 0.1;
  double heartbeat = 2.0;
  double max_time = 3600.0;
  int hosts = 1;
  int slots = 4;
  PerRequest<std::optional<double>> capacity{};  // units/s per host
  std::vector<QuerySpec> queries;
  RandomQueries random;
  std::vector<InjectionSpec> injections;
};

// Request an injection kind loads.
ResourceRequest InjectionRequest(InjectionKind kind);
bool IsExternal(InjectionKind kind);
std::string_view Name(InjectionKind kind);
std::optional<InjectionKind> ParseInjectionKind(std::string_view name);

struct CausedBlocked {
  std::string target_task;
  std::string target_query;
  std::string source;        // task id, or "<Unknown>" for external load
  std::string source_query;  // query id, or "<Unknown>"
  ResourceRequest request = ResourceRequest::kCpuOsSched;
  double seconds = 0.0;
};

struct GroundTruth {
  std::vector<CausedBlocked> caused;  // ordered by (target, source, request)
  std::vector<std::string> aggressors;  // injected internal queries
  std::vector<TimeWindow> injection_windows;  // per injection, in config order

  // Caused-blocked seconds toward the tasks of `target_query` summed per
  // source query, optionally restricted to one request.
  std::map<std::string, double> BySourceQuery(
      const std::string& target_query,
      std::optional<ResourceRequest> request = std::nullopt) const;
};

struct SimResult {
  WorkloadTrace trace;
  GroundTruth truth;
};

// Per tick, host and request: (time, host, request, sum granted, capacity).
using SimObserver = std::function<void(double, std::size_t, ResourceRequest, double, double)>;

// Throws SimError for invalid configurations or when max_time is reached.
SimResult Simulate(const SimConfig& config, const SimObserver& observer = {});
void ValidateConfig(const SimConfig& config);

nlohmann::ordered_json SimConfigToJson(const SimConfig& config);
SimConfig SimConfigFromJson(const nlohmann::json& j);

// {"aggressors":[...],"injections":[[b,e],...],"caused":[{"target_task":..,
//  "target_query":..,"source":..,"source_query":..,"request":..,
//  "caused_blocked_s":..}, ...]}
nlohmann::ordered_json GroundTruthToJson(const GroundTruth& truth);
GroundTruth GroundTruthFromJson(const nlohmann::json& j);

struct Scenario {
  std::string name;
  std::string description;
  std::string target;  // the query the scenario is built around
  SimConfig config;
};

// cpu-internal-hog, io-external-load, mem-internal-cache,
// baseline-no-injection, disjoint-resource, capacity-exact-N (N sources),
// scale-N (about N tasks).
std::vector<std::string> ScenarioNames();
// Throws SimError for unknown names.
Scenario MakeScenario(const std::string& name, std::uint64_t seed = 1);

struct AttributionScore {
  double precision_at_k = 0.0;
  double share_error = 0.0;
};

// Precision@k of the ranked ids against the labeled aggressors, and the L1
// distance between the normalized ranked scores and the normalized caused-
// blocked shares toward `target_query` (all targets when empty).
AttributionScore ScoreAttribution(const GroundTruth& truth, const RankedList& ranked,
                                  std::size_t k, const std::string& target_query = "");

}  // namespace contendscope

#endif  // CONTENDSCOPE_SIMULATOR_H
