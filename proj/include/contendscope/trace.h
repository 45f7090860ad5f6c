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

// In-memory workload trace: queries, stages, tasks with per-request metric
// time series, hosts with optional capacities and system counters, and the
// known-cause registry. All times are float seconds from the workload epoch.

#ifndef CONTENDSCOPE_TRACE_H
#define CONTENDSCOPE_TRACE_H

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "contendscope/resource.h"

namespace contendscope {

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

// Deltas accumulated since the previous sample of the same task.
struct RequestMetrics {
  double wait = 0.0;      // WT, seconds blocked
  double consume = 0.0;   // CT, seconds consuming
  double acquired = 0.0;  // RA, request-specific units

  bool IsZero() const { return wait == 0.0 && consume == 0.0 && acquired == 0.0; }
  RequestMetrics& operator+=(const RequestMetrics& o) {
    wait += o.wait;
    consume += o.consume;
    acquired += o.acquired;
    return *this;
  }
  friend bool operator==(const RequestMetrics&, const RequestMetrics&) = default;
};

using MetricVector = PerRequest<RequestMetrics>;

struct MetricSample {
  double time = 0.0;
  MetricVector metrics{};
  friend bool operator==(const MetricSample&, const MetricSample&) = default;
};

struct TaskRecord {
  std::string id;
  std::string stage_id;
  std::string query_id;
  std::string host_id;
  double start = 0.0;
  double end = 0.0;
  std::vector<MetricSample> samples;

  // Resolved by WorkloadTrace::Link().
  std::size_t stage = kNoIndex;
  std::size_t query = kNoIndex;
  std::size_t host = kNoIndex;

  double Duration() const { return end - start; }
  RequestMetrics Total(ResourceRequest request) const;
};

struct StageRecord {
  std::string id;
  std::string query_id;
  std::string user;
  std::vector<std::string> parent_ids;

  std::size_t query = kNoIndex;
  std::vector<std::size_t> parents;
  std::vector<std::size_t> tasks;
  // Cumulative Cpu-class consume time over the stage's tasks.
  double work_done = 0.0;
};

struct QueryRecord {
  std::string id;
  std::string user;
  double submit = 0.0;
  double finish = 0.0;

  std::vector<std::size_t> stages;
  std::vector<std::size_t> tasks;
};

struct TimeWindow {
  double begin = 0.0;
  double end = 0.0;
  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

// System-level cumulative usage per request at one instant.
struct SysCounterSample {
  double time = 0.0;
  PerRequest<std::optional<double>> used{};
  friend bool operator==(const SysCounterSample&, const SysCounterSample&) = default;
};

struct HostProfile {
  std::string id;
  PerRequest<std::optional<double>> capacity{};  // units per second
  std::vector<SysCounterSample> counters;         // ordered by time
  std::vector<TimeWindow> gc_windows;

  std::vector<std::size_t> tasks;
};

struct CauseWindow {
  double begin = 0.0;
  double end = 0.0;
  double units = 0.0;  // usage spread uniformly over [begin, end]
  friend bool operator==(const CauseWindow&, const CauseWindow&) = default;
};

// A non-concurrency cause of waiting with explicitly supplied usage windows on
// one host.
struct KnownCause {
  std::string name;
  ResourceRequest request = ResourceRequest::kCpuOsSched;
  std::string host_id;
  std::vector<CauseWindow> windows;

  std::size_t host = kNoIndex;
};

// Named cause presets. A preset is inert until a trace supplies windows for
// it; it only fixes the request a "cause" record defaults to.
std::optional<ResourceRequest> KnownCausePreset(std::string_view name);

class TraceError : public std::runtime_error {
 public:
  enum class Kind { kIo, kMalformed, kDanglingReference, kNonMonotone, kInvalid };

  TraceError(Kind kind, const std::string& what, std::size_t line = 0)
      : std::runtime_error(what), kind_(kind), line_(line) {}

  Kind kind() const { return kind_; }
  // 1-based line number in the source file, 0 when not line-specific.
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

struct WorkloadTrace {
  double heartbeat_interval = 0.0;  // 0 disables heartbeat boundaries
  std::vector<QueryRecord> queries;
  std::vector<StageRecord> stages;
  std::vector<TaskRecord> tasks;
  std::vector<HostProfile> hosts;
  std::vector<KnownCause> known_causes;

  // Resolves string references to indices, fills the per-entity index lists
  // and stage work done. Throws TraceError(kDanglingReference) for references
  // to missing entities and TraceError(kMalformed) for duplicate ids.
  void Link();

  std::size_t FindQuery(std::string_view id) const;
  std::size_t FindStage(std::string_view id) const;
  std::size_t FindTask(std::string_view id) const;
  std::size_t FindHost(std::string_view id) const;

  // Earliest task start and latest task end; {0, 0} for an empty trace.
  TimeWindow Span() const;

 private:
  std::unordered_map<std::string, std::size_t> query_index_;
  std::unordered_map<std::string, std::size_t> stage_index_;
  std::unordered_map<std::string, std::size_t> task_index_;
  std::unordered_map<std::string, std::size_t> host_index_;
};

}  // namespace contendscope

#endif  // CONTENDSCOPE_TRACE_H
