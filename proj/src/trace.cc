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

#include "contendscope/trace.h"

#include <algorithm>

namespace contendscope {

namespace {

template <typename Record>
void BuildIndex(const std::vector<Record>& records, const char* kind,
                std::unordered_map<std::string, std::size_t>* index) {
  index->clear();
  index->reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!index->emplace(records[i].id, i).second) {
      throw TraceError(TraceError::Kind::kMalformed,
                       std::string("duplicate ") + kind + " id '" +
                           records[i].id + "'");
    }
  }
}

std::size_t Lookup(const std::unordered_map<std::string, std::size_t>& index,
                   std::string_view id) {
  auto it = index.find(std::string(id));
  return it == index.end() ? kNoIndex : it->second;
}

}  // namespace

RequestMetrics TaskRecord::Total(ResourceRequest request) const {
  RequestMetrics total;
  for (const MetricSample& s : samples) total += s.metrics[Index(request)];
  return total;
}

std::optional<ResourceRequest> KnownCausePreset(std::string_view name) {
  if (name == "hdfs-replication") return ResourceRequest::kIoWrite;
  if (name == "rdd-storage") return ResourceRequest::kStorageMemory;
  return std::nullopt;
}

void WorkloadTrace::Link() {
  BuildIndex(queries, "query", &query_index_);
  BuildIndex(stages, "stage", &stage_index_);
  BuildIndex(tasks, "task", &task_index_);
  BuildIndex(hosts, "host", &host_index_);

  for (QueryRecord& q : queries) {
    q.stages.clear();
    q.tasks.clear();
  }
  for (HostProfile& h : hosts) h.tasks.clear();

  for (std::size_t i = 0; i < stages.size(); ++i) {
    StageRecord& s = stages[i];
    s.query = Lookup(query_index_, s.query_id);
    if (s.query == kNoIndex) {
      throw TraceError(TraceError::Kind::kDanglingReference,
                       "stage '" + s.id + "' references unknown query '" +
                           s.query_id + "'");
    }
    queries[s.query].stages.push_back(i);
    s.parents.clear();
    for (const std::string& p : s.parent_ids) {
      std::size_t idx = Lookup(stage_index_, p);
      if (idx == kNoIndex) {
        throw TraceError(TraceError::Kind::kDanglingReference,
                         "stage '" + s.id + "' references unknown parent '" +
                             p + "'");
      }
      s.parents.push_back(idx);
    }
    s.tasks.clear();
    s.work_done = 0.0;
  }

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    TaskRecord& t = tasks[i];
    t.stage = Lookup(stage_index_, t.stage_id);
    if (t.stage == kNoIndex) {
      throw TraceError(TraceError::Kind::kDanglingReference,
                       "task '" + t.id + "' references unknown stage '" +
                           t.stage_id + "'");
    }
    t.query = Lookup(query_index_, t.query_id);
    if (t.query == kNoIndex) {
      throw TraceError(TraceError::Kind::kDanglingReference,
                       "task '" + t.id + "' references unknown query '" +
                           t.query_id + "'");
    }
    t.host = Lookup(host_index_, t.host_id);
    if (t.host == kNoIndex) {
      throw TraceError(TraceError::Kind::kDanglingReference,
                       "task '" + t.id + "' references unknown host '" +
                           t.host_id + "'");
    }
    StageRecord& stage = stages[t.stage];
    stage.tasks.push_back(i);
    queries[t.query].tasks.push_back(i);
    hosts[t.host].tasks.push_back(i);
    for (ResourceRequest r : RequestsOf(ResourceClass::kCpu)) {
      stage.work_done += t.Total(r).consume;
    }
  }

  for (KnownCause& c : known_causes) {
    c.host = Lookup(host_index_, c.host_id);
    if (c.host == kNoIndex) {
      throw TraceError(TraceError::Kind::kDanglingReference,
                       "cause '" + c.name + "' references unknown host '" +
                           c.host_id + "'");
    }
  }
}

std::size_t WorkloadTrace::FindQuery(std::string_view id) const {
  return Lookup(query_index_, id);
}
std::size_t WorkloadTrace::FindStage(std::string_view id) const {
  return Lookup(stage_index_, id);
}
std::size_t WorkloadTrace::FindTask(std::string_view id) const {
  return Lookup(task_index_, id);
}
std::size_t WorkloadTrace::FindHost(std::string_view id) const {
  return Lookup(host_index_, id);
}

TimeWindow WorkloadTrace::Span() const {
  if (tasks.empty()) return {};
  TimeWindow span{tasks.front().start, tasks.front().end};
  for (const TaskRecord& t : tasks) {
    span.begin = std::min(span.begin, t.start);
    span.end = std::max(span.end, t.end);
  }
  return span;
}

}  // namespace contendscope
