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

#include "contendscope/trace_window.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "contendscope/intervals.h"

namespace contendscope {

namespace {

// Re-cuts a task's samples at `boundaries` (first = new start, last = new end).
std::vector<MetricSample> Recut(const TaskRecord& task, const std::vector<double>& boundaries) {
  std::vector<MetricVector> parts = Apportion(task.start, task.samples, boundaries);
  std::vector<MetricSample> out;
  out.reserve(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) out.push_back({boundaries[i + 1], parts[i]});
  return out;
}

std::optional<double> Interpolate(const std::vector<SysCounterSample>& counters,
                                  ResourceRequest r, double t) {
  const SysCounterSample* prev = nullptr;
  for (const SysCounterSample& s : counters) {
    const std::optional<double>& v = s.used[Index(r)];
    if (!v) continue;
    if (s.time >= t) {
      if (prev == nullptr || s.time == t) return *v;
      const double a = *prev->used[Index(r)];
      return a + (*v - a) * (t - prev->time) / (s.time - prev->time);
    }
    prev = &s;
  }
  if (prev == nullptr) return std::nullopt;
  return *prev->used[Index(r)];
}

}  // namespace

WorkloadTrace ClipTrace(const WorkloadTrace& trace, double begin, double end) {
  if (!(end > begin)) throw std::invalid_argument("clip window must have positive length");
  WorkloadTrace out;
  out.heartbeat_interval = trace.heartbeat_interval;
  for (const QueryRecord& q : trace.queries) {
    QueryRecord c;
    c.id = q.id;
    c.user = q.user;
    c.submit = std::clamp(q.submit, begin, end);
    c.finish = std::clamp(q.finish, begin, end);
    out.queries.push_back(std::move(c));
  }
  for (const StageRecord& s : trace.stages) {
    StageRecord c;
    c.id = s.id;
    c.query_id = s.query_id;
    c.user = s.user;
    c.parent_ids = s.parent_ids;
    out.stages.push_back(std::move(c));
  }
  for (const TaskRecord& t : trace.tasks) {
    const double lo = std::max(begin, t.start);
    const double hi = std::min(end, t.end);
    if (hi - lo <= kBoundaryEpsilon) continue;
    std::vector<double> cuts = {lo};
    for (const MetricSample& s : t.samples) {
      if (s.time > lo + kBoundaryEpsilon && s.time < hi - kBoundaryEpsilon) cuts.push_back(s.time);
    }
    cuts.push_back(hi);
    TaskRecord c;
    c.id = t.id;
    c.stage_id = t.stage_id;
    c.query_id = t.query_id;
    c.host_id = t.host_id;
    c.samples = Recut(t, cuts);
    c.start = lo;
    c.end = hi;
    out.tasks.push_back(std::move(c));
  }
  for (const HostProfile& h : trace.hosts) {
    HostProfile c;
    c.id = h.id;
    c.capacity = h.capacity;
    for (const TimeWindow& w : h.gc_windows) {
      const double lo = std::max(begin, w.begin);
      const double hi = std::min(end, w.end);
      if (hi > lo) c.gc_windows.push_back({lo, hi});
    }
    if (!h.counters.empty()) {
      std::vector<double> times = {begin};
      for (const SysCounterSample& s : h.counters) {
        if (s.time > begin && s.time < end) times.push_back(s.time);
      }
      times.push_back(end);
      for (double t : times) {
        SysCounterSample s;
        s.time = t;
        for (ResourceRequest r : kAllRequests) s.used[Index(r)] = Interpolate(h.counters, r, t);
        c.counters.push_back(std::move(s));
      }
    }
    out.hosts.push_back(std::move(c));
  }
  for (const KnownCause& k : trace.known_causes) {
    KnownCause c = k;
    c.windows.clear();
    for (const CauseWindow& w : k.windows) {
      const double lo = std::max(begin, w.begin);
      const double hi = std::min(end, w.end);
      if (hi <= lo) continue;
      const double len = w.end - w.begin;
      c.windows.push_back({lo, hi, len > 0.0 ? w.units * (hi - lo) / len : w.units});
    }
    if (!c.windows.empty()) out.known_causes.push_back(std::move(c));
  }
  out.Link();
  return out;
}

WorkloadTrace ResampleTrace(const WorkloadTrace& trace, double interval) {
  if (!(interval > 0.0)) throw std::invalid_argument("resample interval must be positive");
  WorkloadTrace out = trace;
  out.heartbeat_interval = interval;
  for (TaskRecord& t : out.tasks) {
    std::vector<double> cuts = {t.start};
    for (double k = std::floor(t.start / interval) + 1;; k += 1.0) {
      const double tick = k * interval;
      if (tick >= t.end - kBoundaryEpsilon) break;
      if (tick > t.start + kBoundaryEpsilon) cuts.push_back(tick);
    }
    cuts.push_back(t.end);
    t.samples = Recut(t, cuts);
  }
  out.Link();
  return out;
}

}  // namespace contendscope
