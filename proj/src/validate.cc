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

#include "contendscope/validate.h"

#include <cmath>
#include <sstream>

namespace contendscope {

namespace {

std::string Num(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

void CheckTask(const TaskRecord& t, std::vector<Violation>* out) {
  const std::string entity = "task:" + t.id;
  if (!(t.start < t.end)) {
    out->push_back({entity, "task-lifetime",
                    "start " + Num(t.start) + " is not before end " + Num(t.end)});
  }
  double prev = t.start;
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    const MetricSample& s = t.samples[i];
    if (i > 0 && !(s.time > t.samples[i - 1].time)) {
      out->push_back({entity, "sample-order",
                      "sample " + std::to_string(i) + " at " + Num(s.time) +
                          " does not follow " + Num(t.samples[i - 1].time)});
    }
    if (s.time < t.start || s.time > t.end) {
      out->push_back({entity, "sample-range",
                      "sample at " + Num(s.time) + " outside task lifetime"});
    }
    double elapsed = s.time - prev;
    for (ResourceRequest r : kAllRequests) {
      const RequestMetrics& m = s.metrics[Index(r)];
      if (m.wait < 0.0 || m.consume < 0.0 || m.acquired < 0.0) {
        out->push_back({entity, "sample-negative",
                        "negative delta for " + std::string(Name(r)) + " at " +
                            Num(s.time)});
      }
      if (elapsed >= 0.0 && m.wait + m.consume > elapsed + kSampleTimeTolerance) {
        out->push_back({entity, "sample-time-budget",
                        std::string(Name(r)) + " WT+CT " + Num(m.wait + m.consume) +
                            " exceeds window " + Num(elapsed) + " at " + Num(s.time)});
      }
    }
    prev = s.time;
  }
  if (!t.samples.empty() && t.samples.back().time != t.end) {
    out->push_back({entity, "sample-last",
                    "last sample at " + Num(t.samples.back().time) +
                        " but task ends at " + Num(t.end)});
  }
}

// Iterative three-colour DFS over stage parent edges. Reports each cycle once
// with the stages along it.
void CheckStageCycles(const WorkloadTrace& trace, std::vector<Violation>* out) {
  const std::size_t n = trace.stages.size();
  enum Colour : unsigned char { kWhite, kGrey, kBlack };
  std::vector<Colour> colour(n, kWhite);
  std::vector<std::size_t> path;
  std::vector<std::size_t> next_edge;
  for (std::size_t root = 0; root < n; ++root) {
    if (colour[root] != kWhite) continue;
    path.assign(1, root);
    next_edge.assign(1, 0);
    colour[root] = kGrey;
    while (!path.empty()) {
      std::size_t u = path.back();
      const std::vector<std::size_t>& parents = trace.stages[u].parents;
      if (next_edge.back() == parents.size()) {
        colour[u] = kBlack;
        path.pop_back();
        next_edge.pop_back();
        continue;
      }
      std::size_t v = parents[next_edge.back()++];
      if (colour[v] == kWhite) {
        colour[v] = kGrey;
        path.push_back(v);
        next_edge.push_back(0);
      } else if (colour[v] == kGrey) {
        std::string members;
        bool in_cycle = false;
        for (std::size_t s : path) {
          if (s == v) in_cycle = true;
          if (!in_cycle) continue;
          if (!members.empty()) members += " -> ";
          members += trace.stages[s].id;
        }
        members += " -> " + trace.stages[v].id;
        out->push_back({"stage:" + trace.stages[v].id, "stage-cycle",
                        "cycle " + members});
      }
    }
  }
}

void CheckHost(const HostProfile& h, std::vector<Violation>* out) {
  const std::string entity = "host:" + h.id;
  for (ResourceRequest r : kAllRequests) {
    const auto& c = h.capacity[Index(r)];
    if (c && !(*c > 0.0)) {
      out->push_back({entity, "host-capacity",
                      std::string(Name(r)) + " capacity " + Num(*c) + " is not positive"});
    }
  }
  for (std::size_t i = 1; i < h.counters.size(); ++i) {
    const SysCounterSample& a = h.counters[i - 1];
    const SysCounterSample& b = h.counters[i];
    if (b.time < a.time) {
      out->push_back({entity, "counter-order",
                      "counter at " + Num(b.time) + " precedes " + Num(a.time)});
    }
    for (ResourceRequest r : kAllRequests) {
      const auto& va = a.used[Index(r)];
      const auto& vb = b.used[Index(r)];
      if (va && vb && *vb < *va) {
        out->push_back({entity, "counter-monotone",
                        std::string(Name(r)) + " counter decreases at " + Num(b.time)});
      }
    }
  }
  for (const TimeWindow& w : h.gc_windows) {
    if (!(w.begin < w.end)) {
      out->push_back({entity, "gc-window", "gc window [" + Num(w.begin) + ", " +
                                               Num(w.end) + "] is empty"});
    }
  }
}

}  // namespace

std::vector<Violation> Validate(const WorkloadTrace& trace) {
  std::vector<Violation> out;
  for (const TaskRecord& t : trace.tasks) {
    CheckTask(t, &out);
    if (t.stage != kNoIndex && trace.stages[t.stage].query_id != t.query_id) {
      out.push_back({"task:" + t.id, "task-query-mismatch",
                     "task query '" + t.query_id + "' differs from stage query '" +
                         trace.stages[t.stage].query_id + "'"});
    }
  }
  CheckStageCycles(trace, &out);
  for (const HostProfile& h : trace.hosts) CheckHost(h, &out);
  for (const KnownCause& c : trace.known_causes) {
    for (const CauseWindow& w : c.windows) {
      if (!(w.begin < w.end) || w.units < 0.0) {
        out.push_back({"cause:" + c.name, "cause-window",
                       "window [" + Num(w.begin) + ", " + Num(w.end) + "] units " +
                           Num(w.units) + " is invalid"});
      }
    }
  }
  return out;
}

}  // namespace contendscope
