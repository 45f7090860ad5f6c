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

#include "contendscope/intervals.h"

#include <algorithm>
#include <cmath>

#include "contendscope/parallel.h"

namespace contendscope {

RatpValue Ratp(const RequestMetrics& m) {
  if (!(m.acquired > 0.0)) return std::nullopt;
  return (m.wait + m.consume) / m.acquired;
}

RatpValue RatpBlocked(const RequestMetrics& m) {
  if (!(m.acquired > 0.0)) return std::nullopt;
  return m.wait / m.acquired;
}

RatpValue RatpMax(double length, double acquired) {
  if (!(acquired > 0.0)) return std::nullopt;
  return length / acquired;
}

std::vector<MetricVector> Apportion(double window_begin,
                                    std::span<const MetricSample> samples,
                                    std::span<const double> boundaries) {
  if (boundaries.size() < 2) return {};
  const std::size_t n = boundaries.size() - 1;
  std::vector<MetricVector> out(n);
  double prev = window_begin;
  std::size_t j = 0;
  for (const MetricSample& s : samples) {
    const double a = prev;
    const double b = s.time;
    prev = s.time;
    if (!(b > a)) {
      while (j + 1 < n && boundaries[j + 1] <= b) ++j;
      if (b < boundaries.front() || b > boundaries.back()) continue;
      for (std::size_t r = 0; r < kNumRequests; ++r) out[j][r] += s.metrics[r];
      continue;
    }
    const double len = b - a;
    while (j + 1 < n && boundaries[j + 1] <= a) ++j;
    for (std::size_t k = j; k < n && boundaries[k] < b; ++k) {
      const double lo = std::max(boundaries[k], a);
      const double hi = std::min(boundaries[k + 1], b);
      if (!(hi > lo)) continue;
      const double f = (hi - lo) / len;
      for (std::size_t r = 0; r < kNumRequests; ++r) {
        const RequestMetrics& m = s.metrics[r];
        out[k][r] += RequestMetrics{m.wait * f, m.consume * f, m.acquired * f};
      }
    }
  }
  return out;
}

std::vector<double> HostGrid(const WorkloadTrace& trace, std::size_t host) {
  std::vector<double> points;
  const std::vector<std::size_t>& tasks = trace.hosts[host].tasks;
  if (tasks.empty()) return points;
  double lo = trace.tasks[tasks.front()].start;
  double hi = trace.tasks[tasks.front()].end;
  points.reserve(2 * tasks.size());
  for (std::size_t t : tasks) {
    points.push_back(trace.tasks[t].start);
    points.push_back(trace.tasks[t].end);
    lo = std::min(lo, trace.tasks[t].start);
    hi = std::max(hi, trace.tasks[t].end);
  }
  const double hb = trace.heartbeat_interval;
  if (hb > 0.0) {
    for (double k = std::ceil(lo / hb); k * hb <= hi; k += 1.0) points.push_back(k * hb);
  }
  std::sort(points.begin(), points.end());
  std::vector<double> grid;
  grid.reserve(points.size());
  for (double p : points) {
    if (grid.empty() || p - grid.back() > kBoundaryEpsilon) grid.push_back(p);
  }
  return grid;
}

std::vector<double> TaskBoundaries(const TaskRecord& task, std::span<const double> grid) {
  std::vector<double> out{task.start};
  auto it = std::upper_bound(grid.begin(), grid.end(), task.start + kBoundaryEpsilon);
  for (; it != grid.end() && *it < task.end - kBoundaryEpsilon; ++it) out.push_back(*it);
  out.push_back(task.end);
  return out;
}

std::vector<std::vector<IntervalSlice>> BuildSlices(const WorkloadTrace& trace,
                                                    std::size_t host) {
  const std::vector<std::size_t>& tasks = trace.hosts[host].tasks;
  const std::vector<double> grid = HostGrid(trace, host);

  std::vector<std::size_t> by_start(tasks);
  std::sort(by_start.begin(), by_start.end(), [&](std::size_t a, std::size_t b) {
    return trace.tasks[a].start < trace.tasks[b].start ||
           (trace.tasks[a].start == trace.tasks[b].start && a < b);
  });

  std::vector<std::vector<IntervalSlice>> out;
  out.reserve(tasks.size());
  std::vector<std::size_t> candidates;
  for (std::size_t t : tasks) {
    const TaskRecord& task = trace.tasks[t];
    const std::vector<double> bounds = TaskBoundaries(task, grid);
    std::vector<MetricVector> metrics = Apportion(task.start, task.samples, bounds);

    candidates.clear();
    for (std::size_t c : by_start) {
      const TaskRecord& other = trace.tasks[c];
      if (other.start >= task.end - kBoundaryEpsilon) break;
      if (c != t && other.end > task.start + kBoundaryEpsilon) candidates.push_back(c);
    }
    std::sort(candidates.begin(), candidates.end());

    std::vector<IntervalSlice> slices(metrics.size());
    for (std::size_t i = 0; i < slices.size(); ++i) {
      IntervalSlice& s = slices[i];
      s.task = t;
      s.host = host;
      s.begin = bounds[i];
      s.end = bounds[i + 1];
      s.metrics = metrics[i];
      const double mid = 0.5 * (s.begin + s.end);
      for (std::size_t c : candidates) {
        if (trace.tasks[c].start < mid && mid < trace.tasks[c].end) s.concurrent.push_back(c);
      }
    }
    out.push_back(std::move(slices));
  }
  return out;
}

std::optional<TimeWindow> Overlap(const TaskRecord& tt, const TaskRecord& st) {
  if (tt.host_id != st.host_id) return std::nullopt;
  const double lo = std::max(tt.start, st.start);
  const double hi = std::min(tt.end, st.end);
  if (!(hi - lo > kBoundaryEpsilon)) return std::nullopt;
  return TimeWindow{lo, hi};
}

SliceIndex::SliceIndex(const WorkloadTrace& trace, unsigned threads)
    : by_task_(trace.tasks.size()) {
  ParallelFor(trace.hosts.size(), threads, [&](std::size_t h) {
    std::vector<std::vector<IntervalSlice>> slices = BuildSlices(trace, h);
    const std::vector<std::size_t>& tasks = trace.hosts[h].tasks;
    for (std::size_t i = 0; i < tasks.size(); ++i) by_task_[tasks[i]] = std::move(slices[i]);
  });
}

const IntervalSlice* SliceIndex::At(std::size_t task, double begin) const {
  const std::vector<IntervalSlice>& slices = by_task_[task];
  auto it = std::lower_bound(
      slices.begin(), slices.end(), begin - kBoundaryEpsilon,
      [](const IntervalSlice& s, double v) { return s.begin < v; });
  if (it == slices.end() || it->begin > begin + kBoundaryEpsilon) return nullptr;
  return &*it;
}

std::size_t SliceIndex::TotalSlices() const {
  std::size_t n = 0;
  for (const auto& v : by_task_) n += v.size();
  return n;
}

}  // namespace contendscope
