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

// Interval slicing of task lifetimes at concurrency events and heartbeats,
// piecewise-uniform apportioning of sample deltas, and the RATP family.

#ifndef CONTENDSCOPE_INTERVALS_H
#define CONTENDSCOPE_INTERVALS_H

#include <optional>
#include <span>
#include <vector>

#include "contendscope/trace.h"

namespace contendscope {

// Boundaries closer than this are one boundary.
inline constexpr double kBoundaryEpsilon = 1e-9;

struct IntervalSlice {
  std::size_t task = kNoIndex;
  std::size_t host = kNoIndex;
  double begin = 0.0;
  double end = 0.0;
  MetricVector metrics{};
  // Other tasks on the host whose lifetime covers this slice, ascending.
  std::vector<std::size_t> concurrent;

  double Length() const { return end - begin; }
  const RequestMetrics& operator[](ResourceRequest r) const { return metrics[Index(r)]; }
};

// nullopt is the NoDemand state (nothing acquired in the slice).
using RatpValue = std::optional<double>;

RatpValue Ratp(const RequestMetrics& m);
RatpValue RatpBlocked(const RequestMetrics& m);
RatpValue RatpMax(double length, double acquired);

inline RatpValue Ratp(const IntervalSlice& s, ResourceRequest r) { return Ratp(s[r]); }
inline RatpValue RatpBlocked(const IntervalSlice& s, ResourceRequest r) {
  return RatpBlocked(s[r]);
}
inline RatpValue RatpMax(const IntervalSlice& s, ResourceRequest r) {
  return RatpMax(s.Length(), s[r].acquired);
}

// Splits each sample window's deltas over the slices [boundaries[i],
// boundaries[i+1]) in proportion to time overlap. The first sample window
// opens at window_begin. A zero-length window lands in the slice holding its
// instant. Returns boundaries.size() - 1 vectors.
std::vector<MetricVector> Apportion(double window_begin,
                                    std::span<const MetricSample> samples,
                                    std::span<const double> boundaries);

// Host-wide boundary grid: every task start/end on the host plus heartbeat
// ticks across the host's active span, sorted with near-duplicates merged.
std::vector<double> HostGrid(const WorkloadTrace& trace, std::size_t host);

// Slice boundaries of one task drawn from its host grid.
std::vector<double> TaskBoundaries(const TaskRecord& task, std::span<const double> grid);

// Slices for every task on the host, in hosts[host].tasks order.
std::vector<std::vector<IntervalSlice>> BuildSlices(const WorkloadTrace& trace,
                                                    std::size_t host);

// Positive-length lifetime intersection of two tasks on the same host.
std::optional<TimeWindow> Overlap(const TaskRecord& tt, const TaskRecord& st);

// Slices of every task in the trace, built per host in parallel.
class SliceIndex {
 public:
  SliceIndex() = default;
  explicit SliceIndex(const WorkloadTrace& trace, unsigned threads = 0);

  std::span<const IntervalSlice> Of(std::size_t task) const { return by_task_[task]; }
  // The slice of `task` that starts at `begin` (within kBoundaryEpsilon), or
  // nullptr when the task has no slice there.
  const IntervalSlice* At(std::size_t task, double begin) const;
  std::size_t TotalSlices() const;

 private:
  std::vector<std::vector<IntervalSlice>> by_task_;
};

}  // namespace contendscope

#endif  // CONTENDSCOPE_INTERVALS_H
