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

// Slowdown and blame between a target task and the sources that overlap it:
// concurrent tasks, per-host GC, registered known causes, and the synthetic
// Unknown source that absorbs usage no task accounts for.

#ifndef CONTENDSCOPE_BLAME_H
#define CONTENDSCOPE_BLAME_H

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "contendscope/intervals.h"
#include "contendscope/trace.h"

namespace contendscope {

inline constexpr char kUnknownName[] = "<Unknown>";
inline constexpr char kGcName[] = "<GC>";

// Label of a known cause when it acts as a source, e.g. "<known:rdd-storage>".
std::string KnownCauseLabel(const std::string& name);

struct SourceEntity {
  enum class Kind { kTask, kGc, kKnownCause, kUnknown };

  Kind kind = Kind::kUnknown;
  // Task index for kTask, host index for kGc, known_causes index for
  // kKnownCause, unused for kUnknown.
  std::size_t index = kNoIndex;

  static SourceEntity Task(std::size_t t) { return {Kind::kTask, t}; }
  static SourceEntity Gc(std::size_t host) { return {Kind::kGc, host}; }
  static SourceEntity Cause(std::size_t c) { return {Kind::kKnownCause, c}; }
  static SourceEntity Unknown() { return {Kind::kUnknown, kNoIndex}; }

  bool IsSynthetic() const { return kind != Kind::kTask; }
  // Task id, or the synthetic source name.
  std::string Label(const WorkloadTrace& trace) const;

  friend bool operator==(const SourceEntity&, const SourceEntity&) = default;
};

struct BlameTerm {
  SourceEntity source;
  std::size_t target_task = kNoIndex;
  ResourceRequest request = ResourceRequest::kSlotWait;
  std::size_t host = kNoIndex;
  double beta = 0.0;
  double overlap_seconds = 0.0;
};

enum class BlameForm { kBlocked, kFull };

struct BlameConfig {
  // Estimate the ideal ratp from observed slices when a host lacks capacity.
  bool estimate_ideal = true;
  // Nearest-rank percentile of positive ratp values used by the estimator.
  double ideal_percentile = 5.0;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SlowdownDecomposition {
  double slowdown = 0.0;    // measured, time-weighted over the task lifetime
  double concurrent = 0.0;  // sum over concurrent task sources
  double known = 0.0;       // GC plus registered known causes
  double unknown = 0.0;
  double Residual() const { return slowdown - (concurrent + known + unknown); }
};

// Max(0, (ratp - ideal) / ideal); NoDemand contributes 0.
double SlowdownValue(const RatpValue& ratp, double ideal_ratp);

class BlameEngine {
 public:
  BlameEngine(const WorkloadTrace& trace, const SliceIndex& slices, BlameConfig config = {});

  const WorkloadTrace& trace() const { return trace_; }
  const SliceIndex& slices() const { return slices_; }

  // Sources overlapping the target task for `request`: every concurrent task
  // on its host, the host's GC (CpuGc only, when the host has GC windows),
  // known causes registered for the request on the host, and Unknown.
  std::vector<SourceEntity> Sources(std::size_t target, ResourceRequest request) const;

  // Units acquired by the source within the target's slice, or nullopt when
  // the source is not present in the slice.
  std::optional<double> SourceAcquired(const SourceEntity& source, const IntervalSlice& slice,
                                       ResourceRequest request) const;

  // Cumulative syscounter reading at time t, linearly interpolated and held
  // flat outside the sampled range. nullopt when the host never reports
  // `request`.
  std::optional<double> CounterAt(std::size_t host, ResourceRequest request, double t) const;

  // Usage no task accounts for within [begin, end) on the host:
  // max(0, counter delta - sum of task RA). `tasks` lists every task present
  // in the window; their apportioned RA is read from the slice index.
  double UnaccountedResource(std::size_t host, ResourceRequest request, double begin,
                             double end, std::span<const std::size_t> tasks) const;
  double UnaccountedResource(const IntervalSlice& slice, ResourceRequest request) const;

  // Blocked-form blame: (1/T) sum over overlapping slices of
  // ratp_blocked(target) / ratp_max(source) * length.
  BlameTerm BlamePair(std::size_t target, const SourceEntity& source,
                      ResourceRequest request) const;
  // Unblocked form: ratp(target) / ratp(source) per slice. Synthetic sources,
  // and task sources with no recorded time, fall back to ratp_max.
  BlameTerm BlameFullForm(std::size_t target, const SourceEntity& source,
                          ResourceRequest request) const;

  // Calls fn(source, contribution) for every source slice contribution to the
  // blocked-form blame of `target`. Contributions of one source sum to its
  // BlamePair beta.
  void ForEachBlockedContribution(
      std::size_t target, ResourceRequest request,
      const std::function<void(const SourceEntity&, double)>& fn) const;

  // Ideal ratp for (host, request): 1/C with capacity, else the estimator.
  // Throws ConfigError when neither is available.
  double IdealRatp(std::size_t host, ResourceRequest request) const;
  double Slowdown(std::size_t target, ResourceRequest request) const;
  SlowdownDecomposition Decompose(std::size_t target, ResourceRequest request,
                                  BlameForm form = BlameForm::kFull) const;

  // Sum over tasks of target_stage on host of the blocked blame from every
  // task of source_stage.
  double StageBlame(std::size_t target_stage, std::size_t source_stage,
                    ResourceRequest request, std::size_t host) const;

 private:
  BlameTerm Blame(std::size_t target, const SourceEntity& source, ResourceRequest request,
                  BlameForm form) const;
  double SliceRatio(const IntervalSlice& slice, const SourceEntity& source,
                    ResourceRequest request, BlameForm form, double source_ra) const;

  const WorkloadTrace& trace_;
  const SliceIndex& slices_;
  BlameConfig config_;
  // Per host, per request: estimated ideal ratp (0 when unavailable).
  std::vector<PerRequest<double>> estimated_ideal_;
  // Per host, per request: (time, cumulative used) points.
  std::vector<PerRequest<std::vector<std::pair<double, double>>>> counters_;
};

}  // namespace contendscope

#endif  // CONTENDSCOPE_BLAME_H
