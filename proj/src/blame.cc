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

#include "contendscope/blame.h"

#include <algorithm>
#include <cmath>

namespace contendscope {

namespace {

// Unaccounted usage below this fraction of the compared totals is float
// residue, not an unknown consumer.
constexpr double kUnaccountedRelativeFloor = 1e-9;

double WindowOverlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

// RA of `task` within [begin, end), assuming uniform rates inside each slice.
double AcquiredWithin(std::span<const IntervalSlice> slices, ResourceRequest r, double begin,
                      double end) {
  auto it = std::upper_bound(slices.begin(), slices.end(), begin,
                             [](double v, const IntervalSlice& s) { return v < s.end; });
  double total = 0.0;
  for (; it != slices.end() && it->begin < end; ++it) {
    const double ov = WindowOverlap(it->begin, it->end, begin, end);
    if (ov <= 0.0) continue;
    const double len = it->Length();
    total += ov >= len ? (*it)[r].acquired : (*it)[r].acquired * (ov / len);
  }
  return total;
}

}  // namespace

std::string KnownCauseLabel(const std::string& name) { return "<known:" + name + ">"; }

std::string SourceEntity::Label(const WorkloadTrace& trace) const {
  switch (kind) {
    case Kind::kTask:
      return trace.tasks[index].id;
    case Kind::kGc:
      return kGcName;
    case Kind::kKnownCause:
      return KnownCauseLabel(trace.known_causes[index].name);
    case Kind::kUnknown:
      return kUnknownName;
  }
  return kUnknownName;
}

double SlowdownValue(const RatpValue& ratp, double ideal_ratp) {
  if (!ratp) return 0.0;
  return std::max(0.0, (*ratp - ideal_ratp) / ideal_ratp);
}

BlameEngine::BlameEngine(const WorkloadTrace& trace, const SliceIndex& slices,
                         BlameConfig config)
    : trace_(trace),
      slices_(slices),
      config_(config),
      estimated_ideal_(trace.hosts.size()),
      counters_(trace.hosts.size()) {
  for (std::size_t h = 0; h < trace.hosts.size(); ++h) {
    const HostProfile& host = trace.hosts[h];
    for (const SysCounterSample& c : host.counters) {
      for (std::size_t r = 0; r < kNumRequests; ++r) {
        if (c.used[r]) counters_[h][r].emplace_back(c.time, *c.used[r]);
      }
    }
    estimated_ideal_[h].fill(0.0);
    if (!config_.estimate_ideal) continue;
    for (std::size_t r = 0; r < kNumRequests; ++r) {
      if (host.capacity[r]) continue;
      std::vector<double> values;
      for (std::size_t t : host.tasks) {
        for (const IntervalSlice& s : slices_.Of(t)) {
          RatpValue v = Ratp(s.metrics[r]);
          if (v && *v > 0.0) values.push_back(*v);
        }
      }
      if (values.empty()) continue;
      std::sort(values.begin(), values.end());
      const double rank = std::ceil(config_.ideal_percentile / 100.0 * values.size());
      const std::size_t idx = rank < 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
      estimated_ideal_[h][r] = values[std::min(idx, values.size() - 1)];
    }
  }
}

std::vector<SourceEntity> BlameEngine::Sources(std::size_t target,
                                               ResourceRequest request) const {
  std::vector<std::size_t> tasks;
  for (const IntervalSlice& s : slices_.Of(target)) {
    tasks.insert(tasks.end(), s.concurrent.begin(), s.concurrent.end());
  }
  std::sort(tasks.begin(), tasks.end());
  tasks.erase(std::unique(tasks.begin(), tasks.end()), tasks.end());

  std::vector<SourceEntity> out;
  out.reserve(tasks.size() + 2);
  for (std::size_t t : tasks) out.push_back(SourceEntity::Task(t));
  const std::size_t host = trace_.tasks[target].host;
  if (request == ResourceRequest::kCpuGc && !trace_.hosts[host].gc_windows.empty()) {
    out.push_back(SourceEntity::Gc(host));
  }
  for (std::size_t c = 0; c < trace_.known_causes.size(); ++c) {
    const KnownCause& cause = trace_.known_causes[c];
    if (cause.host == host && cause.request == request) out.push_back(SourceEntity::Cause(c));
  }
  out.push_back(SourceEntity::Unknown());
  return out;
}

std::optional<double> BlameEngine::SourceAcquired(const SourceEntity& source,
                                                  const IntervalSlice& slice,
                                                  ResourceRequest request) const {
  switch (source.kind) {
    case SourceEntity::Kind::kTask: {
      if (!std::binary_search(slice.concurrent.begin(), slice.concurrent.end(), source.index)) {
        return std::nullopt;
      }
      const IntervalSlice* other = slices_.At(source.index, slice.begin);
      if (other == nullptr) return std::nullopt;
      return (*other)[request].acquired;
    }
    case SourceEntity::Kind::kGc: {
      if (request != ResourceRequest::kCpuGc || source.index != slice.host) return std::nullopt;
      double active = 0.0;
      for (const TimeWindow& w : trace_.hosts[slice.host].gc_windows) {
        active += WindowOverlap(w.begin, w.end, slice.begin, slice.end);
      }
      if (!(active > 0.0)) return std::nullopt;
      return active;
    }
    case SourceEntity::Kind::kKnownCause: {
      const KnownCause& cause = trace_.known_causes[source.index];
      if (cause.request != request || cause.host != slice.host) return std::nullopt;
      double units = 0.0;
      bool present = false;
      for (const CauseWindow& w : cause.windows) {
        const double ov = WindowOverlap(w.begin, w.end, slice.begin, slice.end);
        if (ov <= 0.0 || !(w.end > w.begin)) continue;
        present = true;
        units += w.units * ov / (w.end - w.begin);
      }
      if (!present) return std::nullopt;
      return units;
    }
    case SourceEntity::Kind::kUnknown:
      return UnaccountedResource(slice, request);
  }
  return std::nullopt;
}

std::optional<double> BlameEngine::CounterAt(std::size_t host, ResourceRequest request,
                                             double t) const {
  const auto& series = counters_[host][Index(request)];
  if (series.empty()) return std::nullopt;
  if (t <= series.front().first) return series.front().second;
  if (t >= series.back().first) return series.back().second;
  auto hi = std::upper_bound(series.begin(), series.end(), t,
                             [](double v, const auto& p) { return v < p.first; });
  auto lo = hi - 1;
  const double span = hi->first - lo->first;
  if (!(span > 0.0)) return hi->second;
  return lo->second + (hi->second - lo->second) * ((t - lo->first) / span);
}

double BlameEngine::UnaccountedResource(std::size_t host, ResourceRequest request,
                                        double begin, double end,
                                        std::span<const std::size_t> tasks) const {
  std::optional<double> u0 = CounterAt(host, request, begin);
  if (!u0) return 0.0;
  const double used = *CounterAt(host, request, end) - *u0;
  double acquired = 0.0;
  for (std::size_t t : tasks) acquired += AcquiredWithin(slices_.Of(t), request, begin, end);
  const double residue = used - acquired;
  if (residue <= kUnaccountedRelativeFloor * std::max(std::abs(used), acquired)) return 0.0;
  return residue;
}

double BlameEngine::UnaccountedResource(const IntervalSlice& slice,
                                        ResourceRequest request) const {
  if (counters_[slice.host][Index(request)].empty()) return 0.0;
  std::vector<std::size_t> tasks(slice.concurrent);
  tasks.push_back(slice.task);
  return UnaccountedResource(slice.host, request, slice.begin, slice.end, tasks);
}

double BlameEngine::SliceRatio(const IntervalSlice& slice, const SourceEntity& source,
                               ResourceRequest request, BlameForm form,
                               double source_ra) const {
  const RequestMetrics& tt = slice[request];
  if (!(tt.acquired > 0.0) || !(source_ra > 0.0)) return 0.0;
  const double len = slice.Length();
  if (form == BlameForm::kBlocked) {
    if (!(tt.wait > 0.0)) return 0.0;
    // ratp_blocked(tt) / ratp_max(src) = (WT / RA_tt) / (len / RA_src).
    return (tt.wait / tt.acquired) * (source_ra / len);
  }
  const double tt_ratp = (tt.wait + tt.consume) / tt.acquired;
  if (!(tt_ratp > 0.0)) return 0.0;
  // A source cannot have spent more than the slice length on the request.
  double src_time = len;
  if (source.kind == SourceEntity::Kind::kTask) {
    if (const IntervalSlice* other = slices_.At(source.index, slice.begin)) {
      const RequestMetrics& m = (*other)[request];
      const double spent = m.wait + m.consume;
      if (spent > 0.0) src_time = std::min(spent, len);
    }
  }
  return tt_ratp / (src_time / source_ra);
}

BlameTerm BlameEngine::Blame(std::size_t target, const SourceEntity& source,
                             ResourceRequest request, BlameForm form) const {
  const TaskRecord& tt = trace_.tasks[target];
  BlameTerm term;
  term.source = source;
  term.target_task = target;
  term.request = request;
  term.host = tt.host;
  if (source.kind == SourceEntity::Kind::kTask && source.index == target) return term;
  double sum = 0.0;
  for (const IntervalSlice& s : slices_.Of(target)) {
    std::optional<double> ra = SourceAcquired(source, s, request);
    if (!ra) continue;
    term.overlap_seconds += s.Length();
    sum += SliceRatio(s, source, request, form, *ra) * s.Length();
  }
  term.beta = sum / tt.Duration();
  return term;
}

BlameTerm BlameEngine::BlamePair(std::size_t target, const SourceEntity& source,
                                 ResourceRequest request) const {
  return Blame(target, source, request, BlameForm::kBlocked);
}

BlameTerm BlameEngine::BlameFullForm(std::size_t target, const SourceEntity& source,
                                     ResourceRequest request) const {
  return Blame(target, source, request, BlameForm::kFull);
}

void BlameEngine::ForEachBlockedContribution(
    std::size_t target, ResourceRequest request,
    const std::function<void(const SourceEntity&, double)>& fn) const {
  const TaskRecord& tt = trace_.tasks[target];
  const double duration = tt.Duration();
  const std::size_t host = tt.host;
  std::vector<SourceEntity> synthetic;
  if (request == ResourceRequest::kCpuGc && !trace_.hosts[host].gc_windows.empty()) {
    synthetic.push_back(SourceEntity::Gc(host));
  }
  for (std::size_t c = 0; c < trace_.known_causes.size(); ++c) {
    const KnownCause& cause = trace_.known_causes[c];
    if (cause.host == host && cause.request == request) synthetic.push_back(SourceEntity::Cause(c));
  }
  synthetic.push_back(SourceEntity::Unknown());

  for (const IntervalSlice& s : slices_.Of(target)) {
    const RequestMetrics& m = s[request];
    if (!(m.wait > 0.0) || !(m.acquired > 0.0)) continue;
    const double weight = s.Length() / duration;
    for (std::size_t c : s.concurrent) {
      const IntervalSlice* other = slices_.At(c, s.begin);
      if (other == nullptr) continue;
      const SourceEntity src = SourceEntity::Task(c);
      const double ratio = SliceRatio(s, src, request, BlameForm::kBlocked, (*other)[request].acquired);
      if (ratio > 0.0) fn(src, ratio * weight);
    }
    for (const SourceEntity& src : synthetic) {
      std::optional<double> ra = SourceAcquired(src, s, request);
      if (!ra) continue;
      const double ratio = SliceRatio(s, src, request, BlameForm::kBlocked, *ra);
      if (ratio > 0.0) fn(src, ratio * weight);
    }
  }
}

double BlameEngine::IdealRatp(std::size_t host, ResourceRequest request) const {
  const HostProfile& h = trace_.hosts[host];
  if (const auto& c = h.capacity[Index(request)]) return 1.0 / *c;
  if (!config_.estimate_ideal) {
    throw ConfigError("host '" + h.id + "' has no " + std::string(Name(request)) +
                      " capacity and ideal estimation is disabled");
  }
  const double est = estimated_ideal_[host][Index(request)];
  if (!(est > 0.0)) {
    throw ConfigError("host '" + h.id + "' has no " + std::string(Name(request)) +
                      " capacity and no observations to estimate it");
  }
  return est;
}

double BlameEngine::Slowdown(std::size_t target, ResourceRequest request) const {
  const TaskRecord& tt = trace_.tasks[target];
  double sum = 0.0;
  std::optional<double> ideal;
  for (const IntervalSlice& s : slices_.Of(target)) {
    RatpValue v = Ratp(s, request);
    if (!v) continue;
    if (!ideal) ideal = IdealRatp(tt.host, request);
    sum += SlowdownValue(v, *ideal) * s.Length();
  }
  return sum / tt.Duration();
}

SlowdownDecomposition BlameEngine::Decompose(std::size_t target, ResourceRequest request,
                                             BlameForm form) const {
  SlowdownDecomposition d;
  d.slowdown = Slowdown(target, request);
  for (const SourceEntity& src : Sources(target, request)) {
    const double beta = Blame(target, src, request, form).beta;
    switch (src.kind) {
      case SourceEntity::Kind::kTask:
        d.concurrent += beta;
        break;
      case SourceEntity::Kind::kGc:
      case SourceEntity::Kind::kKnownCause:
        d.known += beta;
        break;
      case SourceEntity::Kind::kUnknown:
        d.unknown += beta;
        break;
    }
  }
  return d;
}

double BlameEngine::StageBlame(std::size_t target_stage, std::size_t source_stage,
                               ResourceRequest request, std::size_t host) const {
  double total = 0.0;
  for (std::size_t t : trace_.stages[target_stage].tasks) {
    if (trace_.tasks[t].host != host) continue;
    ForEachBlockedContribution(t, request, [&](const SourceEntity& src, double v) {
      if (src.kind == SourceEntity::Kind::kTask &&
          trace_.tasks[src.index].stage == source_stage) {
        total += v;
      }
    });
  }
  return total;
}

}  // namespace contendscope
