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

// Queries over a computed graph (top-k explanations, aggressive sources,
// slow hosts, hot resources), the overlap and blocked-time baselines, and
// windowed re-analysis. Every ranked output orders by descending score, then
// ascending id.

#ifndef CONTENDSCOPE_ANALYSIS_H
#define CONTENDSCOPE_ANALYSIS_H

#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "contendscope/proto_graph.h"

namespace contendscope {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One impact path L6 -> L0 toward target query tq.
struct Explanation {
  std::string tq;
  std::string ts;
  ResourceClass res = ResourceClass::kCpu;
  ResourceRequest res_prime = ResourceRequest::kCpuOsSched;
  std::string host;
  std::string ss;
  std::string sq;
  double p = 0.0;  // product of impact factors along the path

  // The seven fields joined with '|'; the tie-break key.
  std::string PathId() const;
};

// Fields an explanation must match; unset fields are free.
struct ExplanationFix {
  std::optional<std::string> ts;
  std::optional<ResourceClass> res;
  std::optional<ResourceRequest> res_prime;
  std::optional<std::string> host;
  std::optional<std::string> ss;
  std::optional<std::string> sq;

  // Parses "field=value[,field=value...]" with fields ts, res, res', host,
  // ss, sq. Throws AnalysisError on unknown fields or values.
  static ExplanationFix Parse(const std::string& spec);
};

struct RankedEntry {
  std::string id;
  double score = 0.0;
};

struct RankedList {
  std::vector<RankedEntry> entries;
  std::size_t k = 0;
};

// Sorts by score descending, id ascending, and truncates to k (0 keeps all).
RankedList Rank(std::map<std::string, double> scores, std::size_t k = 0);

// Throws AnalysisError for an unknown target or k <= 0.
std::vector<Explanation> TopKExplanations(const ProtoGraph& g, const std::string& target,
                                          int k, const ExplanationFix& fix = {});

// L6 sources by total DOR over the targets, each target weighted by its L0
// VC. Throws AnalysisError for k <= 0.
RankedList AggressiveSources(const ProtoGraph& g, int k);

// Hosts by the summed impact factor of edges leaving their L3 nodes. With
// `weighted`, sums the L3 nodes' DOR over all targets instead.
RankedList SlowNodes(const ProtoGraph& g, bool weighted = false);

enum class HotGranularity { kClass, kRequest };

// Classes by summed L2 -> L1 impact factor, or requests by summed
// IF(L3 -> L2) * IF(L2 -> L1).
RankedList HotResources(const ProtoGraph& g, HotGranularity granularity);

// Wall-clock overlap of every other query's lifetime with the target's.
RankedList NaiveOverlap(const WorkloadTrace& trace, const std::string& target);
// Sum over same-host (target task, other task) pairs of overlap seconds.
RankedList DeepOverlap(const WorkloadTrace& trace, const std::string& target);

struct BlockedTimeReport {
  std::string query;
  std::map<std::string, PerRequest<double>> stages;
  PerRequest<double> total{};
};
// Wait time per request summed over the target's tasks, by stage and total.
BlockedTimeReport BlockedTime(const WorkloadTrace& trace, const std::string& target);

struct WindowShares {
  double begin = 0.0;
  double end = 0.0;
  // L6 DOR toward the target within the window; empty when the target has
  // no activity there.
  std::map<std::string, double> shares;
};

// Rebuilds the graph on the trace clipped to each window. Throws
// AnalysisError for an unknown target or windows that are empty or fall
// outside the trace span.
std::vector<WindowShares> WindowedAnalysis(const WorkloadTrace& trace, const std::string& target,
                                           const std::vector<TimeWindow>& windows,
                                           const GraphConfig& config = {});

// Report encodings.
nlohmann::ordered_json ToJson(const std::vector<Explanation>& rows);
nlohmann::ordered_json ToJson(const RankedList& list);
nlohmann::ordered_json ToJson(const BlockedTimeReport& report);
nlohmann::ordered_json ToJson(const std::vector<WindowShares>& windows);
void WriteCsv(const std::vector<Explanation>& rows, std::ostream& out);
void WriteCsv(const RankedList& list, std::ostream& out);
void WriteCsv(const BlockedTimeReport& report, std::ostream& out);
void WriteCsv(const std::vector<WindowShares>& windows, std::ostream& out);

}  // namespace contendscope

#endif  // CONTENDSCOPE_ANALYSIS_H
