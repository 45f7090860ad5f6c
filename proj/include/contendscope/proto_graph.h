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

// Seven-level explanation graph. Impact flows from deep to shallow levels:
//
//   L6 source query -> L5 source stage -> L4 blame (stage, request, host,
//   source) -> L3 (stage, request, host) -> L2 (stage, class) -> L1 target
//   stage -> L0 target query
//
// Every edge runs from a node at level l+1 (a parent) to one at level l. The
// impact factor of an edge is the parent's share of the vertex contribution
// of all parents of the same child; the degree of responsibility of a node
// toward a target is the sum over paths to that target's L0 node of the
// product of impact factors.

#ifndef CONTENDSCOPE_PROTO_GRAPH_H
#define CONTENDSCOPE_PROTO_GRAPH_H

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "contendscope/blame.h"
#include "contendscope/trace.h"

namespace contendscope {

inline constexpr int kNumLevels = 7;

enum class TargetScope { kAll, kSingleStage, kLongestPath };

struct GraphConfig {
  // Empty sets mean "no filter".
  std::set<std::string> hosts;
  std::set<ResourceRequest> requests;
  std::set<std::string> source_users;

  TargetScope scope = TargetScope::kAll;
  std::string scope_stage;  // for kSingleStage

  // Use ratp_blocked for L2 as well as L3.
  bool blocked_at_l2 = false;
  // Tasks of the target's own query are not sources toward it.
  bool exclude_own_query = true;

  // VC of L0 and L6 nodes (and L5 through their query). Query weights win
  // over user weights; default 1.
  std::map<std::string, double> query_weights;
  std::map<std::string, double> user_weights;

  BlameConfig blame;
  unsigned threads = 0;
};

struct NodePayload {
  std::string query;  // target query, L0 to L4
  std::string stage;  // target stage, L1 to L4
  std::optional<ResourceClass> resource_class;  // L2 to L4
  std::optional<ResourceRequest> request;       // L3, L4
  std::string host;                             // L3, L4
  std::string source_stage;                     // L4, L5
  std::string source_query;                     // L4 to L6

  friend bool operator==(const NodePayload&, const NodePayload&) = default;
};

struct GraphNode {
  std::string id;
  int level = 0;
  NodePayload payload;
  double vc = 0.0;
  // Degree of responsibility toward each target query; zeros omitted.
  std::map<std::string, double> dor;

  // Edges with this node as `to` (from its parents, one level deeper).
  std::vector<std::size_t> in_edges;
  // Edges with this node as `from` (toward its children, one level up).
  std::vector<std::size_t> out_edges;

  double Dor(const std::string& target) const {
    auto it = dor.find(target);
    return it == dor.end() ? 0.0 : it->second;
  }
};

struct GraphEdge {
  std::size_t from = 0;  // level l+1
  std::size_t to = 0;    // level l
  double impact = 0.0;
};

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProtoGraph {
 public:
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  std::vector<std::string> targets;
  std::vector<std::string> notes;  // e.g. why a graph came out empty
  GraphConfig config;

  bool Empty() const { return nodes.empty(); }
  std::size_t Find(const std::string& id) const;
  std::size_t AddNode(GraphNode node);
  std::size_t AddEdge(std::size_t from, std::size_t to);
  // Sorts nodes by (level, id) and edges by (from, to), rebuilding adjacency.
  void Canonicalize();
  void RebuildAdjacency();
  std::vector<std::size_t> NodesAtLevel(int level) const;

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// Node ids: '|'-joined, level prefixed, e.g. "L3|s7|IoRead|h1".
std::string NodeId(int level, const NodePayload& p);

// Target stages selected by the scope for one query.
std::vector<std::size_t> ScopeStages(const WorkloadTrace& trace, std::size_t query,
                                     const GraphConfig& config);

// Builds the graph with VC set, then computes impact factors and DOR.
// Throws GraphError for unknown targets or a scope stage outside the target.
ProtoGraph BuildGraph(const WorkloadTrace& trace, const std::vector<std::string>& targets,
                      const GraphConfig& config = {});

// Same, reusing precomputed slices.
ProtoGraph BuildGraph(const WorkloadTrace& trace, const SliceIndex& slices,
                      const std::vector<std::string>& targets, const GraphConfig& config);

void ComputeImpactFactors(ProtoGraph* g);
// Requires impact factors. Targets are the L0 nodes' queries.
void ComputeDor(ProtoGraph* g);

}  // namespace contendscope

#endif  // CONTENDSCOPE_PROTO_GRAPH_H
