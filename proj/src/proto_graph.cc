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

#include "contendscope/proto_graph.h"

#include <algorithm>
#include <numeric>

#include "contendscope/parallel.h"

namespace contendscope {

namespace {

struct SourceKey {
  std::string stage;  // source stage id or synthetic label
  std::string query;  // source query id or synthetic label
  auto operator<=>(const SourceKey&) const = default;
};

struct BlameKey {
  ResourceRequest request;
  std::size_t host;
  SourceKey source;
  auto operator<=>(const BlameKey&) const = default;
};

// Everything below one target stage (levels 1 to 4).
struct StageSubgraph {
  std::size_t query = kNoIndex;
  std::size_t stage = kNoIndex;
  std::vector<std::size_t> hosts;
  PerRequest<std::vector<double>> l3_vc;  // per request, per entry of hosts
  std::array<double, kNumResourceClasses> l2_vc{};
  std::map<BlameKey, double> l4_vc;
};

double Weight(const GraphConfig& config, const std::string& query, const std::string& user) {
  if (auto it = config.query_weights.find(query); it != config.query_weights.end()) {
    return it->second;
  }
  if (auto it = config.user_weights.find(user); it != config.user_weights.end()) {
    return it->second;
  }
  return 1.0;
}

std::vector<std::size_t> LongestPath(const WorkloadTrace& trace, std::size_t query) {
  const std::vector<std::size_t>& stages = trace.queries[query].stages;
  std::unordered_map<std::size_t, double> duration;
  for (std::size_t s : stages) {
    const std::vector<std::size_t>& tasks = trace.stages[s].tasks;
    if (tasks.empty()) {
      duration[s] = 0.0;
      continue;
    }
    double lo = trace.tasks[tasks.front()].start;
    double hi = trace.tasks[tasks.front()].end;
    for (std::size_t t : tasks) {
      lo = std::min(lo, trace.tasks[t].start);
      hi = std::max(hi, trace.tasks[t].end);
    }
    duration[s] = hi - lo;
  }
  // Memoised longest weighted chain ending at each stage (stage DAG is acyclic
  // for validated traces).
  std::unordered_map<std::size_t, double> best;
  std::unordered_map<std::size_t, std::size_t> via;
  std::function<double(std::size_t)> solve = [&](std::size_t s) -> double {
    if (auto it = best.find(s); it != best.end()) return it->second;
    best[s] = duration[s];  // guards against cycles in unvalidated traces
    double top = 0.0;
    std::size_t pick = kNoIndex;
    for (std::size_t p : trace.stages[s].parents) {
      if (trace.stages[p].query != query) continue;
      const double v = solve(p);
      if (pick == kNoIndex || v > top || (v == top && trace.stages[p].id < trace.stages[pick].id)) {
        top = v;
        pick = p;
      }
    }
    via[s] = pick;
    return best[s] = duration[s] + top;
  };
  std::size_t end = kNoIndex;
  double longest = -1.0;
  for (std::size_t s : stages) {
    const double v = solve(s);
    if (end == kNoIndex || v > longest ||
        (v == longest && trace.stages[s].id < trace.stages[end].id)) {
      longest = v;
      end = s;
    }
  }
  std::vector<std::size_t> path;
  for (std::size_t s = end; s != kNoIndex; s = via[s]) {
    path.push_back(s);
    if (path.size() > stages.size()) break;
  }
  std::sort(path.begin(), path.end());
  return path;
}

StageSubgraph BuildStage(const WorkloadTrace& trace, const BlameEngine& engine,
                         const GraphConfig& config, const std::vector<ResourceRequest>& requests,
                         const std::vector<bool>& host_allowed, std::size_t query,
                         std::size_t stage) {
  StageSubgraph sub;
  sub.query = query;
  sub.stage = stage;
  for (std::size_t t : trace.stages[stage].tasks) {
    if (host_allowed[trace.tasks[t].host]) sub.hosts.push_back(trace.tasks[t].host);
  }
  std::sort(sub.hosts.begin(), sub.hosts.end());
  sub.hosts.erase(std::unique(sub.hosts.begin(), sub.hosts.end()), sub.hosts.end());
  for (ResourceRequest r : requests) sub.l3_vc[Index(r)].assign(sub.hosts.size(), 0.0);

  const std::string& own_query = trace.queries[query].id;
  for (std::size_t t : trace.stages[stage].tasks) {
    const TaskRecord& task = trace.tasks[t];
    if (!host_allowed[task.host]) continue;
    const std::size_t hpos =
        std::lower_bound(sub.hosts.begin(), sub.hosts.end(), task.host) - sub.hosts.begin();
    for (ResourceRequest r : requests) {
      double l2 = 0.0;
      double l3 = 0.0;
      for (const IntervalSlice& s : engine.slices().Of(t)) {
        const RatpValue full = Ratp(s, r);
        const RatpValue blocked = RatpBlocked(s, r);
        if (blocked) l3 += *blocked * s.Length();
        const RatpValue& l2v = config.blocked_at_l2 ? blocked : full;
        if (l2v) l2 += *l2v * s.Length();
      }
      sub.l2_vc[Index(ClassOf(r))] += l2;
      sub.l3_vc[Index(r)][hpos] += l3;

      engine.ForEachBlockedContribution(t, r, [&](const SourceEntity& src, double v) {
        SourceKey key;
        if (src.kind == SourceEntity::Kind::kTask) {
          const TaskRecord& st = trace.tasks[src.index];
          const QueryRecord& sq = trace.queries[st.query];
          if (config.exclude_own_query && sq.id == own_query) return;
          if (!config.source_users.empty() && !config.source_users.contains(sq.user)) return;
          key = {trace.stages[st.stage].id, sq.id};
        } else {
          const std::string label = src.Label(trace);
          key = {label, label};
        }
        sub.l4_vc[BlameKey{r, task.host, std::move(key)}] += v;
      });
    }
  }
  return sub;
}

}  // namespace

std::size_t ProtoGraph::Find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? kNoIndex : it->second;
}

std::size_t ProtoGraph::AddNode(GraphNode node) {
  auto [it, inserted] = index_.emplace(node.id, nodes.size());
  if (inserted) nodes.push_back(std::move(node));
  return it->second;
}

std::size_t ProtoGraph::AddEdge(std::size_t from, std::size_t to) {
  edges.push_back({from, to, 0.0});
  nodes[from].out_edges.push_back(edges.size() - 1);
  nodes[to].in_edges.push_back(edges.size() - 1);
  return edges.size() - 1;
}

void ProtoGraph::RebuildAdjacency() {
  index_.clear();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i].in_edges.clear();
    nodes[i].out_edges.clear();
    index_.emplace(nodes[i].id, i);
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    nodes[edges[e].from].out_edges.push_back(e);
    nodes[edges[e].to].in_edges.push_back(e);
  }
}

void ProtoGraph::Canonicalize() {
  std::vector<std::size_t> order(nodes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (nodes[a].level != nodes[b].level) return nodes[a].level < nodes[b].level;
    return nodes[a].id < nodes[b].id;
  });
  std::vector<std::size_t> rank(nodes.size());
  std::vector<GraphNode> sorted;
  sorted.reserve(nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    rank[order[i]] = i;
    sorted.push_back(std::move(nodes[order[i]]));
  }
  nodes = std::move(sorted);
  for (GraphEdge& e : edges) {
    e.from = rank[e.from];
    e.to = rank[e.to];
  }
  std::sort(edges.begin(), edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
    return a.from != b.from ? a.from < b.from : a.to < b.to;
  });
  RebuildAdjacency();
}

std::vector<std::size_t> ProtoGraph::NodesAtLevel(int level) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].level == level) out.push_back(i);
  }
  return out;
}

std::string NodeId(int level, const NodePayload& p) {
  std::string id = "L" + std::to_string(level);
  auto add = [&id](std::string_view part) {
    id += '|';
    id += part;
  };
  switch (level) {
    case 0:
      add(p.query);
      break;
    case 1:
      add(p.stage);
      break;
    case 2:
      add(p.stage);
      add(Name(*p.resource_class));
      break;
    case 3:
      add(p.stage);
      add(Name(*p.request));
      add(p.host);
      break;
    case 4:
      add(p.stage);
      add(Name(*p.request));
      add(p.host);
      add(p.source_stage);
      break;
    case 5:
      add(p.source_stage);
      break;
    case 6:
      add(p.source_query);
      break;
  }
  return id;
}

std::vector<std::size_t> ScopeStages(const WorkloadTrace& trace, std::size_t query,
                                     const GraphConfig& config) {
  const QueryRecord& q = trace.queries[query];
  switch (config.scope) {
    case TargetScope::kAll: {
      std::vector<std::size_t> out = q.stages;
      std::sort(out.begin(), out.end());
      return out;
    }
    case TargetScope::kSingleStage: {
      const std::size_t s = trace.FindStage(config.scope_stage);
      if (s == kNoIndex || trace.stages[s].query != query) {
        throw GraphError("stage '" + config.scope_stage + "' is not a stage of query '" + q.id +
                         "'");
      }
      return {s};
    }
    case TargetScope::kLongestPath:
      return LongestPath(trace, query);
  }
  return {};
}

ProtoGraph BuildGraph(const WorkloadTrace& trace, const std::vector<std::string>& targets,
                      const GraphConfig& config) {
  SliceIndex slices(trace, config.threads);
  return BuildGraph(trace, slices, targets, config);
}

ProtoGraph BuildGraph(const WorkloadTrace& trace, const SliceIndex& slices,
                      const std::vector<std::string>& targets, const GraphConfig& config) {
  ProtoGraph g;
  g.config = config;
  std::vector<std::size_t> target_queries;
  for (const std::string& id : targets) {
    const std::size_t q = trace.FindQuery(id);
    if (q == kNoIndex) throw GraphError("unknown target query '" + id + "'");
    if (std::find(target_queries.begin(), target_queries.end(), q) == target_queries.end()) {
      target_queries.push_back(q);
      g.targets.push_back(id);
    }
  }

  std::vector<bool> host_allowed(trace.hosts.size(), config.hosts.empty());
  for (std::size_t h = 0; h < trace.hosts.size(); ++h) {
    if (config.hosts.contains(trace.hosts[h].id)) host_allowed[h] = true;
  }
  std::vector<ResourceRequest> requests;
  for (ResourceRequest r : kAllRequests) {
    if (config.requests.empty() || config.requests.contains(r)) requests.push_back(r);
  }

  std::vector<std::pair<std::size_t, std::size_t>> work;
  for (std::size_t q : target_queries) {
    for (std::size_t s : ScopeStages(trace, q, config)) {
      bool any = false;
      for (std::size_t t : trace.stages[s].tasks) any = any || host_allowed[trace.tasks[t].host];
      if (any) work.emplace_back(q, s);
    }
  }
  if (work.empty() || requests.empty()) {
    g.notes.push_back("no target stage has tasks within the configured filters");
    return g;
  }

  BlameEngine engine(trace, slices, config.blame);
  std::vector<StageSubgraph> subs(work.size());
  ParallelFor(work.size(), config.threads, [&](std::size_t i) {
    subs[i] = BuildStage(trace, engine, config, requests, host_allowed, work[i].first,
                         work[i].second);
  });

  for (std::size_t q : target_queries) {
    const QueryRecord& query = trace.queries[q];
    GraphNode n;
    n.level = 0;
    n.payload.query = query.id;
    n.id = NodeId(0, n.payload);
    n.vc = Weight(config, query.id, query.user);
    g.AddNode(std::move(n));
  }

  for (const StageSubgraph& sub : subs) {
    const QueryRecord& query = trace.queries[sub.query];
    const StageRecord& stage = trace.stages[sub.stage];
    NodePayload base;
    base.query = query.id;
    base.stage = stage.id;

    GraphNode l1;
    l1.level = 1;
    l1.payload = base;
    l1.id = NodeId(1, base);
    l1.vc = stage.work_done;
    const std::size_t l1_idx = g.AddNode(std::move(l1));
    g.AddEdge(l1_idx, g.Find(NodeId(0, base)));

    for (ResourceClass cls : kAllClasses) {
      std::vector<ResourceRequest> class_requests;
      for (ResourceRequest r : RequestsOf(cls)) {
        if (std::find(requests.begin(), requests.end(), r) != requests.end()) {
          class_requests.push_back(r);
        }
      }
      if (class_requests.empty()) continue;
      GraphNode l2;
      l2.level = 2;
      l2.payload = base;
      l2.payload.resource_class = cls;
      l2.id = NodeId(2, l2.payload);
      l2.vc = sub.l2_vc[Index(cls)];
      const NodePayload l2_payload = l2.payload;
      const std::size_t l2_idx = g.AddNode(std::move(l2));
      g.AddEdge(l2_idx, l1_idx);

      for (ResourceRequest r : class_requests) {
        for (std::size_t hi = 0; hi < sub.hosts.size(); ++hi) {
          GraphNode l3;
          l3.level = 3;
          l3.payload = l2_payload;
          l3.payload.request = r;
          l3.payload.host = trace.hosts[sub.hosts[hi]].id;
          l3.id = NodeId(3, l3.payload);
          l3.vc = sub.l3_vc[Index(r)][hi];
          const std::size_t l3_idx = g.AddNode(std::move(l3));
          g.AddEdge(l3_idx, l2_idx);
        }
      }
    }

    for (const auto& [key, vc] : sub.l4_vc) {
      if (!(vc > 0.0)) continue;
      NodePayload p = base;
      p.resource_class = ClassOf(key.request);
      p.request = key.request;
      p.host = trace.hosts[key.host].id;
      const std::size_t l3_idx = g.Find(NodeId(3, p));
      p.source_stage = key.source.stage;
      p.source_query = key.source.query;

      GraphNode l4;
      l4.level = 4;
      l4.payload = p;
      l4.id = NodeId(4, p);
      l4.vc = vc;
      const std::size_t l4_idx = g.AddNode(std::move(l4));
      g.AddEdge(l4_idx, l3_idx);

      NodePayload sp;
      sp.source_stage = p.source_stage;
      sp.source_query = p.source_query;
      const std::string l5_id = NodeId(5, sp);
      std::size_t l5_idx = g.Find(l5_id);
      if (l5_idx == kNoIndex) {
        std::string user;
        if (std::size_t sq = trace.FindQuery(sp.source_query); sq != kNoIndex) {
          user = trace.queries[sq].user;
        }
        const double w = Weight(config, sp.source_query, user);
        GraphNode l5;
        l5.level = 5;
        l5.payload = sp;
        l5.id = l5_id;
        l5.vc = w;
        l5_idx = g.AddNode(std::move(l5));

        const std::string l6_id = NodeId(6, sp);
        std::size_t l6_idx = g.Find(l6_id);
        if (l6_idx == kNoIndex) {
          GraphNode l6;
          l6.level = 6;
          l6.payload.source_query = sp.source_query;
          l6.id = l6_id;
          l6.vc = w;
          l6_idx = g.AddNode(std::move(l6));
        }
        g.AddEdge(l6_idx, l5_idx);
      }
      g.AddEdge(l5_idx, l4_idx);
    }
  }

  g.Canonicalize();
  ComputeImpactFactors(&g);
  ComputeDor(&g);
  return g;
}

void ComputeImpactFactors(ProtoGraph* g) {
  for (GraphNode& v : g->nodes) {
    if (v.in_edges.empty()) continue;
    double total = 0.0;
    for (std::size_t e : v.in_edges) total += g->nodes[g->edges[e].from].vc;
    for (std::size_t e : v.in_edges) {
      g->edges[e].impact = total > 0.0 ? g->nodes[g->edges[e].from].vc / total
                                       : 1.0 / static_cast<double>(v.in_edges.size());
    }
  }
}

void ComputeDor(ProtoGraph* g) {
  for (GraphNode& n : g->nodes) n.dor.clear();
  // Levels must be visited shallow to deep; order node indices by level.
  std::vector<std::size_t> order(g->nodes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return g->nodes[a].level < g->nodes[b].level;
  });
  std::vector<std::size_t> roots;
  for (std::size_t i : order) {
    if (g->nodes[i].level == 0) roots.push_back(i);
  }
  std::vector<std::vector<std::pair<std::size_t, double>>> per_root(roots.size());
  ParallelFor(roots.size(), 0, [&](std::size_t k) {
    std::vector<double> dor(g->nodes.size(), 0.0);
    dor[roots[k]] = 1.0;
    for (std::size_t v : order) {
      if (dor[v] == 0.0) continue;
      per_root[k].emplace_back(v, dor[v]);
      for (std::size_t e : g->nodes[v].in_edges) {
        const GraphEdge& edge = g->edges[e];
        dor[edge.from] += edge.impact * dor[v];
      }
    }
  });
  for (std::size_t k = 0; k < roots.size(); ++k) {
    const std::string& target = g->nodes[roots[k]].payload.query;
    for (const auto& [v, d] : per_root[k]) g->nodes[v].dor[target] = d;
  }
}

}  // namespace contendscope
