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

#include "contendscope/analysis.h"

#include <algorithm>
#include <sstream>

#include "contendscope/trace_window.h"

namespace contendscope {

namespace {

using ojson = nlohmann::ordered_json;

// Shortest round-trip text for a double, as in the JSON exports.
std::string Num(double v) { return ojson(v).dump(); }

// Quotes a CSV field when it needs it.
std::string Csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// The single impact edge from `from` to `to`, if present.
const GraphEdge* EdgeBetween(const ProtoGraph& g, std::size_t from, std::size_t to) {
  for (std::size_t e : g.nodes[to].in_edges) {
    if (g.edges[e].from == from) return &g.edges[e];
  }
  return nullptr;
}

std::size_t SingleParent(const ProtoGraph& g, std::size_t v) {
  return g.nodes[v].in_edges.size() == 1 ? g.edges[g.nodes[v].in_edges[0]].from : kNoIndex;
}

std::size_t SingleChild(const ProtoGraph& g, std::size_t v) {
  return g.nodes[v].out_edges.size() == 1 ? g.edges[g.nodes[v].out_edges[0]].to : kNoIndex;
}

std::size_t RequireQuery(const WorkloadTrace& trace, const std::string& target) {
  const std::size_t q = trace.FindQuery(target);
  if (q == kNoIndex) throw AnalysisError("unknown target query '" + target + "'");
  return q;
}

}  // namespace

std::string Explanation::PathId() const {
  return tq + "|" + ts + "|" + std::string(Name(res)) + "|" + std::string(Name(res_prime)) + "|" +
         host + "|" + ss + "|" + sq;
}

ExplanationFix ExplanationFix::Parse(const std::string& spec) {
  ExplanationFix fix;
  std::stringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw AnalysisError("fix '" + item + "' is not field=value");
    const std::string field = Trim(item.substr(0, eq));
    const std::string value = Trim(item.substr(eq + 1));
    if (field == "ts") {
      fix.ts = value;
    } else if (field == "res") {
      fix.res = ParseClass(value);
      if (!fix.res) throw AnalysisError("unknown resource class '" + value + "'");
    } else if (field == "res'" || field == "res_prime" || field == "request") {
      fix.res_prime = ParseRequest(value);
      if (!fix.res_prime) throw AnalysisError("unknown resource request '" + value + "'");
    } else if (field == "host") {
      fix.host = value;
    } else if (field == "ss") {
      fix.ss = value;
    } else if (field == "sq") {
      fix.sq = value;
    } else {
      throw AnalysisError("unknown fix field '" + field + "'");
    }
  }
  return fix;
}

RankedList Rank(std::map<std::string, double> scores, std::size_t k) {
  RankedList out;
  for (auto& [id, score] : scores) out.entries.push_back({id, score});
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const RankedEntry& a, const RankedEntry& b) { return a.score > b.score; });
  if (k > 0 && out.entries.size() > k) out.entries.resize(k);
  out.k = k > 0 ? k : out.entries.size();
  return out;
}

std::vector<Explanation> TopKExplanations(const ProtoGraph& g, const std::string& target, int k,
                                          const ExplanationFix& fix) {
  if (k <= 0) throw AnalysisError("k must be positive");
  const std::size_t root = g.Find("L0|" + target);
  if (root == kNoIndex) {
    if (std::find(g.targets.begin(), g.targets.end(), target) != g.targets.end()) return {};
    throw AnalysisError("query '" + target + "' is not a target of this graph");
  }
  std::vector<Explanation> rows;
  for (std::size_t l4 : g.NodesAtLevel(4)) {
    const GraphNode& n = g.nodes[l4];
    if (n.payload.query != target) continue;
    Explanation x;
    x.tq = target;
    x.ts = n.payload.stage;
    x.res = *n.payload.resource_class;
    x.res_prime = *n.payload.request;
    x.host = n.payload.host;
    x.ss = n.payload.source_stage;
    x.sq = n.payload.source_query;
    if ((fix.ts && *fix.ts != x.ts) || (fix.res && *fix.res != x.res) ||
        (fix.res_prime && *fix.res_prime != x.res_prime) || (fix.host && *fix.host != x.host) ||
        (fix.ss && *fix.ss != x.ss) || (fix.sq && *fix.sq != x.sq)) {
      continue;
    }
    // L6 -> L5 -> L4 -> L3 -> L2 -> L1 -> L0.
    std::vector<std::size_t> path(kNumLevels, kNoIndex);
    path[4] = l4;
    path[5] = SingleParent(g, l4);
    if (path[5] != kNoIndex) path[6] = SingleParent(g, path[5]);
    for (int level = 3; level >= 0; --level) path[level] = SingleChild(g, path[level + 1]);
    if (std::find(path.begin(), path.end(), kNoIndex) != path.end() || path[0] != root) {
      throw AnalysisError("graph is malformed around node '" + n.id + "'");
    }
    x.p = 1.0;
    for (int level = kNumLevels - 1; level > 0; --level) {
      x.p *= EdgeBetween(g, path[level], path[level - 1])->impact;
    }
    rows.push_back(std::move(x));
  }
  std::sort(rows.begin(), rows.end(), [](const Explanation& a, const Explanation& b) {
    if (a.p != b.p) return a.p > b.p;
    return a.PathId() < b.PathId();
  });
  if (rows.size() > static_cast<std::size_t>(k)) rows.resize(k);
  return rows;
}

RankedList AggressiveSources(const ProtoGraph& g, int k) {
  if (k <= 0) throw AnalysisError("k must be positive");
  std::map<std::string, double> weight;
  for (std::size_t r : g.NodesAtLevel(0)) weight[g.nodes[r].payload.query] = g.nodes[r].vc;
  std::map<std::string, double> scores;
  for (std::size_t v : g.NodesAtLevel(6)) {
    double total = 0.0;
    for (const auto& [target, d] : g.nodes[v].dor) total += weight[target] * d;
    scores[g.nodes[v].payload.source_query] = total;
  }
  return Rank(std::move(scores), static_cast<std::size_t>(k));
}

RankedList SlowNodes(const ProtoGraph& g, bool weighted) {
  std::map<std::string, double> scores;
  for (std::size_t v : g.NodesAtLevel(3)) {
    double& s = scores[g.nodes[v].payload.host];
    if (weighted) {
      for (const auto& [target, d] : g.nodes[v].dor) s += d;
    } else {
      for (std::size_t e : g.nodes[v].out_edges) s += g.edges[e].impact;
    }
  }
  return Rank(std::move(scores));
}

RankedList HotResources(const ProtoGraph& g, HotGranularity granularity) {
  std::map<std::string, double> scores;
  auto up = [&](std::size_t v) {
    double s = 0.0;
    for (std::size_t e : g.nodes[v].out_edges) s += g.edges[e].impact;
    return s;
  };
  if (granularity == HotGranularity::kClass) {
    for (std::size_t v : g.NodesAtLevel(2)) {
      scores[std::string(Name(*g.nodes[v].payload.resource_class))] += up(v);
    }
  } else {
    for (std::size_t v : g.NodesAtLevel(3)) {
      double s = 0.0;
      for (std::size_t e : g.nodes[v].out_edges) s += g.edges[e].impact * up(g.edges[e].to);
      scores[std::string(Name(*g.nodes[v].payload.request))] += s;
    }
  }
  return Rank(std::move(scores));
}

RankedList NaiveOverlap(const WorkloadTrace& trace, const std::string& target) {
  const QueryRecord& t = trace.queries[RequireQuery(trace, target)];
  std::map<std::string, double> scores;
  for (const QueryRecord& q : trace.queries) {
    if (q.id == t.id) continue;
    scores[q.id] = std::max(0.0, std::min(q.finish, t.finish) - std::max(q.submit, t.submit));
  }
  return Rank(std::move(scores));
}

RankedList DeepOverlap(const WorkloadTrace& trace, const std::string& target) {
  const std::size_t tq = RequireQuery(trace, target);
  std::map<std::string, double> scores;
  for (const QueryRecord& q : trace.queries) {
    if (q.id != target) scores[q.id] = 0.0;
  }
  for (std::size_t tt : trace.queries[tq].tasks) {
    const TaskRecord& a = trace.tasks[tt];
    for (std::size_t st : trace.hosts[a.host].tasks) {
      const TaskRecord& b = trace.tasks[st];
      if (b.query == tq) continue;
      const double overlap = std::min(a.end, b.end) - std::max(a.start, b.start);
      if (overlap > 0.0) scores[trace.queries[b.query].id] += overlap;
    }
  }
  return Rank(std::move(scores));
}

BlockedTimeReport BlockedTime(const WorkloadTrace& trace, const std::string& target) {
  const std::size_t tq = RequireQuery(trace, target);
  BlockedTimeReport report;
  report.query = target;
  for (std::size_t s : trace.queries[tq].stages) report.stages[trace.stages[s].id] = {};
  for (std::size_t t : trace.queries[tq].tasks) {
    const TaskRecord& task = trace.tasks[t];
    PerRequest<double>& stage = report.stages[trace.stages[task.stage].id];
    for (ResourceRequest r : kAllRequests) {
      const double wt = task.Total(r).wait;
      stage[Index(r)] += wt;
      report.total[Index(r)] += wt;
    }
  }
  return report;
}

std::vector<WindowShares> WindowedAnalysis(const WorkloadTrace& trace, const std::string& target,
                                           const std::vector<TimeWindow>& windows,
                                           const GraphConfig& config) {
  RequireQuery(trace, target);
  const TimeWindow span = trace.Span();
  for (const TimeWindow& w : windows) {
    if (!(w.end > w.begin)) {
      throw AnalysisError("window [" + Num(w.begin) + ", " + Num(w.end) + "] is empty");
    }
    if (w.begin < span.begin - kBoundaryEpsilon || w.end > span.end + kBoundaryEpsilon) {
      throw AnalysisError("window [" + Num(w.begin) + ", " + Num(w.end) +
                          "] falls outside the trace span [" + Num(span.begin) + ", " +
                          Num(span.end) + "]");
    }
  }
  std::vector<WindowShares> out;
  for (const TimeWindow& w : windows) {
    WindowShares ws{w.begin, w.end, {}};
    WorkloadTrace clipped = ClipTrace(trace, w.begin, w.end);
    if (!clipped.queries[clipped.FindQuery(target)].tasks.empty()) {
      ProtoGraph g = BuildGraph(clipped, {target}, config);
      for (std::size_t v : g.NodesAtLevel(6)) {
        const double d = g.nodes[v].Dor(target);
        if (d > 0.0) ws.shares[g.nodes[v].payload.source_query] = d;
      }
    }
    out.push_back(std::move(ws));
  }
  return out;
}

ojson ToJson(const std::vector<Explanation>& rows) {
  ojson out = ojson::array();
  for (const Explanation& x : rows) {
    ojson row;
    row["tq"] = x.tq;
    row["ts"] = x.ts;
    row["res"] = Name(x.res);
    row["res'"] = Name(x.res_prime);
    row["host"] = x.host;
    row["ss"] = x.ss;
    row["sq"] = x.sq;
    row["P"] = x.p;
    out.push_back(std::move(row));
  }
  return out;
}

ojson ToJson(const RankedList& list) {
  ojson entries = ojson::array();
  for (const RankedEntry& e : list.entries) {
    ojson row;
    row["id"] = e.id;
    row["score"] = e.score;
    entries.push_back(std::move(row));
  }
  ojson out;
  out["k"] = list.k;
  out["entries"] = std::move(entries);
  return out;
}

ojson ToJson(const BlockedTimeReport& report) {
  auto per_request = [](const PerRequest<double>& v) {
    ojson o;
    for (ResourceRequest r : kAllRequests) o[std::string(Name(r))] = v[Index(r)];
    return o;
  };
  ojson out;
  out["query"] = report.query;
  ojson stages = ojson::object();
  for (const auto& [id, v] : report.stages) stages[id] = per_request(v);
  out["stages"] = std::move(stages);
  out["total"] = per_request(report.total);
  return out;
}

ojson ToJson(const std::vector<WindowShares>& windows) {
  ojson out = ojson::array();
  for (const WindowShares& w : windows) {
    ojson row;
    row["begin"] = w.begin;
    row["end"] = w.end;
    row["shares"] = w.shares;
    out.push_back(std::move(row));
  }
  return out;
}

void WriteCsv(const std::vector<Explanation>& rows, std::ostream& out) {
  out << "tq,ts,res,res',host,ss,sq,P\n";
  for (const Explanation& x : rows) {
    out << Csv(x.tq) << ',' << Csv(x.ts) << ',' << Name(x.res) << ',' << Name(x.res_prime) << ','
        << Csv(x.host) << ',' << Csv(x.ss) << ',' << Csv(x.sq) << ',' << Num(x.p) << '\n';
  }
}

void WriteCsv(const RankedList& list, std::ostream& out) {
  out << "rank,id,score\n";
  for (std::size_t i = 0; i < list.entries.size(); ++i) {
    out << i + 1 << ',' << Csv(list.entries[i].id) << ',' << Num(list.entries[i].score) << '\n';
  }
}

void WriteCsv(const BlockedTimeReport& report, std::ostream& out) {
  out << "scope,id";
  for (ResourceRequest r : kAllRequests) out << ',' << Name(r);
  out << '\n';
  auto row = [&](const char* scope, const std::string& id, const PerRequest<double>& v) {
    out << scope << ',' << Csv(id);
    for (ResourceRequest r : kAllRequests) out << ',' << Num(v[Index(r)]);
    out << '\n';
  };
  for (const auto& [id, v] : report.stages) row("stage", id, v);
  row("query", report.query, report.total);
}

void WriteCsv(const std::vector<WindowShares>& windows, std::ostream& out) {
  out << "begin,end,source,share\n";
  for (const WindowShares& w : windows) {
    for (const auto& [source, share] : w.shares) {
      out << Num(w.begin) << ',' << Num(w.end) << ',' << Csv(source) << ',' << Num(share) << '\n';
    }
  }
}

}  // namespace contendscope
