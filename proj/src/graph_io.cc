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

#include "contendscope/graph_io.h"

#include <fstream>
#include <sstream>

namespace contendscope {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

const char* ScopeName(TargetScope s) {
  switch (s) {
    case TargetScope::kAll:
      return "all";
    case TargetScope::kSingleStage:
      return "stage";
    case TargetScope::kLongestPath:
      return "longest-path";
  }
  return "all";
}

template <typename T>
T Get(const json& j, const char* key, const char* what) {
  auto it = j.find(key);
  if (it == j.end()) throw GraphError(std::string(what) + ": missing '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw GraphError(std::string(what) + ": bad value for '" + key + "'");
  }
}

ojson PayloadToJson(const NodePayload& p) {
  ojson out = ojson::object();
  if (!p.query.empty()) out["query"] = p.query;
  if (!p.stage.empty()) out["stage"] = p.stage;
  if (p.resource_class) out["class"] = Name(*p.resource_class);
  if (p.request) out["request"] = Name(*p.request);
  if (!p.host.empty()) out["host"] = p.host;
  if (!p.source_stage.empty()) out["source_stage"] = p.source_stage;
  if (!p.source_query.empty()) out["source_query"] = p.source_query;
  return out;
}

NodePayload PayloadFromJson(const json& j) {
  NodePayload p;
  if (!j.is_object()) throw GraphError("node payload must be an object");
  p.query = j.value("query", "");
  p.stage = j.value("stage", "");
  if (j.contains("class")) {
    p.resource_class = ParseClass(Get<std::string>(j, "class", "payload"));
    if (!p.resource_class) throw GraphError("payload: unknown class");
  }
  if (j.contains("request")) {
    p.request = ParseRequest(Get<std::string>(j, "request", "payload"));
    if (!p.request) throw GraphError("payload: unknown request");
  }
  p.host = j.value("host", "");
  p.source_stage = j.value("source_stage", "");
  p.source_query = j.value("source_query", "");
  return p;
}

}  // namespace

ojson GraphConfigToJson(const GraphConfig& c) {
  ojson out;
  out["hosts"] = c.hosts;
  ojson requests = ojson::array();
  for (ResourceRequest r : c.requests) requests.push_back(Name(r));
  out["requests"] = requests;
  out["source_users"] = c.source_users;
  out["scope"] = ScopeName(c.scope);
  if (c.scope == TargetScope::kSingleStage) out["scope_stage"] = c.scope_stage;
  out["blocked_at_l2"] = c.blocked_at_l2;
  out["exclude_own_query"] = c.exclude_own_query;
  out["query_weights"] = c.query_weights;
  out["user_weights"] = c.user_weights;
  out["estimate_ideal"] = c.blame.estimate_ideal;
  out["ideal_percentile"] = c.blame.ideal_percentile;
  return out;
}

GraphConfig GraphConfigFromJson(const json& j) {
  GraphConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw GraphError("config must be an object");
  try {
    if (j.contains("hosts")) c.hosts = j.at("hosts").get<std::set<std::string>>();
    if (j.contains("requests")) {
      for (const std::string& name : j.at("requests").get<std::vector<std::string>>()) {
        auto r = ParseRequest(name);
        if (!r) throw GraphError("config: unknown request '" + name + "'");
        c.requests.insert(*r);
      }
    }
    if (j.contains("source_users")) {
      c.source_users = j.at("source_users").get<std::set<std::string>>();
    }
    if (j.contains("scope")) {
      const std::string scope = j.at("scope").get<std::string>();
      if (scope == "all") {
        c.scope = TargetScope::kAll;
      } else if (scope == "stage") {
        c.scope = TargetScope::kSingleStage;
      } else if (scope == "longest-path") {
        c.scope = TargetScope::kLongestPath;
      } else {
        throw GraphError("config: unknown scope '" + scope + "'");
      }
    }
    c.scope_stage = j.value("scope_stage", "");
    if (c.scope == TargetScope::kSingleStage && c.scope_stage.empty()) {
      throw GraphError("config: scope 'stage' needs scope_stage");
    }
    c.blocked_at_l2 = j.value("blocked_at_l2", false);
    c.exclude_own_query = j.value("exclude_own_query", true);
    if (j.contains("query_weights")) {
      c.query_weights = j.at("query_weights").get<std::map<std::string, double>>();
    }
    if (j.contains("user_weights")) {
      c.user_weights = j.at("user_weights").get<std::map<std::string, double>>();
    }
    c.blame.estimate_ideal = j.value("estimate_ideal", true);
    c.blame.ideal_percentile = j.value("ideal_percentile", 5.0);
  } catch (const json::exception& e) {
    throw GraphError(std::string("config: ") + e.what());
  }
  for (const auto* weights : {&c.query_weights, &c.user_weights}) {
    for (const auto& [k, w] : *weights) {
      if (!(w >= 0.0)) throw GraphError("config: weight of '" + k + "' must be >= 0");
    }
  }
  if (!(c.blame.ideal_percentile > 0.0 && c.blame.ideal_percentile <= 100.0)) {
    throw GraphError("config: ideal_percentile must be in (0, 100]");
  }
  return c;
}

ojson NodeToJson(const GraphNode& n) {
  ojson node;
  node["id"] = n.id;
  node["level"] = n.level;
  node["payload"] = PayloadToJson(n.payload);
  node["vc"] = n.vc;
  node["dor"] = n.dor;
  return node;
}

ojson GraphToJson(const ProtoGraph& g) {
  ojson out;
  out["nodes"] = ojson::array();
  out["edges"] = ojson::array();
  for (const GraphNode& n : g.nodes) out["nodes"].push_back(NodeToJson(n));
  for (const GraphEdge& e : g.edges) {
    ojson edge;
    edge["from"] = g.nodes[e.from].id;
    edge["to"] = g.nodes[e.to].id;
    edge["if"] = e.impact;
    out["edges"].push_back(std::move(edge));
  }
  if (!g.Empty()) {
    ojson meta;
    meta["targets"] = g.targets;
    meta["notes"] = g.notes;
    meta["config"] = GraphConfigToJson(g.config);
    out["meta"] = std::move(meta);
  }
  return out;
}

ProtoGraph GraphFromJson(const json& j) {
  if (!j.is_object() || !j.contains("nodes") || !j.contains("edges")) {
    throw GraphError("graph JSON needs 'nodes' and 'edges'");
  }
  ProtoGraph g;
  for (const json& n : j.at("nodes")) {
    GraphNode node;
    node.id = Get<std::string>(n, "id", "node");
    node.level = Get<int>(n, "level", "node");
    if (node.level < 0 || node.level >= kNumLevels) {
      throw GraphError("node '" + node.id + "': level out of range");
    }
    node.payload = PayloadFromJson(n.value("payload", json::object()));
    node.vc = Get<double>(n, "vc", "node");
    node.dor = n.value("dor", std::map<std::string, double>{});
    if (g.Find(node.id) != kNoIndex) throw GraphError("duplicate node '" + node.id + "'");
    g.AddNode(std::move(node));
  }
  for (const json& e : j.at("edges")) {
    const std::string from = Get<std::string>(e, "from", "edge");
    const std::string to = Get<std::string>(e, "to", "edge");
    const std::size_t fi = g.Find(from);
    const std::size_t ti = g.Find(to);
    if (fi == kNoIndex || ti == kNoIndex) {
      throw GraphError("edge " + from + " -> " + to + " references a missing node");
    }
    if (g.nodes[fi].level != g.nodes[ti].level + 1) {
      throw GraphError("edge " + from + " -> " + to + " does not join adjacent levels");
    }
    g.edges.push_back({fi, ti, Get<double>(e, "if", "edge")});
  }
  if (j.contains("meta")) {
    const json& meta = j.at("meta");
    g.targets = meta.value("targets", std::vector<std::string>{});
    g.notes = meta.value("notes", std::vector<std::string>{});
    if (meta.contains("config")) g.config = GraphConfigFromJson(meta.at("config"));
  }
  g.RebuildAdjacency();
  return g;
}

std::string SerializeGraph(const ProtoGraph& g) { return GraphToJson(g).dump(); }

void ExportGraph(const ProtoGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw GraphError("cannot open '" + path + "' for writing");
  out << SerializeGraph(g);
  if (!out.flush()) throw GraphError("write to '" + path + "' failed");
}

ProtoGraph ImportGraph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GraphError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw GraphError("'" + path + "': " + e.what());
  }
  return GraphFromJson(j);
}

}  // namespace contendscope
