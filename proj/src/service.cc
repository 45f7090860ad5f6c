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

#include "contendscope/service.h"

#include <chrono>
#include <filesystem>
#include <sstream>

#include "httplib.h"

#include "contendscope/graph_io.h"
#include "contendscope/trace_io.h"

namespace contendscope {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string Num(double v) { return ojson(v).dump(); }

double ParseNumber(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) {
    throw AnalysisError("bad " + what + " '" + text + "'");
  }
  return v;
}

}  // namespace

std::string ResolveTarget(const ProtoGraph& g, const std::string& target) {
  if (!target.empty()) return target;
  if (g.targets.size() == 1) return g.targets[0];
  throw AnalysisError("the graph has " + std::to_string(g.targets.size()) +
                      " targets; choose one with --target");
}

std::vector<TimeWindow> ParseBounds(const std::string& spec) {
  std::vector<TimeWindow> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos) throw AnalysisError("bad window '" + item + "', want b:e");
    out.push_back({ParseNumber(item.substr(0, colon), "window begin"),
                   ParseNumber(item.substr(colon + 1), "window end")});
  }
  if (out.empty()) throw AnalysisError("no windows given");
  return out;
}

std::vector<TimeWindow> TumblingWindows(const WorkloadTrace& trace, const std::string& target,
                                        double width) {
  if (!(width > 0.0)) throw AnalysisError("window width must be positive");
  const std::size_t q = trace.FindQuery(target);
  if (q == kNoIndex) throw AnalysisError("unknown target query '" + target + "'");
  const QueryRecord& rec = trace.queries[q];
  double begin = rec.finish;
  for (std::size_t t : rec.tasks) begin = std::min(begin, trace.tasks[t].start);
  std::vector<TimeWindow> out;
  for (double b = begin; b < rec.finish - kBoundaryEpsilon;) {
    const double e = std::min(rec.finish, b + width);
    out.push_back({b, e});
    b = e;
  }
  if (out.empty()) throw AnalysisError("target '" + target + "' has no lifetime to window");
  return out;
}

ojson TopkPayload(const ProtoGraph& g, const std::string& target, int k, const std::string& fix) {
  const ExplanationFix f = fix.empty() ? ExplanationFix{} : ExplanationFix::Parse(fix);
  return ToJson(TopKExplanations(g, ResolveTarget(g, target), k, f));
}

ojson NodeDetail(const ProtoGraph& g, const std::string& id) {
  const std::size_t v = g.Find(id);
  if (v == kNoIndex) throw NotFoundError("no node '" + id + "'");
  const GraphNode& n = g.nodes[v];
  ojson out = NodeToJson(n);
  auto neighbor = [&](std::size_t edge, std::size_t other) {
    ojson row = NodeToJson(g.nodes[other]);
    row["if"] = g.edges[edge].impact;
    return row;
  };
  ojson children = ojson::array();
  for (std::size_t e : n.in_edges) children.push_back(neighbor(e, g.edges[e].from));
  ojson parents = ojson::array();
  for (std::size_t e : n.out_edges) parents.push_back(neighbor(e, g.edges[e].to));
  out["children"] = std::move(children);
  out["parents"] = std::move(parents);
  return out;
}

HotGranularity ParseGranularity(const std::string& name) {
  if (name == "class") return HotGranularity::kClass;
  if (name == "request") return HotGranularity::kRequest;
  throw AnalysisError("granularity must be class or request, not '" + name + "'");
}

void WriteGraphCsv(const ProtoGraph& g, const std::string& table, std::ostream& out) {
  if (table == "nodes") {
    out << "id,level,vc,target,dor\n";
    for (const GraphNode& n : g.nodes) {
      if (n.dor.empty()) {
        out << n.id << ',' << n.level << ',' << Num(n.vc) << ",,0.0\n";
      }
      for (const auto& [t, d] : n.dor) {
        out << n.id << ',' << n.level << ',' << Num(n.vc) << ',' << t << ',' << Num(d) << '\n';
      }
    }
  } else if (table == "edges") {
    out << "from,to,if\n";
    for (const GraphEdge& e : g.edges) {
      out << g.nodes[e.from].id << ',' << g.nodes[e.to].id << ',' << Num(e.impact) << '\n';
    }
  } else {
    throw AnalysisError("table must be nodes or edges, not '" + table + "'");
  }
}

std::string PrettyTable(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> width;
  std::stringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (width.size() <= i) width.push_back(0);
      width[i] = std::max(width[i], cells[i].size());
    }
    rows.push_back(std::move(cells));
  }
  std::string out;
  for (const auto& cells : rows) {
    std::string row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      row += cells[i];
      if (i + 1 < cells.size()) row += std::string(width[i] - cells[i].size() + 2, ' ');
    }
    out += row + "\n";
  }
  return out;
}

SessionRequest SessionRequest::FromJson(const json& body) {
  if (!body.is_object()) throw AnalysisError("session body must be a JSON object");
  SessionRequest r;
  try {
    r.trace_path = body.value("trace", "");
    r.trace_jsonl = body.value("trace_jsonl", "");
    r.targets = body.value("targets", std::vector<std::string>{});
    if (body.contains("config")) r.config = GraphConfigFromJson(body.at("config"));
  } catch (const json::exception& e) {
    throw AnalysisError(std::string("bad session body: ") + e.what());
  } catch (const GraphError& e) {
    throw AnalysisError(e.what());
  }
  if (r.trace_path.empty() == r.trace_jsonl.empty()) {
    throw AnalysisError("give exactly one of \"trace\" and \"trace_jsonl\"");
  }
  return r;
}

SessionStore::SessionStore(std::string persist_dir) : persist_dir_(std::move(persist_dir)) {
  if (!persist_dir_.empty()) std::filesystem::create_directories(persist_dir_);
}

std::shared_ptr<const Session> SessionStore::Create(const SessionRequest& request) {
  std::lock_guard<std::mutex> build(create_mu_);
  auto s = std::make_shared<Session>();
  if (!request.trace_path.empty()) {
    s->trace = IngestTrace(request.trace_path);
    s->trace_ref = request.trace_path;
  } else {
    std::istringstream in(request.trace_jsonl);
    s->trace = ParseTrace(in);
    s->trace_ref = "upload";
  }
  std::vector<std::string> targets = request.targets;
  if (targets.empty()) {
    for (const QueryRecord& q : s->trace.queries) targets.push_back(q.id);
  }
  s->config = request.config;
  s->graph = BuildGraph(s->trace, targets, request.config);
  s->created = std::chrono::duration_cast<std::chrono::seconds>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count();
  {
    std::unique_lock<std::shared_mutex> lock(mu_);
    s->id = "s" + std::to_string(next_++);
  }
  if (!persist_dir_.empty()) {
    ExportGraph(s->graph, (std::filesystem::path(persist_dir_) / (s->id + ".graph.json")).string());
  }
  std::unique_lock<std::shared_mutex> lock(mu_);
  sessions_[s->id] = s;
  return s;
}

std::shared_ptr<const Session> SessionStore::Get(const std::string& id) const {
  std::shared_lock<std::shared_mutex> lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::vector<std::string> SessionStore::Ids() const {
  std::shared_lock<std::shared_mutex> lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

struct HttpService::Impl {
  SessionStore* store;
  httplib::Server server;
};

namespace {

void Reply(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body + "\n", "application/json");
}

void ReplyError(httplib::Response& res, int status, const std::string& message) {
  ojson err;
  err["error"] = message;
  Reply(res, status, err.dump());
}

int ParamInt(const httplib::Request& req, const char* key, int fallback) {
  if (!req.has_param(key)) return fallback;
  const double v = ParseNumber(req.get_param_value(key), key);
  if (v != std::floor(v)) throw AnalysisError(std::string(key) + " must be an integer");
  return static_cast<int>(v);
}

std::string Param(const httplib::Request& req, const char* key) {
  return req.has_param(key) ? req.get_param_value(key) : "";
}

// Runs `body` against the session named in the first path match, mapping
// errors to status codes.
template <typename F>
httplib::Server::Handler WithSession(SessionStore* store, F body) {
  return [store, body](const httplib::Request& req, httplib::Response& res) {
    auto session = store->Get(req.matches[1]);
    if (!session) return ReplyError(res, 404, "no session '" + std::string(req.matches[1]) + "'");
    try {
      Reply(res, 200, body(*session, req));
    } catch (const NotFoundError& e) {
      ReplyError(res, 404, e.what());
    } catch (const std::exception& e) {
      ReplyError(res, 400, e.what());
    }
  };
}

}  // namespace

HttpService::HttpService(SessionStore* store) : impl_(std::make_unique<Impl>()) {
  impl_->store = store;
  httplib::Server& srv = impl_->server;

  srv.Post("/sessions", [store](const httplib::Request& req, httplib::Response& res) {
    try {
      const json body = json::parse(req.body);
      auto s = store->Create(SessionRequest::FromJson(body));
      ojson out;
      out["id"] = s->id;
      out["trace"] = s->trace_ref;
      out["targets"] = s->graph.targets;
      out["nodes"] = s->graph.nodes.size();
      out["edges"] = s->graph.edges.size();
      out["notes"] = s->graph.notes;
      out["created"] = s->created;
      Reply(res, 201, out.dump());
    } catch (const std::exception& e) {
      ReplyError(res, 400, e.what());
    }
  });
  srv.Get("/sessions", [store](const httplib::Request&, httplib::Response& res) {
    ojson out;
    out["sessions"] = store->Ids();
    Reply(res, 200, out.dump());
  });
  srv.Get(R"(/sessions/([^/]+)/graph)", WithSession(store, [](const Session& s, const auto&) {
            return SerializeGraph(s.graph);
          }));
  srv.Get(R"(/sessions/([^/]+)/topk)", WithSession(store, [](const Session& s, const auto& req) {
            return TopkPayload(s.graph, Param(req, "target"), ParamInt(req, "k", 10),
                               Param(req, "fix"))
                .dump();
          }));
  srv.Get(R"(/sessions/([^/]+)/aggressive)",
          WithSession(store, [](const Session& s, const auto& req) {
            return ToJson(AggressiveSources(s.graph, ParamInt(req, "k", 10))).dump();
          }));
  srv.Get(R"(/sessions/([^/]+)/slownodes)",
          WithSession(store, [](const Session& s, const auto& req) {
            const std::string w = Param(req, "weighted");
            if (!w.empty() && w != "true" && w != "false" && w != "1" && w != "0") {
              throw AnalysisError("weighted must be true or false");
            }
            return ToJson(SlowNodes(s.graph, w == "true" || w == "1")).dump();
          }));
  srv.Get(R"(/sessions/([^/]+)/hotresources)",
          WithSession(store, [](const Session& s, const auto& req) {
            const std::string g = Param(req, "granularity");
            return ToJson(HotResources(s.graph, ParseGranularity(g.empty() ? "class" : g))).dump();
          }));
  srv.Get(R"(/sessions/([^/]+)/windows)", WithSession(store, [](const Session& s, const auto& req) {
            const std::string target = ResolveTarget(s.graph, Param(req, "target"));
            std::vector<TimeWindow> windows;
            if (req.has_param("bounds")) {
              windows = ParseBounds(Param(req, "bounds"));
            } else if (req.has_param("width")) {
              windows = TumblingWindows(s.trace, target, ParseNumber(Param(req, "width"), "width"));
            } else {
              throw AnalysisError("give bounds= or width=");
            }
            return ToJson(WindowedAnalysis(s.trace, target, windows, s.config)).dump();
          }));
  srv.Get(R"(/sessions/([^/]+)/node/(.+))", WithSession(store, [](const Session& s, const auto& req) {
            return NodeDetail(s.graph, req.matches[2]).dump();
          }));
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) ReplyError(res, res.status, "not found");
  });
}

HttpService::~HttpService() = default;

int HttpService::Bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpService::Serve() { return impl_->server.listen_after_bind(); }

void HttpService::Stop() { impl_->server.stop(); }

}  // namespace contendscope
