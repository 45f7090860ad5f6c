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

// Analysis payloads shared by the command line and the HTTP service, and the
// session store behind the service. Both front ends render the same
// functions, so identical inputs give identical bytes.
//
// HTTP routes (JSON bodies, each terminated by a newline):
//
//   POST /sessions                      {"trace":path | "trace_jsonl":text,
//                                        "targets":[...], "config":{...}}
//   GET  /sessions
//   GET  /sessions/:id/graph
//   GET  /sessions/:id/topk?k=&target=&fix=
//   GET  /sessions/:id/aggressive?k=
//   GET  /sessions/:id/slownodes?weighted=
//   GET  /sessions/:id/hotresources?granularity=class|request
//   GET  /sessions/:id/windows?target=&bounds=b:e,...|width=
//   GET  /sessions/:id/node/:nodeId
//
// Unknown sessions and nodes are 404, bad parameters 400.

#ifndef CONTENDSCOPE_SERVICE_H
#define CONTENDSCOPE_SERVICE_H

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "contendscope/analysis.h"
#include "contendscope/proto_graph.h"
#include "contendscope/trace.h"

namespace contendscope {

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The graph's only target when `target` is empty. Throws AnalysisError when
// the choice is ambiguous.
std::string ResolveTarget(const ProtoGraph& g, const std::string& target);

// "b:e,b:e,..." Throws AnalysisError on malformed input.
std::vector<TimeWindow> ParseBounds(const std::string& spec);
// Consecutive windows of `width` seconds covering the target's lifetime.
std::vector<TimeWindow> TumblingWindows(const WorkloadTrace& trace, const std::string& target,
                                        double width);

nlohmann::ordered_json TopkPayload(const ProtoGraph& g, const std::string& target, int k,
                                   const std::string& fix);
// Node with its children (the nodes one level deeper that feed it) and
// parents, each with the connecting edge's impact factor. Throws
// NotFoundError.
nlohmann::ordered_json NodeDetail(const ProtoGraph& g, const std::string& id);
HotGranularity ParseGranularity(const std::string& name);

// CSV tables of a graph: "nodes" (id,level,vc,target,dor) or "edges"
// (from,to,if).
void WriteGraphCsv(const ProtoGraph& g, const std::string& table, std::ostream& out);

// Aligns the columns of CSV text for terminals.
std::string PrettyTable(const std::string& csv);

struct SessionRequest {
  std::string trace_path;
  std::string trace_jsonl;  // used when trace_path is empty
  std::vector<std::string> targets;  // empty means every query
  GraphConfig config;

  // Throws AnalysisError on malformed bodies.
  static SessionRequest FromJson(const nlohmann::json& body);
};

struct Session {
  std::string id;
  std::string trace_ref;
  GraphConfig config;
  WorkloadTrace trace;
  ProtoGraph graph;
  std::int64_t created = 0;  // unix seconds
};

// Immutable sessions by id ("s1", "s2", ...). Creation is serialized; reads
// share a lock only long enough to copy the pointer.
class SessionStore {
 public:
  // With a persist directory each new session's graph is written to
  // <dir>/<id>.graph.json.
  explicit SessionStore(std::string persist_dir = "");

  // Throws TraceError, GraphError or AnalysisError.
  std::shared_ptr<const Session> Create(const SessionRequest& request);
  std::shared_ptr<const Session> Get(const std::string& id) const;
  std::vector<std::string> Ids() const;

 private:
  std::string persist_dir_;
  mutable std::shared_mutex mu_;
  std::mutex create_mu_;
  std::map<std::string, std::shared_ptr<const Session>> sessions_;
  std::uint64_t next_ = 1;
};

class HttpService {
 public:
  explicit HttpService(SessionStore* store);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Returns the bound port (port 0 picks a free one), or -1.
  int Bind(const std::string& host, int port);
  // Blocks until Stop().
  bool Serve();
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace contendscope

#endif  // CONTENDSCOPE_SERVICE_H
