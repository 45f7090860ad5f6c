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

// Graph JSON:
//
//   {"nodes":[{"id":"L0|q1","level":0,"payload":{"query":"q1"},"vc":1.0,
//              "dor":{"q1":1.0}}, ...],
//    "edges":[{"from":"L1|s1","to":"L0|q1","if":1.0}, ...],
//    "meta":{"targets":["q1"],"notes":[],"config":{...}}}
//
// Nodes are ordered by (level, id), edges by (from, to) node order. An empty
// graph is exactly {"nodes":[],"edges":[]}.

#ifndef CONTENDSCOPE_GRAPH_IO_H
#define CONTENDSCOPE_GRAPH_IO_H

#include <string>

#include "json.hpp"

#include "contendscope/proto_graph.h"

namespace contendscope {

nlohmann::ordered_json GraphConfigToJson(const GraphConfig& config);
// Missing keys keep their defaults. Throws GraphError on bad values.
GraphConfig GraphConfigFromJson(const nlohmann::json& j);

// {"id","level","payload","vc","dor"} as in the graph document.
nlohmann::ordered_json NodeToJson(const GraphNode& node);
nlohmann::ordered_json GraphToJson(const ProtoGraph& g);
ProtoGraph GraphFromJson(const nlohmann::json& j);

std::string SerializeGraph(const ProtoGraph& g);
// Throws GraphError on I/O failure or malformed input.
void ExportGraph(const ProtoGraph& g, const std::string& path);
ProtoGraph ImportGraph(const std::string& path);

}  // namespace contendscope

#endif  // CONTENDSCOPE_GRAPH_IO_H
