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

// Line-delimited trace file format.
//
// Every non-blank line is one JSON object with a "kind" discriminator:
//
//   {"kind":"workload","heartbeat":2.0}
//   {"kind":"host","id":"h0","capacity":{"IoRead":2e8},"gc":[[1.0,1.5]]}
//   {"kind":"syscounter","host":"h0","t":3.0,"used":{"IoRead":4.2e8}}
//   {"kind":"query","id":"q1","user":"u1","submit":0.0,"finish":9.0}
//   {"kind":"stage","id":"s1","query":"q1","user":"u1","parents":[]}
//   {"kind":"task","id":"t1","stage":"s1","query":"q1","host":"h0",
//    "start":0.0,"end":4.0}
//   {"kind":"sample","task":"t1","t":2.0,
//    "metrics":{"IoRead":{"wt":0.5,"ct":1.5,"ra":1.5e8}}}
//   {"kind":"cause","name":"hdfs-replication","host":"h0",
//    "request":"IoWrite","windows":[[2.0,4.0,1e8]]}
//
// Records may appear in any order; samples of one task must appear in time
// order. Unknown keys are ignored. Sample metrics are deltas since the
// previous sample of the task (or since task start); syscounter values are
// cumulative.

#ifndef CONTENDSCOPE_TRACE_IO_H
#define CONTENDSCOPE_TRACE_IO_H

#include <iosfwd>
#include <string>

#include "contendscope/trace.h"

namespace contendscope {

struct IngestOptions {
  // Strict ingestion also runs Validate() and throws on the first violation.
  bool strict = true;
};

WorkloadTrace ParseTrace(std::istream& in, const IngestOptions& options = {});
WorkloadTrace IngestTrace(const std::string& path,
                          const IngestOptions& options = {});

// Canonical serialization: workload, hosts (each followed by its counters),
// queries, stages, tasks (each followed by its samples), causes.
void WriteTrace(const WorkloadTrace& trace, std::ostream& out);
std::string SerializeTrace(const WorkloadTrace& trace);
void WriteTraceFile(const WorkloadTrace& trace, const std::string& path);

}  // namespace contendscope

#endif  // CONTENDSCOPE_TRACE_IO_H
