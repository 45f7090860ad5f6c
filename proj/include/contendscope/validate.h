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

#ifndef CONTENDSCOPE_VALIDATE_H
#define CONTENDSCOPE_VALIDATE_H

#include <string>
#include <vector>

#include "contendscope/trace.h"

namespace contendscope {

// Slack for WT + CT against the sample window length.
inline constexpr double kSampleTimeTolerance = 1e-6;

struct Violation {
  std::string entity;  // e.g. "task:t3", "stage:s1"
  std::string rule;    // stable rule name, e.g. "sample-time-budget"
  std::string detail;
};

// Checks every structural invariant of a linked trace. Returns an empty list
// iff the trace is well formed. Rules:
//   task-lifetime        start < end
//   sample-order         sample times strictly increasing
//   sample-range         sample times within [start, end]
//   sample-last          last sample at task end
//   sample-negative      all deltas >= 0
//   sample-time-budget   WT + CT <= window length (+1e-6) per request
//   task-query-mismatch  task's query differs from its stage's query
//   stage-cycle          stage dataflow graph contains a cycle
//   host-capacity        capacities > 0
//   counter-order        syscounter times non-decreasing
//   counter-monotone     cumulative counters non-decreasing
//   gc-window            gc windows have begin < end
//   cause-window         cause windows have begin < end and units >= 0
std::vector<Violation> Validate(const WorkloadTrace& trace);

}  // namespace contendscope

#endif  // CONTENDSCOPE_VALIDATE_H
