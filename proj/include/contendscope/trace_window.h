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

// Trace transformations: clipping to a time window and re-sampling on a
// coarser heartbeat.

#ifndef CONTENDSCOPE_TRACE_WINDOW_H
#define CONTENDSCOPE_TRACE_WINDOW_H

#include "contendscope/trace.h"

namespace contendscope {

// Restricts the trace to [begin, end]. Tasks are cut to the window and their
// sample deltas apportioned by time overlap; tasks without positive overlap
// are dropped. Queries and stages are kept (possibly without tasks), counters
// are interpolated at the window edges, GC windows are cut, and known-cause
// units are scaled by the fraction of each window that survives.
WorkloadTrace ClipTrace(const WorkloadTrace& trace, double begin, double end);

// Replaces every task's samples with samples at the multiples of `interval`
// inside its lifetime plus one at its end, apportioning the original deltas.
// The result's heartbeat interval is `interval`.
WorkloadTrace ResampleTrace(const WorkloadTrace& trace, double interval);

}  // namespace contendscope

#endif  // CONTENDSCOPE_TRACE_WINDOW_H
