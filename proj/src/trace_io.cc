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

#include "contendscope/trace_io.h"

#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "contendscope/validate.h"

namespace contendscope {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void Malformed(std::size_t line, const std::string& what) {
  throw TraceError(TraceError::Kind::kMalformed,
                   "line " + std::to_string(line) + ": " + what, line);
}

const json& Field(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) Malformed(line, std::string("missing field '") + key + "'");
  return *it;
}

std::string GetString(const json& obj, const char* key, std::size_t line) {
  const json& v = Field(obj, key, line);
  if (!v.is_string()) Malformed(line, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

double AsNumber(const json& v, const std::string& what, std::size_t line) {
  if (!v.is_number()) Malformed(line, what + " must be a number");
  return v.get<double>();
}

double GetNumber(const json& obj, const char* key, std::size_t line) {
  return AsNumber(Field(obj, key, line), std::string("field '") + key + "'", line);
}

ResourceRequest GetRequest(const std::string& name, std::size_t line) {
  auto r = ParseRequest(name);
  if (!r) Malformed(line, "unknown resource request '" + name + "'");
  return *r;
}

PerRequest<std::optional<double>> GetRequestMap(const json& obj, const char* key,
                                                std::size_t line) {
  PerRequest<std::optional<double>> out{};
  auto it = obj.find(key);
  if (it == obj.end()) return out;
  if (!it->is_object()) Malformed(line, std::string("field '") + key + "' must be an object");
  for (auto& [name, value] : it->items()) {
    out[Index(GetRequest(name, line))] = AsNumber(value, "'" + name + "'", line);
  }
  return out;
}

struct PendingSample {
  std::string task;
  MetricSample sample;
  std::size_t line;
};

struct PendingCounter {
  std::string host;
  SysCounterSample sample;
  std::size_t line;
};

struct Parser {
  WorkloadTrace trace;
  std::vector<PendingSample> samples;
  std::vector<PendingCounter> counters;

  void Record(const json& rec, std::size_t line) {
    if (!rec.is_object()) Malformed(line, "record must be a JSON object");
    std::string kind = GetString(rec, "kind", line);
    if (kind == "workload") {
      trace.heartbeat_interval = GetNumber(rec, "heartbeat", line);
    } else if (kind == "query") {
      QueryRecord q;
      q.id = GetString(rec, "id", line);
      q.user = GetString(rec, "user", line);
      q.submit = GetNumber(rec, "submit", line);
      q.finish = GetNumber(rec, "finish", line);
      trace.queries.push_back(std::move(q));
    } else if (kind == "stage") {
      StageRecord s;
      s.id = GetString(rec, "id", line);
      s.query_id = GetString(rec, "query", line);
      s.user = GetString(rec, "user", line);
      const json& parents = Field(rec, "parents", line);
      if (!parents.is_array()) Malformed(line, "field 'parents' must be an array");
      for (const json& p : parents) {
        if (!p.is_string()) Malformed(line, "stage parents must be strings");
        s.parent_ids.push_back(p.get<std::string>());
      }
      trace.stages.push_back(std::move(s));
    } else if (kind == "task") {
      TaskRecord t;
      t.id = GetString(rec, "id", line);
      t.stage_id = GetString(rec, "stage", line);
      t.query_id = GetString(rec, "query", line);
      t.host_id = GetString(rec, "host", line);
      t.start = GetNumber(rec, "start", line);
      t.end = GetNumber(rec, "end", line);
      trace.tasks.push_back(std::move(t));
    } else if (kind == "sample") {
      PendingSample p;
      p.task = GetString(rec, "task", line);
      p.sample.time = GetNumber(rec, "t", line);
      p.line = line;
      const json& metrics = Field(rec, "metrics", line);
      if (!metrics.is_object()) Malformed(line, "field 'metrics' must be an object");
      for (auto& [name, m] : metrics.items()) {
        if (!m.is_object()) Malformed(line, "metrics of '" + name + "' must be an object");
        RequestMetrics& rm = p.sample.metrics[Index(GetRequest(name, line))];
        if (m.contains("wt")) rm.wait = AsNumber(m["wt"], "'wt'", line);
        if (m.contains("ct")) rm.consume = AsNumber(m["ct"], "'ct'", line);
        if (m.contains("ra")) rm.acquired = AsNumber(m["ra"], "'ra'", line);
      }
      samples.push_back(std::move(p));
    } else if (kind == "host") {
      HostProfile h;
      h.id = GetString(rec, "id", line);
      h.capacity = GetRequestMap(rec, "capacity", line);
      if (auto it = rec.find("gc"); it != rec.end()) {
        if (!it->is_array()) Malformed(line, "field 'gc' must be an array");
        for (const json& w : *it) {
          if (!w.is_array() || w.size() != 2) Malformed(line, "gc windows must be [begin, end]");
          h.gc_windows.push_back({AsNumber(w[0], "gc begin", line),
                                  AsNumber(w[1], "gc end", line)});
        }
      }
      trace.hosts.push_back(std::move(h));
    } else if (kind == "syscounter") {
      PendingCounter c;
      c.host = GetString(rec, "host", line);
      c.sample.time = GetNumber(rec, "t", line);
      c.sample.used = GetRequestMap(rec, "used", line);
      c.line = line;
      counters.push_back(std::move(c));
    } else if (kind == "cause") {
      KnownCause c;
      c.name = GetString(rec, "name", line);
      c.host_id = GetString(rec, "host", line);
      if (rec.contains("request")) {
        c.request = GetRequest(GetString(rec, "request", line), line);
      } else if (auto preset = KnownCausePreset(c.name)) {
        c.request = *preset;
      } else {
        Malformed(line, "cause '" + c.name + "' needs a 'request'");
      }
      const json& windows = Field(rec, "windows", line);
      if (!windows.is_array()) Malformed(line, "field 'windows' must be an array");
      for (const json& w : windows) {
        if (!w.is_array() || w.size() != 3) {
          Malformed(line, "cause windows must be [begin, end, units]");
        }
        c.windows.push_back({AsNumber(w[0], "window begin", line),
                             AsNumber(w[1], "window end", line),
                             AsNumber(w[2], "window units", line)});
      }
      trace.known_causes.push_back(std::move(c));
    } else {
      Malformed(line, "unknown record kind '" + kind + "'");
    }
  }

  WorkloadTrace Finish() {
    trace.Link();
    for (PendingSample& p : samples) {
      std::size_t t = trace.FindTask(p.task);
      if (t == kNoIndex) {
        throw TraceError(TraceError::Kind::kDanglingReference,
                         "line " + std::to_string(p.line) +
                             ": sample references unknown task '" + p.task + "'",
                         p.line);
      }
      trace.tasks[t].samples.push_back(std::move(p.sample));
    }
    for (PendingCounter& c : counters) {
      std::size_t h = trace.FindHost(c.host);
      if (h == kNoIndex) {
        throw TraceError(TraceError::Kind::kDanglingReference,
                         "line " + std::to_string(c.line) +
                             ": syscounter references unknown host '" + c.host + "'",
                         c.line);
      }
      trace.hosts[h].counters.push_back(std::move(c.sample));
    }
    // Work done depends on samples, so link again now that they are attached.
    trace.Link();
    return std::move(trace);
  }
};

ojson RequestMap(const PerRequest<std::optional<double>>& values) {
  ojson out = ojson::object();
  for (ResourceRequest r : kAllRequests) {
    if (values[Index(r)]) out[std::string(Name(r))] = *values[Index(r)];
  }
  return out;
}

bool AnySet(const PerRequest<std::optional<double>>& values) {
  for (const auto& v : values) {
    if (v) return true;
  }
  return false;
}

void Emit(std::ostream& out, const ojson& rec) { out << rec.dump() << '\n'; }

}  // namespace

WorkloadTrace ParseTrace(std::istream& in, const IngestOptions& options) {
  Parser parser;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(text);
    } catch (const json::parse_error& e) {
      Malformed(line, std::string("invalid JSON: ") + e.what());
    }
    parser.Record(rec, line);
  }
  WorkloadTrace trace = parser.Finish();
  if (options.strict) {
    std::vector<Violation> violations = Validate(trace);
    if (!violations.empty()) {
      const Violation& v = violations.front();
      bool order = v.rule == "sample-order" || v.rule == "counter-order" ||
                   v.rule == "counter-monotone";
      throw TraceError(order ? TraceError::Kind::kNonMonotone : TraceError::Kind::kInvalid,
                       v.entity + ": " + v.rule + ": " + v.detail);
    }
  }
  return trace;
}

WorkloadTrace IngestTrace(const std::string& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw TraceError(TraceError::Kind::kIo, "cannot open trace file '" + path + "'");
  return ParseTrace(in, options);
}

void WriteTrace(const WorkloadTrace& trace, std::ostream& out) {
  if (trace.heartbeat_interval > 0.0) {
    ojson rec;
    rec["kind"] = "workload";
    rec["heartbeat"] = trace.heartbeat_interval;
    Emit(out, rec);
  }
  for (const HostProfile& h : trace.hosts) {
    ojson rec;
    rec["kind"] = "host";
    rec["id"] = h.id;
    if (AnySet(h.capacity)) rec["capacity"] = RequestMap(h.capacity);
    if (!h.gc_windows.empty()) {
      ojson gc = ojson::array();
      for (const TimeWindow& w : h.gc_windows) gc.push_back({w.begin, w.end});
      rec["gc"] = std::move(gc);
    }
    Emit(out, rec);
    for (const SysCounterSample& c : h.counters) {
      ojson crec;
      crec["kind"] = "syscounter";
      crec["host"] = h.id;
      crec["t"] = c.time;
      crec["used"] = RequestMap(c.used);
      Emit(out, crec);
    }
  }
  for (const QueryRecord& q : trace.queries) {
    ojson rec;
    rec["kind"] = "query";
    rec["id"] = q.id;
    rec["user"] = q.user;
    rec["submit"] = q.submit;
    rec["finish"] = q.finish;
    Emit(out, rec);
  }
  for (const StageRecord& s : trace.stages) {
    ojson rec;
    rec["kind"] = "stage";
    rec["id"] = s.id;
    rec["query"] = s.query_id;
    rec["user"] = s.user;
    rec["parents"] = s.parent_ids;
    Emit(out, rec);
  }
  for (const TaskRecord& t : trace.tasks) {
    ojson rec;
    rec["kind"] = "task";
    rec["id"] = t.id;
    rec["stage"] = t.stage_id;
    rec["query"] = t.query_id;
    rec["host"] = t.host_id;
    rec["start"] = t.start;
    rec["end"] = t.end;
    Emit(out, rec);
    for (const MetricSample& s : t.samples) {
      ojson srec;
      srec["kind"] = "sample";
      srec["task"] = t.id;
      srec["t"] = s.time;
      ojson metrics = ojson::object();
      for (ResourceRequest r : kAllRequests) {
        const RequestMetrics& m = s.metrics[Index(r)];
        if (m.IsZero()) continue;
        ojson entry;
        entry["wt"] = m.wait;
        entry["ct"] = m.consume;
        entry["ra"] = m.acquired;
        metrics[std::string(Name(r))] = std::move(entry);
      }
      srec["metrics"] = std::move(metrics);
      Emit(out, srec);
    }
  }
  for (const KnownCause& c : trace.known_causes) {
    ojson rec;
    rec["kind"] = "cause";
    rec["name"] = c.name;
    rec["host"] = c.host_id;
    rec["request"] = std::string(Name(c.request));
    ojson windows = ojson::array();
    for (const CauseWindow& w : c.windows) windows.push_back({w.begin, w.end, w.units});
    rec["windows"] = std::move(windows);
    Emit(out, rec);
  }
}

std::string SerializeTrace(const WorkloadTrace& trace) {
  std::ostringstream out;
  WriteTrace(trace, out);
  return out.str();
}

void WriteTraceFile(const WorkloadTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceError(TraceError::Kind::kIo, "cannot write trace file '" + path + "'");
  WriteTrace(trace, out);
  if (!out) throw TraceError(TraceError::Kind::kIo, "write failed for '" + path + "'");
}

}  // namespace contendscope
