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

// Hand-built trace fixtures and process helpers for tests.

#ifndef CONTENDSCOPE_TESTS_TEST_UTIL_H
#define CONTENDSCOPE_TESTS_TEST_UTIL_H

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "contendscope/trace.h"

namespace contendscope::testing {

class TraceBuilder {
 public:
  TraceBuilder& Heartbeat(double hb) {
    trace_.heartbeat_interval = hb;
    return *this;
  }
  TraceBuilder& Host(const std::string& id) {
    HostProfile h;
    h.id = id;
    trace_.hosts.push_back(std::move(h));
    return *this;
  }
  TraceBuilder& Capacity(const std::string& host, ResourceRequest r, double c) {
    FindHost(host).capacity[Index(r)] = c;
    return *this;
  }
  TraceBuilder& Gc(const std::string& host, double begin, double end) {
    FindHost(host).gc_windows.push_back({begin, end});
    return *this;
  }
  TraceBuilder& Counter(const std::string& host, double t, ResourceRequest r, double used) {
    HostProfile& h = FindHost(host);
    if (h.counters.empty() || h.counters.back().time != t) h.counters.push_back({t, {}});
    h.counters.back().used[Index(r)] = used;
    return *this;
  }
  TraceBuilder& Query(const std::string& id, const std::string& user = "u",
                      double submit = 0.0, double finish = 0.0) {
    QueryRecord q;
    q.id = id;
    q.user = user;
    q.submit = submit;
    q.finish = finish;
    trace_.queries.push_back(std::move(q));
    return *this;
  }
  TraceBuilder& Stage(const std::string& id, const std::string& query,
                      std::vector<std::string> parents = {}) {
    StageRecord s;
    s.id = id;
    s.query_id = query;
    for (const QueryRecord& q : trace_.queries) {
      if (q.id == query) s.user = q.user;
    }
    s.parent_ids = std::move(parents);
    trace_.stages.push_back(std::move(s));
    return *this;
  }
  TraceBuilder& Task(const std::string& id, const std::string& stage,
                     const std::string& host, double start, double end) {
    TaskRecord t;
    t.id = id;
    t.stage_id = stage;
    for (const StageRecord& s : trace_.stages) {
      if (s.id == stage) t.query_id = s.query_id;
    }
    t.host_id = host;
    t.start = start;
    t.end = end;
    trace_.tasks.push_back(std::move(t));
    return *this;
  }
  // Adds deltas to the sample of `task` at time t, creating it when needed.
  // Samples must be added in time order per task.
  TraceBuilder& Sample(const std::string& task, double t, ResourceRequest r, double wt,
                       double ct, double ra) {
    TaskRecord& rec = FindTask(task);
    if (rec.samples.empty() || rec.samples.back().time != t) rec.samples.push_back({t, {}});
    rec.samples.back().metrics[Index(r)] += RequestMetrics{wt, ct, ra};
    return *this;
  }
  TraceBuilder& Cause(const std::string& name, ResourceRequest r, const std::string& host,
                      std::vector<CauseWindow> windows) {
    trace_.known_causes.push_back({name, r, host, std::move(windows)});
    return *this;
  }

  WorkloadTrace Build() {
    // Queries without explicit bounds span their tasks.
    for (QueryRecord& q : trace_.queries) {
      if (q.finish > q.submit) continue;
      bool first = true;
      for (const TaskRecord& t : trace_.tasks) {
        if (t.query_id != q.id) continue;
        q.submit = first ? t.start : std::min(q.submit, t.start);
        q.finish = first ? t.end : std::max(q.finish, t.end);
        first = false;
      }
    }
    WorkloadTrace out = trace_;
    out.Link();
    return out;
  }

 private:
  HostProfile& FindHost(const std::string& id) {
    for (HostProfile& h : trace_.hosts) {
      if (h.id == id) return h;
    }
    Host(id);
    return trace_.hosts.back();
  }
  TaskRecord& FindTask(const std::string& id) {
    for (TaskRecord& t : trace_.tasks) {
      if (t.id == id) return t;
    }
    throw std::invalid_argument("unknown task " + id);
  }

  WorkloadTrace trace_;
};

// One host, one stage, 2..7 tasks with random lifetimes on a 0.1 s grid and
// jittered sample windows carrying IoRead and CpuOsSched deltas. About a fifth
// of the windows acquire nothing.
inline WorkloadTrace RandomHostTrace(std::mt19937_64& rng, double heartbeat) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TraceBuilder b;
  b.Heartbeat(heartbeat).Host("h").Query("q").Stage("s", "q");
  const int n = 2 + static_cast<int>(u(rng) * 6);
  for (int i = 0; i < n; ++i) {
    const std::string id = "t" + std::to_string(i);
    double start = std::floor(u(rng) * 200) / 10.0;
    double end = start + 0.5 + std::floor(u(rng) * 150) / 10.0;
    b.Task(id, "s", "h", start, end);
    double t = start;
    while (t < end) {
      double next = std::min(end, t + 0.3 + u(rng) * 3.0);
      double len = next - t;
      for (ResourceRequest r : {ResourceRequest::kIoRead, ResourceRequest::kCpuOsSched}) {
        double wt = u(rng) * len * 0.5;
        double ct = u(rng) * (len - wt);
        double ra = u(rng) < 0.2 ? 0.0 : u(rng) * 1000;
        b.Sample(id, next, r, wt, ct, ra);
      }
      t = next;
    }
  }
  return b.Build();
}

// Several queries of 1..3 chained stages spread over `hosts` hosts, with
// jittered IoRead/CpuOsSched/CpuGc samples, cumulative IoRead/CpuOsSched counters
// that run ahead of task usage, and GC windows on host h0.
inline WorkloadTrace RandomWorkload(std::mt19937_64& rng, int hosts, int queries,
                                    double heartbeat = 2.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TraceBuilder b;
  b.Heartbeat(heartbeat);
  for (int h = 0; h < hosts; ++h) b.Host("h" + std::to_string(h));
  b.Gc("h0", 3.0, 3.5).Gc("h0", 11.0, 12.0);
  int task_no = 0;
  for (int q = 0; q < queries; ++q) {
    const std::string qid = "q" + std::to_string(q);
    b.Query(qid, "user" + std::to_string(q % 2));
    const int stages = 1 + static_cast<int>(u(rng) * 3);
    for (int s = 0; s < stages; ++s) {
      const std::string sid = qid + "s" + std::to_string(s);
      std::vector<std::string> parents;
      if (s > 0) parents.push_back(qid + "s" + std::to_string(s - 1));
      b.Stage(sid, qid, parents);
      const int tasks = 1 + static_cast<int>(u(rng) * 3);
      for (int k = 0; k < tasks; ++k) {
        const std::string id = "t" + std::to_string(task_no++);
        const std::string host = "h" + std::to_string(static_cast<int>(u(rng) * hosts));
        const double start = std::floor(u(rng) * 150) / 10.0;
        const double end = start + 1.0 + std::floor(u(rng) * 80) / 10.0;
        b.Task(id, sid, host, start, end);
        double t = start;
        while (t < end) {
          const double next = std::min(end, t + 0.5 + u(rng) * 2.5);
          const double len = next - t;
          for (ResourceRequest r : {ResourceRequest::kIoRead, ResourceRequest::kCpuOsSched,
                                    ResourceRequest::kCpuGc}) {
            const double wt = u(rng) * len * 0.6;
            const double ct = u(rng) * (len - wt);
            const double ra = u(rng) < 0.15 ? 0.0 : u(rng) * 500;
            b.Sample(id, next, r, wt, ct, ra);
          }
          t = next;
        }
      }
    }
  }
  for (int h = 0; h < hosts; ++h) {
    double io = 0.0;
    double cpu = 0.0;
    for (int t = 0; t <= 26; ++t) {
      b.Counter("h" + std::to_string(h), t, ResourceRequest::kIoRead, io);
      b.Counter("h" + std::to_string(h), t, ResourceRequest::kCpuOsSched, cpu);
      io += 400 + u(rng) * 1600;
      cpu += 400 + u(rng) * 1600;
    }
  }
  return b.Build();
}

struct CommandResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs a shell command, capturing stdout and stderr.
inline CommandResult RunCommand(const std::string& command) {
  static int counter = 0;
  const std::filesystem::path err_path =
      std::filesystem::temp_directory_path() /
      ("contendscope_err_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  CommandResult r;
  FILE* pipe = ::popen((command + " 2>" + err_path.string()).c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream err(err_path);
  std::stringstream ss;
  ss << err.rdbuf();
  r.err = ss.str();
  std::filesystem::remove(err_path);
  return r;
}

inline std::string ReadAll(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A fresh directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("contendscope_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string operator/(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace contendscope::testing

#endif  // CONTENDSCOPE_TESTS_TEST_UTIL_H
