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

#include "contendscope/simulator.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <set>
#include <unordered_map>

#include "contendscope/blame.h"

namespace contendscope {

namespace {

constexpr std::size_t kExternal = kNoIndex;

// Platform-independent draws: std distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double Uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  int Int(int lo, int hi) {
    return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::mt19937_64 gen_;
};

struct SimTask {
  std::string id;
  std::size_t query = 0;
  std::size_t stage = 0;
  std::size_t user = 0;
  PerRequest<double> units{};
  PerRequest<double> remaining{};
  PerRequest<double> peak{};
  PerRequest<bool> demands{};
  bool injector = false;
  double magnitude = 0.0;
  long start = -1;
  long end = -1;
  long stop = -1;  // injector end tick
  std::size_t host = kNoIndex;
  MetricVector acc{};
  long last_sample = -1;
  std::vector<MetricSample> samples;
};

struct SimStage {
  std::string id;
  std::size_t query = 0;
  std::vector<std::size_t> parents;
  std::vector<std::size_t> tasks;
  std::size_t pinned = kNoIndex;
  std::size_t open = 0;
  bool released = false;
  bool done = false;
};

struct SimQuery {
  std::string id;
  std::string user;
  long submit = 0;
  double submit_time = 0.0;
  std::vector<std::size_t> stages;
  long first_start = -1;
  std::size_t open_stages = 0;
};

struct ExternalLoad {
  std::size_t host = 0;
  ResourceRequest request = ResourceRequest::kIoRead;
  double magnitude = 0.0;
  long begin = 0;
  long end = 0;
};

struct PendingInjection {
  const InjectionSpec* spec = nullptr;
  std::size_t index = 0;
  std::size_t after = kNoIndex;  // query index for relative triggers
  long start = -1;
  bool fired = false;
};

long ToTicks(double seconds, double tps) { return std::lround(seconds * tps); }

bool Exhausted(const SimTask& task, std::size_t ri) {
  return task.remaining[ri] <= 1e-9 * std::max(1.0, task.units[ri]);
}

std::string HostName(std::size_t h) { return "h" + std::to_string(h); }

class Simulation {
 public:
  Simulation(const SimConfig& config, const SimObserver& observer)
      : config_(config), observer_(observer), rng_(config.seed) {
    tps_ = static_cast<double>(std::lround(1.0 / config.tick));
    hb_ticks_ = config.heartbeat > 0.0 ? ToTicks(config.heartbeat, tps_) : 0;
    free_slots_.assign(config.hosts, config.slots);
    running_.resize(config.hosts);
    host_event_.assign(config.hosts, -1);
    used_.resize(config.hosts);
    for (auto& u : used_) u.fill(0.0);
    counters_.resize(config.hosts);
    for (const QuerySpec& q : config.queries) AddQuery(q);
    GenerateRandomQueries();
    for (std::size_t i = 0; i < config.injections.size(); ++i) {
      PendingInjection p;
      p.spec = &config.injections[i];
      p.index = i;
      if (p.spec->after_query) {
        p.after = FindQuery(*p.spec->after_query);
        if (p.after == kNoIndex) {
          throw SimError("injection " + std::to_string(i) + " waits for unknown query '" +
                         *p.spec->after_query + "'");
        }
      } else {
        p.start = ToTicks(p.spec->start, tps_);
      }
      injections_.push_back(p);
    }
    truth_.injection_windows.resize(config.injections.size());
  }

  SimResult Run() {
    const long limit = ToTicks(config_.max_time, tps_);
    for (long k = 0;; ++k) {
      ReleaseQueries(k);
      Schedule(k);
      FireInjections(k);
      Sample(k);
      if (Finished()) break;
      if (k >= limit) {
        throw SimError("simulation did not finish within " + std::to_string(config_.max_time) +
                       " s");
      }
      Step(k);
      Complete(k + 1);
    }
    return Assemble();
  }

 private:
  double Time(long k) const { return static_cast<double>(k) / tps_; }

  std::size_t FindQuery(const std::string& id) const {
    for (std::size_t i = 0; i < queries_.size(); ++i) {
      if (queries_[i].id == id) return i;
    }
    return kNoIndex;
  }

  std::size_t UserIndex(const std::string& user) {
    auto [it, inserted] = user_index_.emplace(user, 0);
    if (inserted) {
      users_.push_back(user);
      ready_.emplace_back();
      running_per_user_.push_back(0);
      it->second = users_.size() - 1;
    }
    return it->second;
  }

  void AddQuery(const QuerySpec& spec) {
    SimQuery q;
    q.id = spec.id;
    q.user = spec.user;
    q.submit = static_cast<long>(std::ceil(spec.submit * tps_ - 1e-9));
    q.submit_time = spec.submit;
    const std::size_t qi = queries_.size();
    const std::size_t user = UserIndex(spec.user);
    std::unordered_map<std::string, std::size_t> local;
    for (const StageSpec& ss : spec.stages) {
      SimStage s;
      s.id = ss.id;
      s.query = qi;
      for (const std::string& p : ss.parents) {
        auto it = local.find(p);
        if (it == local.end()) {
          throw SimError("stage '" + ss.id + "' depends on '" + p +
                         "', which is not an earlier stage of its query");
        }
        s.parents.push_back(it->second);
      }
      if (ss.host) {
        s.pinned = HostIndex(*ss.host);
        if (s.pinned == kNoIndex) throw SimError("stage '" + ss.id + "' pins unknown host");
      }
      const std::size_t si = stages_.size();
      for (int t = 0; t < ss.tasks; ++t) {
        SimTask task;
        task.id = ss.id + "-t" + std::to_string(t);
        task.query = qi;
        task.stage = si;
        task.user = user;
        for (ResourceRequest r : kAllRequests) {
          const auto& d = ss.demand[Index(r)];
          if (!d) continue;
          task.demands[Index(r)] = d->units > 0.0;
          task.units[Index(r)] = d->units;
          task.remaining[Index(r)] = d->units;
          task.peak[Index(r)] = d->peak;
        }
        s.tasks.push_back(tasks_.size());
        tasks_.push_back(std::move(task));
      }
      s.open = s.tasks.size();
      local[ss.id] = si;
      q.stages.push_back(si);
      stages_.push_back(std::move(s));
    }
    q.open_stages = q.stages.size();
    queries_.push_back(std::move(q));
  }

  std::size_t HostIndex(const std::string& id) const {
    for (int h = 0; h < config_.hosts; ++h) {
      if (HostName(h) == id) return h;
    }
    return kNoIndex;
  }

  void GenerateRandomQueries() {
    const RandomQueries& rq = config_.random;
    for (int i = 0; i < rq.count; ++i) {
      QuerySpec q;
      q.id = "q" + std::to_string(i);
      while (FindQuery(q.id) != kNoIndex) q.id = "r" + q.id;
      q.user = "u" + std::to_string(i % std::max(1, rq.users));
      q.submit = std::round(rng_.Uniform(0.0, rq.submit_spread) * tps_) / tps_;
      const int stages = rng_.Int(rq.min_stages, rq.max_stages);
      for (int s = 0; s < stages; ++s) {
        StageSpec stage;
        stage.id = q.id + "s" + std::to_string(s);
        if (s > 0) stage.parents.push_back(q.id + "s" + std::to_string(s - 1));
        stage.tasks = rng_.Int(rq.min_tasks, rq.max_tasks);
        q.stages.push_back(std::move(stage));
      }
      AddQuery(q);
      // Per-task demand jitter.
      for (std::size_t si : queries_.back().stages) {
        for (std::size_t ti : stages_[si].tasks) {
          SimTask& task = tasks_[ti];
          for (ResourceRequest r : kAllRequests) {
            const auto& d = rq.demand[Index(r)];
            if (!d) continue;
            const double units = d->units * rng_.Uniform(1.0 - rq.jitter, 1.0 + rq.jitter);
            task.demands[Index(r)] = units > 0.0;
            task.units[Index(r)] = units;
            task.remaining[Index(r)] = units;
            task.peak[Index(r)] = d->peak;
          }
        }
      }
    }
  }

  void ReleaseStage(std::size_t si) {
    SimStage& s = stages_[si];
    if (s.released) return;
    s.released = true;
    for (std::size_t t : s.tasks) ready_[tasks_[t].user].push_back(t);
    if (s.tasks.empty()) FinishStage(si);
  }

  void ReleaseQueries(long k) {
    for (SimQuery& q : queries_) {
      if (q.submit != k) continue;
      for (std::size_t si : q.stages) {
        if (stages_[si].parents.empty()) ReleaseStage(si);
      }
    }
  }

  void FinishStage(std::size_t si) {
    SimStage& s = stages_[si];
    s.done = true;
    SimQuery& q = queries_[s.query];
    --q.open_stages;
    for (std::size_t other : q.stages) {
      const SimStage& o = stages_[other];
      if (o.released) continue;
      bool ready = true;
      for (std::size_t p : o.parents) ready = ready && stages_[p].done;
      if (ready) ReleaseStage(other);
    }
  }

  void StartTask(std::size_t t, std::size_t host, long k) {
    SimTask& task = tasks_[t];
    task.host = host;
    task.start = k;
    task.last_sample = k;
    running_[host].push_back(t);
    host_event_[host] = k;
    SimQuery& q = queries_[task.query];
    if (q.first_start < 0) q.first_start = k;
  }

  // Fair share per user: the user with the fewest running tasks goes next.
  void Schedule(long k) {
    std::vector<bool> blocked(users_.size(), false);
    while (true) {
      int total_free = 0;
      for (int f : free_slots_) total_free += f;
      if (total_free == 0) return;
      std::size_t pick = kNoIndex;
      for (std::size_t u = 0; u < users_.size(); ++u) {
        if (blocked[u] || ready_[u].empty()) continue;
        if (pick == kNoIndex || running_per_user_[u] < running_per_user_[pick] ||
            (running_per_user_[u] == running_per_user_[pick] && users_[u] < users_[pick])) {
          pick = u;
        }
      }
      if (pick == kNoIndex) return;
      std::deque<std::size_t>& queue = ready_[pick];
      bool placed = false;
      for (auto it = queue.begin(); it != queue.end(); ++it) {
        const std::size_t pinned = stages_[tasks_[*it].stage].pinned;
        std::size_t host = kNoIndex;
        if (pinned != kNoIndex) {
          if (free_slots_[pinned] > 0) host = pinned;
        } else {
          for (std::size_t h = 0; h < free_slots_.size(); ++h) {
            if (free_slots_[h] > 0 && (host == kNoIndex || free_slots_[h] > free_slots_[host])) {
              host = h;
            }
          }
        }
        if (host == kNoIndex) continue;
        const std::size_t t = *it;
        queue.erase(it);
        --free_slots_[host];
        ++running_per_user_[pick];
        StartTask(t, host, k);
        placed = true;
        break;
      }
      if (!placed) blocked[pick] = true;
    }
  }

  void FireInjections(long k) {
    for (PendingInjection& p : injections_) {
      if (p.fired) continue;
      if (p.after != kNoIndex) {
        if (queries_[p.after].first_start < 0) continue;
        p.start = queries_[p.after].first_start + ToTicks(p.spec->offset, tps_);
      }
      if (p.start > k) continue;
      p.fired = true;
      const long begin = k;
      const long end = k + std::max(1L, ToTicks(p.spec->duration, tps_));
      truth_.injection_windows[p.index] = {Time(begin), Time(end)};
      std::vector<std::size_t> hosts;
      if (p.spec->hosts.empty()) {
        for (int h = 0; h < config_.hosts; ++h) hosts.push_back(h);
      } else {
        for (const std::string& id : p.spec->hosts) hosts.push_back(HostIndex(id));
      }
      const ResourceRequest r = InjectionRequest(p.spec->kind);
      if (IsExternal(p.spec->kind)) {
        for (std::size_t h : hosts) externals_.push_back({h, r, p.spec->magnitude, begin, end});
        continue;
      }
      SimQuery q;
      q.id = "inj" + std::to_string(p.index);
      q.user = "injector";
      q.submit = k;
      q.submit_time = Time(k);
      const std::size_t qi = queries_.size();
      SimStage s;
      s.id = q.id + "s";
      s.query = qi;
      s.released = true;
      const std::size_t si = stages_.size();
      const std::size_t user = UserIndex(q.user);
      for (std::size_t h : hosts) {
        SimTask task;
        task.id = s.id + "-" + HostName(h);
        task.query = qi;
        task.stage = si;
        task.user = user;
        task.injector = true;
        task.magnitude = p.spec->magnitude;
        task.demands[Index(r)] = true;
        task.peak[Index(r)] = p.spec->magnitude;
        task.stop = end;
        s.tasks.push_back(tasks_.size());
        tasks_.push_back(std::move(task));
        StartTask(tasks_.size() - 1, h, k);
      }
      s.open = s.tasks.size();
      q.stages.push_back(si);
      q.open_stages = 1;
      stages_.push_back(std::move(s));
      queries_.push_back(std::move(q));
      truth_.aggressors.push_back(queries_.back().id);
    }
  }

  void Flush(std::size_t t, long k) {
    SimTask& task = tasks_[t];
    if (task.last_sample >= k) return;
    task.samples.push_back({Time(k), task.acc});
    task.acc = {};
    task.last_sample = k;
  }

  void Sample(long k) {
    const bool heartbeat = hb_ticks_ > 0 && k % hb_ticks_ == 0;
    for (std::size_t h = 0; h < running_.size(); ++h) {
      if (!heartbeat && host_event_[h] != k && k != 0) continue;
      for (std::size_t t : running_[h]) Flush(t, k);
      SysCounterSample c;
      c.time = Time(k);
      for (ResourceRequest r : kAllRequests) {
        if (config_.capacity[Index(r)]) c.used[Index(r)] = used_[h][Index(r)];
      }
      if (counters_[h].empty() || counters_[h].back().time < c.time) {
        counters_[h].push_back(std::move(c));
      }
    }
  }

  bool Finished() const {
    for (const SimQuery& q : queries_) {
      if (q.open_stages > 0) return false;
    }
    for (const PendingInjection& p : injections_) {
      if (!p.fired) return false;
    }
    return true;
  }

  void Step(long k) {
    const double dt = 1.0 / tps_;
    struct Demander {
      std::size_t task;  // kExternal for external load
      double d;
      double g;
    };
    std::vector<Demander> ds;
    for (std::size_t h = 0; h < running_.size(); ++h) {
      for (ResourceRequest r : kAllRequests) {
        const std::size_t ri = Index(r);
        ds.clear();
        for (std::size_t t : running_[h]) {
          const SimTask& task = tasks_[t];
          if (!task.demands[ri]) continue;
          if (!task.injector && Exhausted(task, ri)) continue;
          ds.push_back({t, task.injector ? task.magnitude : task.peak[ri], 0.0});
        }
        for (const ExternalLoad& e : externals_) {
          if (e.host == h && e.request == r && e.begin <= k && k < e.end) {
            ds.push_back({kExternal, e.magnitude, 0.0});
          }
        }
        if (ds.empty()) continue;
        double total = 0.0;
        for (const Demander& x : ds) total += x.d;
        const double cap = *config_.capacity[ri];
        const double scale = total > cap ? cap / total : 1.0;
        double granted = 0.0;
        for (Demander& x : ds) {
          x.g = x.d * scale;
          granted += x.g;
        }
        if (observer_) observer_(Time(k), h, r, granted, cap);
        for (const Demander& x : ds) {
          if (x.task == kExternal) {
            used_[h][ri] += x.g * dt;
            continue;
          }
          SimTask& task = tasks_[x.task];
          const double p = task.peak[ri];
          // A task whose demand runs out mid-tick accrues only that fraction.
          double f = 1.0;
          if (!task.injector && x.g * dt > task.remaining[ri]) f = task.remaining[ri] / (x.g * dt);
          const double wait = (x.d - x.g) * f * dt / p;
          task.acc[ri].consume += x.g * f * dt / p;
          task.acc[ri].wait += wait;
          task.acc[ri].acquired += x.g * f * dt;
          used_[h][ri] += x.g * f * dt;
          if (!task.injector) task.remaining[ri] = std::max(0.0, task.remaining[ri] - x.g * dt);
          if (wait <= 0.0) continue;
          const double others = granted - x.g;
          for (const Demander& y : ds) {
            if (y.task == x.task || y.g <= 0.0) continue;
            caused_[{x.task, y.task, ri}] += wait * y.g / others;
          }
        }
      }
    }
  }

  bool Done(const SimTask& task, long k) const {
    if (task.injector) return k >= task.stop;
    for (ResourceRequest r : kAllRequests) {
      const std::size_t ri = Index(r);
      if (task.demands[ri] && !Exhausted(task, ri)) {
        return false;
      }
    }
    return true;
  }

  void Complete(long k) {
    for (std::size_t h = 0; h < running_.size(); ++h) {
      std::vector<std::size_t>& list = running_[h];
      std::vector<std::size_t> keep;
      for (std::size_t t : list) {
        SimTask& task = tasks_[t];
        if (!Done(task, k)) {
          keep.push_back(t);
          continue;
        }
        task.end = k;
        Flush(t, k);
        host_event_[h] = k;
        if (!task.injector) {
          ++free_slots_[h];
          --running_per_user_[task.user];
        }
        SimStage& s = stages_[task.stage];
        if (--s.open == 0) FinishStage(task.stage);
      }
      list = std::move(keep);
    }
  }

  SimResult Assemble() {
    SimResult out;
    WorkloadTrace& trace = out.trace;
    trace.heartbeat_interval = config_.heartbeat;
    for (int h = 0; h < config_.hosts; ++h) {
      HostProfile host;
      host.id = HostName(h);
      host.capacity = config_.capacity;
      host.counters = std::move(counters_[h]);
      trace.hosts.push_back(std::move(host));
    }
    for (const SimQuery& q : queries_) {
      QueryRecord rec;
      rec.id = q.id;
      rec.user = q.user;
      rec.submit = q.submit_time;
      rec.finish = q.submit_time;
      for (std::size_t si : q.stages) {
        for (std::size_t t : stages_[si].tasks) rec.finish = std::max(rec.finish, Time(tasks_[t].end));
      }
      trace.queries.push_back(std::move(rec));
    }
    for (const SimStage& s : stages_) {
      StageRecord rec;
      rec.id = s.id;
      rec.query_id = queries_[s.query].id;
      rec.user = queries_[s.query].user;
      for (std::size_t p : s.parents) rec.parent_ids.push_back(stages_[p].id);
      trace.stages.push_back(std::move(rec));
    }
    for (SimTask& t : tasks_) {
      TaskRecord rec;
      rec.id = t.id;
      rec.stage_id = stages_[t.stage].id;
      rec.query_id = queries_[t.query].id;
      rec.host_id = HostName(t.host);
      rec.start = Time(t.start);
      rec.end = Time(t.end);
      rec.samples = std::move(t.samples);
      trace.tasks.push_back(std::move(rec));
    }
    trace.Link();

    std::vector<std::pair<std::tuple<std::string, std::string, std::size_t>, CausedBlocked>> rows;
    for (const auto& [key, seconds] : caused_) {
      const auto& [target, source, ri] = key;
      CausedBlocked c;
      c.target_task = tasks_[target].id;
      c.target_query = queries_[tasks_[target].query].id;
      c.source = source == kExternal ? kUnknownName : tasks_[source].id;
      c.source_query = source == kExternal ? kUnknownName : queries_[tasks_[source].query].id;
      c.request = kAllRequests[ri];
      c.seconds = seconds;
      rows.push_back({{c.target_task, c.source, ri}, std::move(c)});
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [key, c] : rows) truth_.caused.push_back(std::move(c));
    out.truth = std::move(truth_);
    return out;
  }

  struct KeyHash {
    std::size_t operator()(const std::tuple<std::size_t, std::size_t, std::size_t>& k) const {
      const auto& [a, b, c] = k;
      return std::hash<std::size_t>()(a * 1000003u ^ b * 10007u ^ c);
    }
  };

  const SimConfig& config_;
  const SimObserver& observer_;
  Rng rng_;
  double tps_ = 10.0;
  long hb_ticks_ = 0;

  std::vector<SimQuery> queries_;
  std::vector<SimStage> stages_;
  std::vector<SimTask> tasks_;
  std::vector<std::string> users_;
  std::map<std::string, std::size_t> user_index_;
  std::vector<std::deque<std::size_t>> ready_;
  std::vector<int> running_per_user_;

  std::vector<int> free_slots_;
  std::vector<std::vector<std::size_t>> running_;
  std::vector<long> host_event_;
  std::vector<PerRequest<double>> used_;
  std::vector<std::vector<SysCounterSample>> counters_;
  std::vector<ExternalLoad> externals_;
  std::vector<PendingInjection> injections_;

  std::unordered_map<std::tuple<std::size_t, std::size_t, std::size_t>, double, KeyHash> caused_;
  GroundTruth truth_;
};

constexpr std::array<std::string_view, 5> kInjectionNames = {
    "CpuInternal", "IoInternal", "MemInternal", "IoExternal", "CpuExternal"};

}  // namespace

ResourceRequest InjectionRequest(InjectionKind kind) {
  switch (kind) {
    case InjectionKind::kCpuInternal:
    case InjectionKind::kCpuExternal:
      return ResourceRequest::kCpuOsSched;
    case InjectionKind::kIoInternal:
    case InjectionKind::kIoExternal:
      return ResourceRequest::kIoRead;
    case InjectionKind::kMemInternal:
      return ResourceRequest::kStorageMemory;
  }
  return ResourceRequest::kCpuOsSched;
}

bool IsExternal(InjectionKind kind) {
  return kind == InjectionKind::kIoExternal || kind == InjectionKind::kCpuExternal;
}

std::string_view Name(InjectionKind kind) { return kInjectionNames[static_cast<int>(kind)]; }

std::optional<InjectionKind> ParseInjectionKind(std::string_view name) {
  for (std::size_t i = 0; i < kInjectionNames.size(); ++i) {
    if (kInjectionNames[i] == name) return static_cast<InjectionKind>(i);
  }
  return std::nullopt;
}

std::map<std::string, double> GroundTruth::BySourceQuery(
    const std::string& target_query, std::optional<ResourceRequest> request) const {
  std::map<std::string, double> out;
  for (const CausedBlocked& c : caused) {
    if (!target_query.empty() && c.target_query != target_query) continue;
    if (request && c.request != *request) continue;
    out[c.source_query] += c.seconds;
  }
  return out;
}

void ValidateConfig(const SimConfig& c) {
  auto fail = [](const std::string& what) { throw SimError("invalid config: " + what); };
  if (!(c.tick > 0.0)) fail("tick must be positive");
  const double tps = 1.0 / c.tick;
  if (std::abs(tps - std::round(tps)) > 1e-9) fail("1/tick must be an integer");
  if (c.heartbeat < 0.0) fail("heartbeat must be >= 0");
  if (c.heartbeat > 0.0 && std::abs(c.heartbeat * tps - std::round(c.heartbeat * tps)) > 1e-6) {
    fail("heartbeat must be a multiple of tick");
  }
  if (c.hosts < 1) fail("at least one host is required");
  if (c.slots < 1) fail("slots must be >= 1");
  if (!(c.max_time > 0.0)) fail("max_time must be positive");
  for (ResourceRequest r : kAllRequests) {
    const auto& cap = c.capacity[Index(r)];
    if (cap && !(*cap > 0.0)) fail("capacity of " + std::string(Name(r)) + " must be > 0");
  }
  auto check_demand = [&](const PerRequest<std::optional<Demand>>& demand,
                          const std::string& where) {
    for (ResourceRequest r : kAllRequests) {
      const auto& d = demand[Index(r)];
      if (!d) continue;
      if (!c.capacity[Index(r)]) {
        fail(where + " demands " + std::string(Name(r)) + ", which has no capacity");
      }
      if (d->units < 0.0) fail(where + ": demand units must be >= 0");
      if (!(d->peak > 0.0) || d->peak > *c.capacity[Index(r)]) {
        fail(where + ": peak of " + std::string(Name(r)) + " must be in (0, capacity]");
      }
    }
  };
  std::set<std::string> queries;
  std::set<std::string> stages;
  for (const QuerySpec& q : c.queries) {
    if (q.id.empty() || !queries.insert(q.id).second) fail("duplicate or empty query id");
    if (q.submit < 0.0) fail("query '" + q.id + "' submit must be >= 0");
    for (const StageSpec& s : q.stages) {
      if (s.id.empty() || !stages.insert(s.id).second) fail("duplicate or empty stage id");
      if (s.tasks < 0) fail("stage '" + s.id + "' has a negative task count");
      check_demand(s.demand, "stage '" + s.id + "'");
    }
  }
  const RandomQueries& rq = c.random;
  if (rq.count < 0) fail("random.count must be >= 0");
  if (rq.count > 0) {
    if (rq.min_stages < 1 || rq.max_stages < rq.min_stages) fail("random stage range");
    if (rq.min_tasks < 1 || rq.max_tasks < rq.min_tasks) fail("random task range");
    if (rq.submit_spread < 0.0) fail("random.submit_spread must be >= 0");
    if (rq.jitter < 0.0 || rq.jitter > 1.0) fail("random.jitter must be in [0, 1]");
    check_demand(rq.demand, "random queries");
  }
  for (const InjectionSpec& i : c.injections) {
    if (!(i.magnitude > 0.0)) fail("injection magnitude must be > 0");
    if (!(i.duration > 0.0)) fail("injection duration must be > 0");
    if (!c.capacity[Index(InjectionRequest(i.kind))]) {
      fail(std::string(Name(i.kind)) + " injection needs capacity for " +
           std::string(Name(InjectionRequest(i.kind))));
    }
    for (const std::string& h : i.hosts) {
      bool found = false;
      for (int k = 0; k < c.hosts; ++k) found = found || HostName(k) == h;
      if (!found) fail("injection host '" + h + "' does not exist");
    }
  }
}

SimResult Simulate(const SimConfig& config, const SimObserver& observer) {
  ValidateConfig(config);
  return Simulation(config, observer).Run();
}

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

ojson DemandToJson(const PerRequest<std::optional<Demand>>& demand) {
  ojson out = ojson::object();
  for (ResourceRequest r : kAllRequests) {
    if (const auto& d = demand[Index(r)]) {
      out[std::string(Name(r))] = {{"units", d->units}, {"peak", d->peak}};
    }
  }
  return out;
}

PerRequest<std::optional<Demand>> DemandFromJson(const json& j) {
  PerRequest<std::optional<Demand>> out{};
  for (const auto& [name, v] : j.items()) {
    auto r = ParseRequest(name);
    if (!r) throw SimError("unknown request '" + name + "'");
    out[Index(*r)] = Demand{v.at("units").get<double>(), v.value("peak", 1.0)};
  }
  return out;
}

}  // namespace

ojson SimConfigToJson(const SimConfig& c) {
  ojson out;
  out["seed"] = c.seed;
  out["tick"] = c.tick;
  out["heartbeat"] = c.heartbeat;
  out["max_time"] = c.max_time;
  out["hosts"] = c.hosts;
  out["slots"] = c.slots;
  ojson cap = ojson::object();
  for (ResourceRequest r : kAllRequests) {
    if (c.capacity[Index(r)]) cap[std::string(Name(r))] = *c.capacity[Index(r)];
  }
  out["capacity"] = cap;
  ojson queries = ojson::array();
  for (const QuerySpec& q : c.queries) {
    ojson qj;
    qj["id"] = q.id;
    qj["user"] = q.user;
    qj["submit"] = q.submit;
    ojson stages = ojson::array();
    for (const StageSpec& s : q.stages) {
      ojson sj;
      sj["id"] = s.id;
      sj["parents"] = s.parents;
      sj["tasks"] = s.tasks;
      sj["demand"] = DemandToJson(s.demand);
      if (s.host) sj["host"] = *s.host;
      stages.push_back(std::move(sj));
    }
    qj["stages"] = std::move(stages);
    queries.push_back(std::move(qj));
  }
  out["queries"] = std::move(queries);
  ojson random;
  random["count"] = c.random.count;
  random["users"] = c.random.users;
  random["min_stages"] = c.random.min_stages;
  random["max_stages"] = c.random.max_stages;
  random["min_tasks"] = c.random.min_tasks;
  random["max_tasks"] = c.random.max_tasks;
  random["submit_spread"] = c.random.submit_spread;
  random["demand"] = DemandToJson(c.random.demand);
  random["jitter"] = c.random.jitter;
  out["random"] = std::move(random);
  ojson injections = ojson::array();
  for (const InjectionSpec& i : c.injections) {
    ojson ij;
    ij["kind"] = Name(i.kind);
    if (i.after_query) {
      ij["after_query"] = *i.after_query;
      ij["offset"] = i.offset;
    } else {
      ij["start"] = i.start;
    }
    ij["magnitude"] = i.magnitude;
    ij["duration"] = i.duration;
    ij["hosts"] = i.hosts;
    injections.push_back(std::move(ij));
  }
  out["injections"] = std::move(injections);
  return out;
}

SimConfig SimConfigFromJson(const json& j) {
  SimConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.tick = j.value("tick", c.tick);
    c.heartbeat = j.value("heartbeat", c.heartbeat);
    c.max_time = j.value("max_time", c.max_time);
    c.hosts = j.value("hosts", c.hosts);
    c.slots = j.value("slots", c.slots);
    if (j.contains("capacity")) {
      for (const auto& [name, v] : j.at("capacity").items()) {
        auto r = ParseRequest(name);
        if (!r) throw SimError("unknown request '" + name + "'");
        c.capacity[Index(*r)] = v.get<double>();
      }
    }
    for (const json& qj : j.value("queries", json::array())) {
      QuerySpec q;
      q.id = qj.at("id").get<std::string>();
      q.user = qj.value("user", "u");
      q.submit = qj.value("submit", 0.0);
      for (const json& sj : qj.value("stages", json::array())) {
        StageSpec s;
        s.id = sj.at("id").get<std::string>();
        s.parents = sj.value("parents", std::vector<std::string>{});
        s.tasks = sj.value("tasks", 1);
        if (sj.contains("demand")) s.demand = DemandFromJson(sj.at("demand"));
        if (sj.contains("host")) s.host = sj.at("host").get<std::string>();
        q.stages.push_back(std::move(s));
      }
      c.queries.push_back(std::move(q));
    }
    if (j.contains("random")) {
      const json& rj = j.at("random");
      RandomQueries& r = c.random;
      r.count = rj.value("count", r.count);
      r.users = rj.value("users", r.users);
      r.min_stages = rj.value("min_stages", r.min_stages);
      r.max_stages = rj.value("max_stages", r.max_stages);
      r.min_tasks = rj.value("min_tasks", r.min_tasks);
      r.max_tasks = rj.value("max_tasks", r.max_tasks);
      r.submit_spread = rj.value("submit_spread", r.submit_spread);
      r.jitter = rj.value("jitter", r.jitter);
      if (rj.contains("demand")) r.demand = DemandFromJson(rj.at("demand"));
    }
    for (const json& ij : j.value("injections", json::array())) {
      InjectionSpec i;
      const std::string kind = ij.at("kind").get<std::string>();
      auto k = ParseInjectionKind(kind);
      if (!k) throw SimError("unknown injection kind '" + kind + "'");
      i.kind = *k;
      if (ij.contains("after_query")) i.after_query = ij.at("after_query").get<std::string>();
      i.start = ij.value("start", 0.0);
      i.offset = ij.value("offset", 0.0);
      i.magnitude = ij.at("magnitude").get<double>();
      i.duration = ij.at("duration").get<double>();
      i.hosts = ij.value("hosts", std::vector<std::string>{});
      c.injections.push_back(std::move(i));
    }
  } catch (const json::exception& e) {
    throw SimError(std::string("invalid config: ") + e.what());
  }
  ValidateConfig(c);
  return c;
}

ojson GroundTruthToJson(const GroundTruth& truth) {
  ojson out;
  out["aggressors"] = truth.aggressors;
  ojson windows = ojson::array();
  for (const TimeWindow& w : truth.injection_windows) windows.push_back({w.begin, w.end});
  out["injections"] = std::move(windows);
  ojson caused = ojson::array();
  for (const CausedBlocked& c : truth.caused) {
    ojson row;
    row["target_task"] = c.target_task;
    row["target_query"] = c.target_query;
    row["source"] = c.source;
    row["source_query"] = c.source_query;
    row["request"] = Name(c.request);
    row["caused_blocked_s"] = c.seconds;
    caused.push_back(std::move(row));
  }
  out["caused"] = std::move(caused);
  return out;
}

GroundTruth GroundTruthFromJson(const json& j) {
  GroundTruth t;
  try {
    t.aggressors = j.value("aggressors", std::vector<std::string>{});
    for (const json& w : j.value("injections", json::array())) {
      t.injection_windows.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
    }
    for (const json& row : j.at("caused")) {
      CausedBlocked c;
      c.target_task = row.at("target_task").get<std::string>();
      c.target_query = row.value("target_query", "");
      c.source = row.at("source").get<std::string>();
      c.source_query = row.value("source_query", c.source);
      auto r = ParseRequest(row.at("request").get<std::string>());
      if (!r) throw SimError("ground truth: unknown request");
      c.request = *r;
      c.seconds = row.at("caused_blocked_s").get<double>();
      t.caused.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw SimError(std::string("invalid ground truth: ") + e.what());
  }
  return t;
}

namespace {

Demand D(double units, double peak = 1.0) { return {units, peak}; }

constexpr ResourceRequest kCpu = ResourceRequest::kCpuOsSched;
constexpr ResourceRequest kIo = ResourceRequest::kIoRead;
constexpr ResourceRequest kMem = ResourceRequest::kStorageMemory;

// Three hosts of four slots with CPU, IO and memory capacity, a seeded
// background of seven queries from three users, and target q-target.
SimConfig MixedCluster(std::uint64_t seed, Demand target_cpu, Demand target_io,
                       Demand target_mem) {
  SimConfig c;
  c.seed = seed;
  c.hosts = 3;
  c.slots = 4;
  c.capacity[Index(kCpu)] = 4.0;
  c.capacity[Index(kIo)] = 4.0;
  c.capacity[Index(kMem)] = 4.0;
  QuerySpec target;
  target.id = "q-target";
  target.user = "analyst";
  target.submit = 6.0;
  for (int s = 0; s < 3; ++s) {
    StageSpec stage;
    stage.id = "q-target-s" + std::to_string(s);
    if (s > 0) stage.parents.push_back("q-target-s" + std::to_string(s - 1));
    stage.tasks = 3;
    if (target_cpu.units > 0) stage.demand[Index(kCpu)] = target_cpu;
    if (target_io.units > 0) stage.demand[Index(kIo)] = target_io;
    if (target_mem.units > 0) stage.demand[Index(kMem)] = target_mem;
    target.stages.push_back(std::move(stage));
  }
  c.queries.push_back(std::move(target));
  c.random.count = 7;
  c.random.users = 3;
  c.random.min_stages = 1;
  c.random.max_stages = 3;
  c.random.min_tasks = 1;
  c.random.max_tasks = 4;
  c.random.submit_spread = 20.0;
  c.random.demand[Index(kCpu)] = D(3.0);
  c.random.demand[Index(kIo)] = D(3.0);
  c.random.jitter = 0.5;
  return c;
}

InjectionSpec AfterTarget(InjectionKind kind, double magnitude, double duration) {
  InjectionSpec i;
  i.kind = kind;
  i.after_query = "q-target";
  i.offset = 1.0;
  i.magnitude = magnitude;
  i.duration = duration;
  return i;
}

}  // namespace

std::vector<std::string> ScenarioNames() {
  return {"baseline-no-injection", "capacity-exact-1", "capacity-exact-2", "capacity-exact-4",
          "cpu-internal-hog",      "disjoint-resource", "io-external-load", "mem-internal-cache",
          "scale-10000"};
}

Scenario MakeScenario(const std::string& name, std::uint64_t seed) {
  Scenario s;
  s.name = name;
  s.target = "q-target";
  if (name == "baseline-no-injection") {
    s.description = "mixed background workload, no injected contention";
    s.config = MixedCluster(seed, D(4.0), D(2.0), D(0.0));
  } else if (name == "cpu-internal-hog") {
    s.description = "CPU-hungry query injected on every host just after the target starts";
    s.config = MixedCluster(seed, D(4.0), D(1.0), D(0.0));
    s.config.injections.push_back(AfterTarget(InjectionKind::kCpuInternal, 12.0, 15.0));
  } else if (name == "io-external-load") {
    s.description = "large external read on every host, visible only in host counters";
    s.config = MixedCluster(seed, D(1.0), D(6.0), D(0.0));
    s.config.injections.push_back(AfterTarget(InjectionKind::kIoExternal, 12.0, 15.0));
  } else if (name == "mem-internal-cache") {
    s.description = "query caching a table in storage memory while the target runs";
    s.config = MixedCluster(seed, D(2.0), D(1.0), D(4.0));
    s.config.injections.push_back(AfterTarget(InjectionKind::kMemInternal, 12.0, 15.0));
  } else if (name == "disjoint-resource") {
    // cpu-long covers the whole target lifetime but never touches IO; io-hog
    // contends for IO over part of it.
    s.description = "wall-clock overlap without shared resources versus real IO contention";
    SimConfig& c = s.config;
    c.seed = seed;
    c.hosts = 1;
    c.slots = 4;
    c.capacity[Index(kCpu)] = 4.0;
    c.capacity[Index(kIo)] = 1.0;
    auto single = [](const std::string& id, double submit, ResourceRequest r, Demand d) {
      QuerySpec q;
      q.id = id;
      q.user = id;
      q.submit = submit;
      StageSpec st;
      st.id = id + "-s0";
      st.demand[Index(r)] = d;
      q.stages.push_back(std::move(st));
      return q;
    };
    c.queries.push_back(single("cpu-long", 0.0, kCpu, D(60.0)));
    c.queries.push_back(single("q-target", 5.0, kIo, D(10.0)));
    c.queries.push_back(single("io-hog", 8.0, kIo, D(8.0)));
  } else if (name.rfind("capacity-exact-", 0) == 0) {
    // Target plus n identical sources, each demanding the full capacity of
    // one request from time 0.
    const int n = std::atoi(name.c_str() + 15);
    if (n < 1) throw SimError("unknown scenario '" + name + "'");
    s.description = "full-overlap peers each demanding the whole capacity of IoRead";
    SimConfig& c = s.config;
    c.seed = seed;
    c.hosts = 1;
    c.slots = n + 1;
    c.capacity[Index(kIo)] = 1.0;
    for (int i = 0; i <= n; ++i) {
      QuerySpec q;
      q.id = i == 0 ? "q-target" : "src" + std::to_string(i);
      q.user = "u";
      StageSpec st;
      st.id = q.id + "-s0";
      st.demand[Index(kIo)] = D(10.0);
      q.stages.push_back(std::move(st));
      c.queries.push_back(std::move(q));
    }
  } else if (name.rfind("scale-", 0) == 0) {
    const int tasks = std::atoi(name.c_str() + 6);
    if (tasks < 1) throw SimError("unknown scenario '" + name + "'");
    s.description = "many five-stage queries of ten tasks on twenty hosts";
    SimConfig& c = s.config;
    c.seed = seed;
    c.hosts = 20;
    c.slots = 8;
    c.capacity[Index(kCpu)] = 8.0;
    c.capacity[Index(kIo)] = 8.0;
    c.random.count = (tasks + 49) / 50;
    c.random.users = 6;
    c.random.min_stages = c.random.max_stages = 5;
    c.random.min_tasks = c.random.max_tasks = 10;
    c.random.submit_spread = c.random.count * 0.5;
    c.random.demand[Index(kCpu)] = D(2.0);
    c.random.demand[Index(kIo)] = D(2.0);
    s.target = "q0";
  } else {
    throw SimError("unknown scenario '" + name + "'");
  }
  ValidateConfig(s.config);
  return s;
}

AttributionScore ScoreAttribution(const GroundTruth& truth, const RankedList& ranked,
                                  std::size_t k, const std::string& target_query) {
  AttributionScore score;
  const std::set<std::string> aggressors(truth.aggressors.begin(), truth.aggressors.end());
  const std::size_t n = std::min(k, ranked.entries.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += aggressors.count(ranked.entries[i].id);
  const std::size_t denom = std::min(k, aggressors.size());
  score.precision_at_k = denom == 0 ? 0.0 : static_cast<double>(hits) / denom;

  std::map<std::string, double> predicted;
  double ptotal = 0.0;
  for (const RankedEntry& e : ranked.entries) {
    predicted[e.id] += e.score;
    ptotal += e.score;
  }
  std::map<std::string, double> actual = truth.BySourceQuery(target_query);
  double atotal = 0.0;
  for (const auto& [id, v] : actual) atotal += v;
  std::set<std::string> ids;
  for (const auto& [id, v] : predicted) ids.insert(id);
  for (const auto& [id, v] : actual) ids.insert(id);
  for (const std::string& id : ids) {
    const double p = ptotal > 0.0 ? predicted[id] / ptotal : 0.0;
    const double a = atotal > 0.0 ? actual[id] / atotal : 0.0;
    score.share_error += std::abs(p - a);
  }
  return score;
}

}  // namespace contendscope
