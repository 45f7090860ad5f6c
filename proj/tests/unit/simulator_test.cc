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

#include <gtest/gtest.h>

#include "contendscope/trace_io.h"
#include "contendscope/validate.h"

namespace contendscope {
namespace {

constexpr ResourceRequest kIo = ResourceRequest::kIoRead;
constexpr ResourceRequest kCpu = ResourceRequest::kCpuOsSched;

QuerySpec OneTask(const std::string& id, double submit, ResourceRequest r, Demand d) {
  QuerySpec q;
  q.id = id;
  q.user = id;
  q.submit = submit;
  StageSpec s;
  s.id = id + "s";
  s.demand[Index(r)] = d;
  q.stages.push_back(s);
  return q;
}

SimConfig SingleHost(double capacity) {
  SimConfig c;
  c.capacity[Index(kIo)] = capacity;
  return c;
}

RequestMetrics TaskTotal(const SimResult& r, const std::string& task, ResourceRequest req) {
  return r.trace.tasks[r.trace.FindTask(task)].Total(req);
}

TEST(SimulatorTest, UncontendedTaskNeverWaits) {
  SimConfig c = SingleHost(2.0);
  c.queries.push_back(OneTask("a", 0.0, kIo, {5.0, 1.0}));
  SimResult r = Simulate(c);
  const TaskRecord& t = r.trace.tasks[0];
  EXPECT_EQ(t.start, 0.0);
  EXPECT_NEAR(t.end, 5.0, 1e-9);
  const RequestMetrics m = t.Total(kIo);
  EXPECT_DOUBLE_EQ(m.wait, 0.0);
  EXPECT_NEAR(m.consume, 5.0, 1e-9);
  EXPECT_NEAR(m.acquired, 5.0, 1e-9);
  EXPECT_TRUE(r.truth.caused.empty());
}

TEST(SimulatorTest, TwoFullCapacityTasksShareEvenly) {
  SimConfig c = SingleHost(1.0);
  c.queries.push_back(OneTask("a", 0.0, kIo, {4.0, 1.0}));
  c.queries.push_back(OneTask("b", 0.0, kIo, {4.0, 1.0}));
  SimResult r = Simulate(c);
  for (const TaskRecord& t : r.trace.tasks) {
    EXPECT_NEAR(t.end, 8.0, 1e-9);
    EXPECT_NEAR(t.Total(kIo).acquired, 4.0, 1e-9);
    EXPECT_NEAR(t.Total(kIo).wait, 4.0, 1e-9);
  }
  const auto toward_a = r.truth.BySourceQuery("a");
  ASSERT_EQ(toward_a.size(), 1u);
  EXPECT_NEAR(toward_a.at("b"), 4.0, 1e-9);
}

TEST(SimulatorTest, CausedBlockedConservesWait) {
  Scenario s = MakeScenario("cpu-internal-hog", 3);
  SimResult r = Simulate(s.config);
  std::map<std::pair<std::string, ResourceRequest>, double> charged;
  for (const CausedBlocked& c : r.truth.caused) charged[{c.target_task, c.request}] += c.seconds;
  for (const TaskRecord& t : r.trace.tasks) {
    for (ResourceRequest q : kAllRequests) {
      const double wait = t.Total(q).wait;
      auto it = charged.find({t.id, q});
      EXPECT_NEAR(it == charged.end() ? 0.0 : it->second, wait, 1e-6) << t.id;
    }
  }
}

TEST(SimulatorTest, GrantsNeverExceedCapacity) {
  for (const std::string& name : {"cpu-internal-hog", "io-external-load", "mem-internal-cache"}) {
    Scenario s = MakeScenario(name, 2);
    std::size_t calls = 0;
    Simulate(s.config, [&](double, std::size_t, ResourceRequest, double granted, double cap) {
      ++calls;
      EXPECT_LE(granted, cap * (1 + 1e-12));
    });
    EXPECT_GT(calls, 0u);
  }
}

TEST(SimulatorTest, ScenarioTracesAreValid) {
  for (const std::string& name : ScenarioNames()) {
    if (name.rfind("scale-", 0) == 0) continue;
    SimResult r = Simulate(MakeScenario(name, 1).config);
    const auto v = Validate(r.trace);
    EXPECT_TRUE(v.empty()) << name << ": " << (v.empty() ? "" : v[0].rule + " " + v[0].detail);
    EXPECT_NE(r.trace.FindQuery(MakeScenario(name, 1).target), kNoIndex) << name;
  }
}

TEST(SimulatorTest, SameSeedIsByteIdentical) {
  const SimConfig c = MakeScenario("cpu-internal-hog", 7).config;
  SimResult a = Simulate(c);
  SimResult b = Simulate(c);
  EXPECT_EQ(SerializeTrace(a.trace), SerializeTrace(b.trace));
  EXPECT_EQ(GroundTruthToJson(a.truth).dump(), GroundTruthToJson(b.truth).dump());
  SimResult other = Simulate(MakeScenario("cpu-internal-hog", 8).config);
  EXPECT_NE(SerializeTrace(a.trace), SerializeTrace(other.trace));
}

TEST(SimulatorTest, SamplesLandOnHeartbeatsAndEvents) {
  SimConfig c = SingleHost(1.0);
  c.heartbeat = 2.0;
  c.queries.push_back(OneTask("a", 0.0, kIo, {7.0, 1.0}));
  c.queries.push_back(OneTask("b", 3.0, kIo, {1.0, 1.0}));
  SimResult r = Simulate(c);
  const TaskRecord& a = r.trace.tasks[r.trace.FindTask("as-t0")];
  std::vector<double> times;
  for (const MetricSample& m : a.samples) times.push_back(m.time);
  // b starts at 3 and ends at 5; a ends at 8.
  EXPECT_EQ(times, (std::vector<double>{2, 3, 4, 5, 6, 8}));
  EXPECT_EQ(a.samples.back().time, a.end);
}

TEST(SimulatorTest, FairSchedulingAcrossUsers) {
  SimConfig c = SingleHost(10.0);
  c.slots = 2;
  QuerySpec heavy = OneTask("heavy", 0.0, kIo, {2.0, 1.0});
  heavy.stages[0].tasks = 4;
  c.queries.push_back(heavy);
  c.queries.push_back(OneTask("light", 0.0, kIo, {2.0, 1.0}));
  SimResult r = Simulate(c);
  // One slot each at time 0.
  EXPECT_EQ(r.trace.tasks[r.trace.FindTask("lights-t0")].start, 0.0);
  EXPECT_EQ(r.trace.tasks[r.trace.FindTask("heavys-t0")].start, 0.0);
  EXPECT_EQ(r.trace.tasks[r.trace.FindTask("heavys-t1")].start, 2.0);
}

TEST(SimulatorTest, StagesWaitForParents) {
  SimConfig c = SingleHost(4.0);
  QuerySpec q;
  q.id = "q";
  q.user = "u";
  for (const char* id : {"s0", "s1"}) {
    StageSpec s;
    s.id = id;
    s.tasks = 2;
    s.demand[Index(kIo)] = Demand{1.0, 1.0};
    q.stages.push_back(s);
  }
  q.stages[1].parents = {"s0"};
  c.queries.push_back(q);
  SimResult r = Simulate(c);
  EXPECT_NEAR(r.trace.tasks[r.trace.FindTask("s1-t0")].start, 1.0, 1e-9);
  EXPECT_NEAR(r.trace.queries[0].finish, 2.0, 1e-9);
}

TEST(SimulatorTest, InternalInjectionIsLabeledAggressor) {
  Scenario s = MakeScenario("cpu-internal-hog", 1);
  SimResult r = Simulate(s.config);
  ASSERT_EQ(r.truth.aggressors, (std::vector<std::string>{"inj0"}));
  ASSERT_EQ(r.truth.injection_windows.size(), 1u);
  const TimeWindow w = r.truth.injection_windows[0];
  EXPECT_NEAR(w.end - w.begin, 15.0, 1e-9);
  const QueryRecord& target = r.trace.queries[r.trace.FindQuery(s.target)];
  EXPECT_GE(w.begin, target.submit);
  for (const TaskRecord& t : r.trace.tasks) {
    if (t.query_id != "inj0") continue;
    EXPECT_EQ(t.start, w.begin);
    EXPECT_EQ(t.end, w.end);
  }
  // The hog causes most of the target's CPU wait.
  const auto truth = r.truth.BySourceQuery(s.target, kCpu);
  double total = 0.0;
  for (const auto& [id, v] : truth) total += v;
  EXPECT_GT(truth.at("inj0"), 0.5 * total);
}

TEST(SimulatorTest, ExternalLoadOnlyInCounters) {
  Scenario s = MakeScenario("io-external-load", 1);
  SimResult r = Simulate(s.config);
  EXPECT_TRUE(r.truth.aggressors.empty());
  for (const TaskRecord& t : r.trace.tasks) EXPECT_EQ(t.query_id.rfind("inj", 0), std::string::npos);
  for (const HostProfile& h : r.trace.hosts) {
    double task_ra = 0.0;
    for (std::size_t t : h.tasks) task_ra += r.trace.tasks[t].Total(kIo).acquired;
    const double counted = *h.counters.back().used[Index(kIo)];
    EXPECT_GT(counted, task_ra + 1.0) << h.id;
  }
  EXPECT_GT(r.truth.BySourceQuery(s.target, kIo).at(kUnknownName), 0.0);
}

TEST(SimulatorTest, BaselineHasNoAggressors) {
  SimResult r = Simulate(MakeScenario("baseline-no-injection", 1).config);
  EXPECT_TRUE(r.truth.aggressors.empty());
  EXPECT_TRUE(r.truth.injection_windows.empty());
}

TEST(SimulatorTest, CapacityExactPeersFinishTogether) {
  for (int n : {1, 2, 4}) {
    SimResult r = Simulate(MakeScenario("capacity-exact-" + std::to_string(n)).config);
    ASSERT_EQ(r.trace.tasks.size(), static_cast<std::size_t>(n + 1));
    for (const TaskRecord& t : r.trace.tasks) {
      EXPECT_EQ(t.start, 0.0);
      EXPECT_NEAR(t.end, 10.0 * (n + 1), 0.11);
    }
  }
}

TEST(SimulatorTest, RejectsInvalidConfigs) {
  SimConfig c = SingleHost(1.0);
  c.queries.push_back(OneTask("a", 0.0, kIo, {1.0, 2.0}));  // peak above capacity
  EXPECT_THROW(Simulate(c), SimError);
  c = SingleHost(1.0);
  c.queries.push_back(OneTask("a", 0.0, kCpu, {1.0, 1.0}));  // no CPU capacity
  EXPECT_THROW(Simulate(c), SimError);
  c = SingleHost(1.0);
  c.tick = 0.3;
  EXPECT_THROW(Simulate(c), SimError);
  c = SingleHost(1.0);
  c.max_time = 1.0;
  c.queries.push_back(OneTask("a", 0.0, kIo, {5.0, 1.0}));
  EXPECT_THROW(Simulate(c), SimError);
  EXPECT_THROW(MakeScenario("no-such-scenario"), SimError);
}

TEST(SimulatorTest, ConfigJsonRoundTrip) {
  SimConfig c = MakeScenario("cpu-internal-hog", 5).config;
  const std::string dumped = SimConfigToJson(c).dump();
  SimConfig back = SimConfigFromJson(nlohmann::json::parse(dumped));
  EXPECT_EQ(SimConfigToJson(back).dump(), dumped);
  EXPECT_EQ(SerializeTrace(Simulate(back).trace), SerializeTrace(Simulate(c).trace));
  EXPECT_THROW(SimConfigFromJson(nlohmann::json::parse(R"({"hosts":0})")), SimError);
  EXPECT_THROW(SimConfigFromJson(nlohmann::json::parse(R"({"capacity":{"Disk":1}})")), SimError);
}

TEST(SimulatorTest, TruthJsonRoundTrip) {
  SimResult r = Simulate(MakeScenario("io-external-load", 2).config);
  const auto j = GroundTruthToJson(r.truth);
  GroundTruth back = GroundTruthFromJson(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(GroundTruthToJson(back).dump(), j.dump());
  EXPECT_THROW(GroundTruthFromJson(nlohmann::json::parse("{}")), SimError);
}

GroundTruth TwoSourceTruth(double a, double b) {
  GroundTruth t;
  t.aggressors = {"a"};
  t.caused.push_back({"x", "t", "a1", "a", kIo, a});
  t.caused.push_back({"x", "t", "b1", "b", kIo, b});
  return t;
}

TEST(ScoreAttributionTest, PrecisionAndShareError) {
  const GroundTruth truth = TwoSourceTruth(6, 4);
  AttributionScore perfect = ScoreAttribution(truth, Rank({{"a", 0.6}, {"b", 0.4}}), 1);
  EXPECT_DOUBLE_EQ(perfect.precision_at_k, 1.0);
  EXPECT_NEAR(perfect.share_error, 0.0, 1e-12);
  AttributionScore reversed = ScoreAttribution(truth, Rank({{"a", 0.1}, {"b", 0.9}}), 1);
  EXPECT_DOUBLE_EQ(reversed.precision_at_k, 0.0);
  AttributionScore even = ScoreAttribution(truth, Rank({{"a", 0.5}, {"b", 0.5}}), 2, "t");
  EXPECT_NEAR(even.share_error, 0.2, 1e-12);
  EXPECT_DOUBLE_EQ(even.precision_at_k, 1.0);
  // Sources missing from the ranking count in full.
  AttributionScore missing = ScoreAttribution(truth, Rank({{"a", 1.0}}), 1);
  EXPECT_NEAR(missing.share_error, 0.8, 1e-12);
}

}  // namespace
}  // namespace contendscope
