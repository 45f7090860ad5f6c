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

#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "contendscope/trace_io.h"
#include "contendscope/validate.h"

namespace contendscope {
namespace {

std::string Fixture(const std::string& name) {
  return std::string(CONTENDSCOPE_FIXTURES) + "/" + name;
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

WorkloadTrace ParseString(const std::string& text, IngestOptions options = {}) {
  std::istringstream in(text);
  return ParseTrace(in, options);
}

void ExpectTracesEqual(const WorkloadTrace& a, const WorkloadTrace& b) {
  EXPECT_EQ(a.heartbeat_interval, b.heartbeat_interval);
  ASSERT_EQ(a.queries.size(), b.queries.size());
  for (std::size_t i = 0; i < a.queries.size(); ++i) {
    EXPECT_EQ(a.queries[i].id, b.queries[i].id);
    EXPECT_EQ(a.queries[i].user, b.queries[i].user);
    EXPECT_EQ(a.queries[i].submit, b.queries[i].submit);
    EXPECT_EQ(a.queries[i].finish, b.queries[i].finish);
  }
  ASSERT_EQ(a.stages.size(), b.stages.size());
  for (std::size_t i = 0; i < a.stages.size(); ++i) {
    EXPECT_EQ(a.stages[i].id, b.stages[i].id);
    EXPECT_EQ(a.stages[i].query_id, b.stages[i].query_id);
    EXPECT_EQ(a.stages[i].user, b.stages[i].user);
    EXPECT_EQ(a.stages[i].parent_ids, b.stages[i].parent_ids);
    EXPECT_EQ(a.stages[i].work_done, b.stages[i].work_done);
  }
  ASSERT_EQ(a.tasks.size(), b.tasks.size());
  for (std::size_t i = 0; i < a.tasks.size(); ++i) {
    EXPECT_EQ(a.tasks[i].id, b.tasks[i].id);
    EXPECT_EQ(a.tasks[i].stage_id, b.tasks[i].stage_id);
    EXPECT_EQ(a.tasks[i].host_id, b.tasks[i].host_id);
    EXPECT_EQ(a.tasks[i].start, b.tasks[i].start);
    EXPECT_EQ(a.tasks[i].end, b.tasks[i].end);
    EXPECT_EQ(a.tasks[i].samples, b.tasks[i].samples);
  }
  ASSERT_EQ(a.hosts.size(), b.hosts.size());
  for (std::size_t i = 0; i < a.hosts.size(); ++i) {
    EXPECT_EQ(a.hosts[i].id, b.hosts[i].id);
    EXPECT_EQ(a.hosts[i].capacity, b.hosts[i].capacity);
    EXPECT_EQ(a.hosts[i].counters, b.hosts[i].counters);
    EXPECT_EQ(a.hosts[i].gc_windows, b.hosts[i].gc_windows);
  }
  ASSERT_EQ(a.known_causes.size(), b.known_causes.size());
  for (std::size_t i = 0; i < a.known_causes.size(); ++i) {
    EXPECT_EQ(a.known_causes[i].name, b.known_causes[i].name);
    EXPECT_EQ(a.known_causes[i].request, b.known_causes[i].request);
    EXPECT_EQ(a.known_causes[i].host_id, b.known_causes[i].host_id);
    EXPECT_EQ(a.known_causes[i].windows, b.known_causes[i].windows);
  }
}

TEST(TraceIoTest, SmallFixtureLinksAndValidates) {
  WorkloadTrace trace = IngestTrace(Fixture("small_trace.jsonl"));
  ASSERT_EQ(trace.tasks.size(), 2u);
  EXPECT_EQ(trace.queries.size(), 1u);
  EXPECT_EQ(trace.tasks[0].samples.size(), 3u);
  EXPECT_EQ(trace.tasks[1].samples.size(), 3u);
  EXPECT_TRUE(Validate(trace).empty());
  EXPECT_EQ(trace.tasks[1].stage, 0u);
  EXPECT_EQ(trace.stages[0].tasks, (std::vector<std::size_t>{0, 1}));
  // Cpu consume over both tasks: 1.5 + 2.0 + 0.5 + 1.0.
  EXPECT_DOUBLE_EQ(trace.stages[0].work_done, 5.0);
  EXPECT_EQ(trace.hosts[0].capacity[Index(ResourceRequest::kIoRead)], 100.0);
  EXPECT_FALSE(trace.hosts[0].capacity[Index(ResourceRequest::kIoWrite)]);
}

TEST(TraceIoTest, SerializeIsByteIdenticalToCanonicalFixture) {
  const std::string path = Fixture("small_trace.jsonl");
  WorkloadTrace trace = IngestTrace(path);
  EXPECT_EQ(SerializeTrace(trace), ReadFile(path));
}

TEST(TraceIoTest, RoundTripIsFieldwiseEqual) {
  WorkloadTrace a = IngestTrace(Fixture("small_trace.jsonl"));
  a.hosts[0].gc_windows.push_back({0.5, 0.75});
  a.hosts[0].counters.push_back({1.0, {}});
  a.hosts[0].counters.back().used[Index(ResourceRequest::kIoRead)] = 0.1 + 0.2;
  a.known_causes.push_back({"hdfs-replication", ResourceRequest::kIoWrite, "h1",
                            {{1.0, 3.0, 1e8 / 3.0}}});
  a.Link();
  WorkloadTrace b = ParseString(SerializeTrace(a));
  ExpectTracesEqual(a, b);
  EXPECT_EQ(SerializeTrace(a), SerializeTrace(b));
}

TEST(TraceIoTest, EmptyFileGivesEmptyTrace) {
  WorkloadTrace trace = IngestTrace(Fixture("empty.jsonl"));
  EXPECT_TRUE(trace.queries.empty());
  EXPECT_TRUE(trace.tasks.empty());
  EXPECT_EQ(SerializeTrace(trace), "");
}

TEST(TraceIoTest, DanglingStageNamesTheTask) {
  try {
    IngestTrace(Fixture("dangling_stage.jsonl"));
    FAIL() << "expected a dangling reference error";
  } catch (const TraceError& e) {
    EXPECT_EQ(e.kind(), TraceError::Kind::kDanglingReference);
    EXPECT_NE(std::string(e.what()).find("t9"), std::string::npos);
  }
}

TEST(TraceIoTest, MalformedLineReportsLineNumber) {
  const std::string text =
      "{\"kind\":\"host\",\"id\":\"h1\"}\n"
      "\n"
      "{\"kind\":\"query\",\"id\":\"q1\",\n";
  try {
    ParseString(text);
    FAIL() << "expected a malformed line error";
  } catch (const TraceError& e) {
    EXPECT_EQ(e.kind(), TraceError::Kind::kMalformed);
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(TraceIoTest, MissingFieldIsMalformed) {
  try {
    ParseString("{\"kind\":\"query\",\"id\":\"q1\",\"user\":\"u\",\"submit\":0}\n");
    FAIL();
  } catch (const TraceError& e) {
    EXPECT_EQ(e.kind(), TraceError::Kind::kMalformed);
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(TraceIoTest, UnknownKeysIgnored) {
  WorkloadTrace trace = ParseString(
      "{\"kind\":\"host\",\"id\":\"h1\",\"rack\":\"r7\"}\n"
      "{\"kind\":\"query\",\"id\":\"q1\",\"user\":\"u\",\"submit\":0,\"finish\":1,"
      "\"extra\":[1,2]}\n");
  EXPECT_EQ(trace.hosts.size(), 1u);
  EXPECT_EQ(trace.queries.size(), 1u);
}

TEST(TraceIoTest, NonMonotoneSamplesRejectedWhenStrict) {
  const std::string text =
      "{\"kind\":\"host\",\"id\":\"h1\"}\n"
      "{\"kind\":\"query\",\"id\":\"q1\",\"user\":\"u\",\"submit\":0,\"finish\":4}\n"
      "{\"kind\":\"stage\",\"id\":\"s1\",\"query\":\"q1\",\"user\":\"u\",\"parents\":[]}\n"
      "{\"kind\":\"task\",\"id\":\"t1\",\"stage\":\"s1\",\"query\":\"q1\",\"host\":\"h1\","
      "\"start\":0,\"end\":4}\n"
      "{\"kind\":\"sample\",\"task\":\"t1\",\"t\":3,\"metrics\":{}}\n"
      "{\"kind\":\"sample\",\"task\":\"t1\",\"t\":2,\"metrics\":{}}\n"
      "{\"kind\":\"sample\",\"task\":\"t1\",\"t\":4,\"metrics\":{}}\n";
  try {
    ParseString(text);
    FAIL();
  } catch (const TraceError& e) {
    EXPECT_EQ(e.kind(), TraceError::Kind::kNonMonotone);
  }
  WorkloadTrace lenient = ParseString(text, IngestOptions{.strict = false});
  std::vector<Violation> v = Validate(lenient);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rule, "sample-order");
  EXPECT_EQ(v[0].entity, "task:t1");
}

TEST(TraceIoTest, CausePresetFillsRequest) {
  WorkloadTrace trace = ParseString(
      "{\"kind\":\"host\",\"id\":\"h1\"}\n"
      "{\"kind\":\"cause\",\"name\":\"rdd-storage\",\"host\":\"h1\","
      "\"windows\":[[0,2,10]]}\n");
  ASSERT_EQ(trace.known_causes.size(), 1u);
  EXPECT_EQ(trace.known_causes[0].request, ResourceRequest::kStorageMemory);
  EXPECT_EQ(trace.known_causes[0].host, 0u);
  EXPECT_THROW(ParseString("{\"kind\":\"host\",\"id\":\"h1\"}\n"
                           "{\"kind\":\"cause\",\"name\":\"mystery\",\"host\":\"h1\","
                           "\"windows\":[]}\n"),
               TraceError);
}

TEST(TraceIoTest, MissingFileIsIoError) {
  try {
    IngestTrace(Fixture("does_not_exist.jsonl"));
    FAIL();
  } catch (const TraceError& e) {
    EXPECT_EQ(e.kind(), TraceError::Kind::kIo);
  }
}

}  // namespace
}  // namespace contendscope
