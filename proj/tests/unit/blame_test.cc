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

#include <random>

#include <gtest/gtest.h>

#include "contendscope/blame.h"
#include "test_util.h"

namespace contendscope {
namespace {

using testing::RandomHostTrace;
using testing::TraceBuilder;
constexpr ResourceRequest kIo = ResourceRequest::kIoRead;
constexpr ResourceRequest kCpu = ResourceRequest::kCpuOsSched;

struct Fixture {
  explicit Fixture(WorkloadTrace t, BlameConfig config = {})
      : trace(std::move(t)), slices(trace), engine(trace, slices, config) {}
  std::size_t Task(const std::string& id) const { return trace.FindTask(id); }
  WorkloadTrace trace;
  SliceIndex slices;
  BlameEngine engine;
};

TraceBuilder PairBuilder() {
  TraceBuilder b;
  b.Host("h").Query("qt").Query("qs").Stage("st", "qt").Stage("ss", "qs");
  return b;
}

TEST(BlamePairTest, SingleSliceHandExample) {
  // ratp_blocked(tt) = 5/5 = 1, ratp_max(src) = 10/2 = 5: (1/10)(1/5)(10) = 0.2.
  Fixture f(PairBuilder()
                .Task("tt", "st", "h", 0, 10)
                .Task("src", "ss", "h", 0, 10)
                .Sample("tt", 10, kIo, 5, 3, 5)
                .Sample("src", 10, kIo, 0, 4, 2)
                .Build());
  BlameTerm term = f.engine.BlamePair(f.Task("tt"), SourceEntity::Task(f.Task("src")), kIo);
  EXPECT_DOUBLE_EQ(term.beta, 0.2);
  EXPECT_DOUBLE_EQ(term.overlap_seconds, 10.0);
  EXPECT_EQ(term.host, 0u);
}

TEST(BlamePairTest, NoOverlapIsZero) {
  Fixture f(PairBuilder()
                .Task("tt", "st", "h", 0, 5)
                .Task("src", "ss", "h", 5, 9)
                .Sample("tt", 5, kIo, 2, 1, 5)
                .Sample("src", 9, kIo, 0, 4, 2)
                .Build());
  BlameTerm term = f.engine.BlamePair(f.Task("tt"), SourceEntity::Task(f.Task("src")), kIo);
  EXPECT_EQ(term.beta, 0.0);
  EXPECT_EQ(term.overlap_seconds, 0.0);
}

TEST(BlamePairTest, ZeroTargetWaitIsZero) {
  Fixture f(PairBuilder()
                .Task("tt", "st", "h", 0, 10)
                .Task("src", "ss", "h", 2, 8)
                .Sample("tt", 10, kIo, 0, 6, 5)
                .Sample("src", 8, kIo, 1, 4, 7)
                .Build());
  EXPECT_EQ(f.engine.BlamePair(f.Task("tt"), SourceEntity::Task(f.Task("src")), kIo).beta, 0.0);
}

TEST(BlamePairTest, CrossHostIsZero) {
  Fixture f(PairBuilder()
                .Host("h2")
                .Task("tt", "st", "h", 0, 10)
                .Task("src", "ss", "h2", 0, 10)
                .Sample("tt", 10, kIo, 5, 3, 5)
                .Sample("src", 10, kIo, 0, 4, 2)
                .Build());
  EXPECT_EQ(f.engine.BlamePair(f.Task("tt"), SourceEntity::Task(f.Task("src")), kIo).beta, 0.0);
}

TEST(BlameFullFormTest, SymmetricPairIsOne) {
  Fixture f(PairBuilder()
                .Task("tt", "st", "h", 0, 10)
                .Task("src", "ss", "h", 0, 10)
                .Sample("tt", 10, kIo, 5, 5, 50)
                .Sample("src", 10, kIo, 5, 5, 50)
                .Build());
  EXPECT_DOUBLE_EQ(
      f.engine.BlameFullForm(f.Task("tt"), SourceEntity::Task(f.Task("src")), kIo).beta, 1.0);
}

TEST(BlameFullFormTest, SourceWithDoubleRatpIsHalf) {
  Fixture f(PairBuilder()
                .Task("tt", "st", "h", 0, 10)
                .Task("src", "ss", "h", 0, 10)
                .Sample("tt", 4, kIo, 2, 2, 40)
                .Sample("tt", 10, kIo, 3, 3, 60)
                .Sample("src", 4, kIo, 2, 2, 20)
                .Sample("src", 10, kIo, 3, 3, 30)
                .Build());
  EXPECT_DOUBLE_EQ(
      f.engine.BlameFullForm(f.Task("tt"), SourceEntity::Task(f.Task("src")), kIo).beta, 0.5);
  Fixture g(PairBuilder()
                .Task("tt", "st", "h", 0, 5)
                .Task("src", "ss", "h", 5, 9)
                .Sample("tt", 5, kIo, 2, 1, 5)
                .Sample("src", 9, kIo, 0, 4, 2)
                .Build());
  EXPECT_EQ(g.engine.BlameFullForm(0, SourceEntity::Task(1), kIo).beta, 0.0);
}

TEST(UnaccountedResourceTest, Subtraction) {
  auto build = [](double used) {
    return PairBuilder()
        .Task("tt", "st", "h", 0, 10)
        .Sample("tt", 10, kIo, 1, 1, 60)
        .Counter("h", 0, kIo, 1000)
        .Counter("h", 10, kIo, 1000 + used)
        .Build();
  };
  EXPECT_DOUBLE_EQ(Fixture(build(100)).engine.UnaccountedResource(0, kIo, 0, 10,
                                                                  std::vector<std::size_t>{0}),
                   40.0);
  EXPECT_EQ(Fixture(build(60)).engine.UnaccountedResource(0, kIo, 0, 10,
                                                         std::vector<std::size_t>{0}),
            0.0);
  EXPECT_EQ(Fixture(build(50)).engine.UnaccountedResource(0, kIo, 0, 10,
                                                         std::vector<std::size_t>{0}),
            0.0);
  // Interpolated half window: 50 used, 30 acquired.
  EXPECT_DOUBLE_EQ(Fixture(build(100)).engine.UnaccountedResource(0, kIo, 5, 10,
                                                                  std::vector<std::size_t>{0}),
                   20.0);
  // No counters for the request.
  EXPECT_EQ(Fixture(build(100)).engine.UnaccountedResource(0, kCpu, 0, 10,
                                                          std::vector<std::size_t>{0}),
            0.0);
}

TEST(UnknownSourceTest, ExternalLoadBlamesUnknownOnly) {
  // tt waits 4 s for 40 units; the host served 100, so 60 went elsewhere.
  Fixture f(PairBuilder()
                .Capacity("h", kIo, 10)
                .Task("tt", "st", "h", 0, 10)
                .Sample("tt", 10, kIo, 4, 4, 40)
                .Counter("h", 0, kIo, 0)
                .Counter("h", 10, kIo, 100)
                .Build());
  std::vector<SourceEntity> sources = f.engine.Sources(0, kIo);
  ASSERT_EQ(sources.size(), 1u);
  EXPECT_EQ(sources[0], SourceEntity::Unknown());
  BlameTerm u = f.engine.BlamePair(0, SourceEntity::Unknown(), kIo);
  // (4/40) / (10/60) * 10 / 10.
  EXPECT_DOUBLE_EQ(u.beta, 0.6);
  EXPECT_DOUBLE_EQ(u.overlap_seconds, 10.0);
  SlowdownDecomposition d = f.engine.Decompose(0, kIo);
  EXPECT_EQ(d.concurrent, 0.0);
  EXPECT_EQ(d.known, 0.0);
  EXPECT_GT(d.unknown, 0.0);
}

TEST(SyntheticSourceTest, GcAndKnownCause) {
  Fixture f(PairBuilder()
                .Gc("h", 2, 4)
                .Cause("hdfs-replication", ResourceRequest::kIoWrite, "h", {{0, 5, 50}})
                .Task("tt", "st", "h", 0, 10)
                .Sample("tt", 10, ResourceRequest::kCpuGc, 2, 8, 8)
                .Sample("tt", 10, ResourceRequest::kIoWrite, 5, 5, 100)
                .Build());
  // GC: one slice [0, 10] with 2 s active. (2/8) / (10/2) * 10 / 10 = 0.05.
  BlameTerm gc = f.engine.BlamePair(0, SourceEntity::Gc(0), ResourceRequest::kCpuGc);
  EXPECT_DOUBLE_EQ(gc.beta, 0.05);
  EXPECT_EQ(f.engine.BlamePair(0, SourceEntity::Gc(0), kIo).beta, 0.0);
  // Cause: 50 units in the slice. (5/100) / (10/50) = 0.25.
  BlameTerm cause =
      f.engine.BlamePair(0, SourceEntity::Cause(0), ResourceRequest::kIoWrite);
  EXPECT_DOUBLE_EQ(cause.beta, 0.25);
  EXPECT_EQ(f.engine.BlamePair(0, SourceEntity::Cause(0), kIo).beta, 0.0);
  SlowdownDecomposition d = f.engine.Decompose(0, ResourceRequest::kIoWrite, BlameForm::kBlocked);
  EXPECT_DOUBLE_EQ(d.known, 0.25);
  EXPECT_EQ(SourceEntity::Cause(0).Label(f.trace), "<known:hdfs-replication>");
  EXPECT_EQ(SourceEntity::Gc(0).Label(f.trace), "<GC>");
  EXPECT_EQ(SourceEntity::Unknown().Label(f.trace), "<Unknown>");
}

TEST(SlowdownTest, Values) {
  EXPECT_EQ(SlowdownValue(0.5, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(SlowdownValue(1.0, 0.5), 1.0);
  EXPECT_EQ(SlowdownValue(0.45, 0.5), 0.0);
  EXPECT_EQ(SlowdownValue(std::nullopt, 0.5), 0.0);
}

TEST(SlowdownTest, TimeWeightedMeanOverSlices) {
  // Capacity 10/s -> ideal 0.1. Slice [0,4]: ratp 4/20 = 0.2 (S=1);
  // slice [4,10]: ratp 6/60 = 0.1 (S=0). Mean = 0.4.
  Fixture f(PairBuilder()
                .Capacity("h", kIo, 10)
                .Task("tt", "st", "h", 0, 10)
                .Task("other", "ss", "h", 0, 4)
                .Sample("tt", 4, kIo, 2, 2, 20)
                .Sample("tt", 10, kIo, 0, 6, 60)
                .Sample("other", 4, kIo, 2, 2, 20)
                .Build());
  EXPECT_DOUBLE_EQ(f.engine.IdealRatp(0, kIo), 0.1);
  EXPECT_DOUBLE_EQ(f.engine.Slowdown(0, kIo), 0.4);
}

TEST(SlowdownTest, MissingCapacityWithoutEstimatorIsConfigError) {
  Fixture f(PairBuilder().Task("tt", "st", "h", 0, 10).Sample("tt", 10, kIo, 2, 2, 20).Build(),
            BlameConfig{.estimate_ideal = false});
  EXPECT_THROW(f.engine.Slowdown(0, kIo), ConfigError);
  EXPECT_THROW(f.engine.IdealRatp(0, kIo), ConfigError);
  // No demand needs no ideal.
  EXPECT_EQ(f.engine.Slowdown(0, kCpu), 0.0);
}

TEST(SlowdownTest, EstimatorIsNearestRankPercentile) {
  std::mt19937_64 rng(5);
  WorkloadTrace trace = RandomHostTrace(rng, 1.0);
  Fixture f(std::move(trace), BlameConfig{.ideal_percentile = 20.0});
  std::vector<double> values;
  for (std::size_t t = 0; t < f.trace.tasks.size(); ++t) {
    for (const IntervalSlice& s : f.slices.Of(t)) {
      RatpValue v = Ratp(s, kIo);
      if (v && *v > 0) values.push_back(*v);
    }
  }
  std::sort(values.begin(), values.end());
  std::size_t rank = static_cast<std::size_t>(std::ceil(0.2 * values.size()));
  EXPECT_EQ(f.engine.IdealRatp(0, kIo), values[rank - 1]);
}

TEST(DecomposeTest, IsolatedCapacityMatchedTaskHasNoBlame) {
  Fixture f(PairBuilder()
                .Capacity("h", kIo, 10)
                .Task("tt", "st", "h", 0, 10)
                .Sample("tt", 10, kIo, 0, 10, 100)
                .Build());
  SlowdownDecomposition d = f.engine.Decompose(0, kIo);
  EXPECT_EQ(d.slowdown, 0.0);
  EXPECT_EQ(d.concurrent, 0.0);
  EXPECT_EQ(d.known, 0.0);
  EXPECT_EQ(d.unknown, 0.0);
}

TEST(DecomposeTest, CapacityExactPairConserves) {
  // Two tasks each demanding the full capacity 10/s share it: each gets 5/s.
  Fixture f(PairBuilder()
                .Capacity("h", kIo, 10)
                .Task("tt", "st", "h", 0, 10)
                .Task("src", "ss", "h", 0, 10)
                .Sample("tt", 10, kIo, 5, 5, 50)
                .Sample("src", 10, kIo, 5, 5, 50)
                .Build());
  SlowdownDecomposition d = f.engine.Decompose(0, kIo);
  EXPECT_DOUBLE_EQ(d.slowdown, 1.0);
  EXPECT_DOUBLE_EQ(d.concurrent, 1.0);
  EXPECT_NEAR(d.Residual(), 0.0, 1e-12);
}

TEST(StageBlameTest, AdditiveOverTargetTasks) {
  // Target tasks: (5/5)/(10/2) = 0.2 and (3/2)/(10/2) = 0.3.
  Fixture f(PairBuilder()
                .Host("h2")
                .Task("t1", "st", "h", 0, 10)
                .Task("t2", "st", "h", 0, 10)
                .Task("src", "ss", "h", 0, 10)
                .Task("far", "st", "h2", 0, 10)
                .Sample("t1", 10, kIo, 5, 0, 5)
                .Sample("t2", 10, kIo, 3, 0, 2)
                .Sample("src", 10, kIo, 0, 1, 2)
                .Sample("far", 10, kIo, 5, 0, 5)
                .Build());
  const std::size_t st = f.trace.FindStage("st");
  const std::size_t ss = f.trace.FindStage("ss");
  EXPECT_DOUBLE_EQ(f.engine.BlamePair(0, SourceEntity::Task(2), kIo).beta, 0.2);
  EXPECT_DOUBLE_EQ(f.engine.BlamePair(1, SourceEntity::Task(2), kIo).beta, 0.3);
  EXPECT_DOUBLE_EQ(f.engine.StageBlame(st, ss, kIo, 0), 0.5);
  EXPECT_EQ(f.engine.StageBlame(ss, st, kIo, 1), 0.0);
}

// Oracle: brute-force sum of BlamePair over all (target task, source task) pairs.
TEST(StageBlameTest, MatchesPairwiseOracleOnRandomHosts) {
  std::mt19937_64 rng(17);
  for (int iter = 0; iter < 20; ++iter) {
    WorkloadTrace trace = RandomHostTrace(rng, iter % 3 ? 1.3 : 0.0);
    // Split tasks across two stages of two queries.
    trace.queries.push_back({"q2", "v", 0, 0, {}, {}});
    trace.stages.push_back(StageRecord{.id = "s2", .query_id = "q2", .user = "v"});
    for (std::size_t t = 0; t < trace.tasks.size(); t += 2) {
      trace.tasks[t].stage_id = "s2";
      trace.tasks[t].query_id = "q2";
    }
    trace.Link();
    Fixture f(std::move(trace));
    for (ResourceRequest r : {kIo, kCpu}) {
      for (std::size_t ts = 0; ts < 2; ++ts) {
        for (std::size_t ss = 0; ss < 2; ++ss) {
          double oracle = 0.0;
          for (std::size_t a : f.trace.stages[ts].tasks) {
            for (std::size_t b : f.trace.stages[ss].tasks) {
              if (a != b) oracle += f.engine.BlamePair(a, SourceEntity::Task(b), r).beta;
            }
          }
          EXPECT_NEAR(f.engine.StageBlame(ts, ss, r, 0), oracle, 1e-9 * std::max(1.0, oracle));
        }
      }
    }
  }
}

TEST(BlameProperties, BlockedNeverExceedsFull) {
  std::mt19937_64 rng(23);
  int pairs = 0;
  for (int iter = 0; iter < 40; ++iter) {
    Fixture f(RandomHostTrace(rng, iter % 2 ? 2.0 : 0.0));
    for (std::size_t a = 0; a < f.trace.tasks.size(); ++a) {
      for (std::size_t b = 0; b < f.trace.tasks.size(); ++b) {
        if (a == b) continue;
        for (ResourceRequest r : {kIo, kCpu}) {
          const double blocked = f.engine.BlamePair(a, SourceEntity::Task(b), r).beta;
          const double full = f.engine.BlameFullForm(a, SourceEntity::Task(b), r).beta;
          EXPECT_LE(blocked, full + 1e-12);
          ++pairs;
        }
      }
    }
  }
  EXPECT_GT(pairs, 500);
}

TEST(BlameProperties, MonotoneInSourceAcquired) {
  std::mt19937_64 rng(29);
  for (int iter = 0; iter < 20; ++iter) {
    WorkloadTrace base = RandomHostTrace(rng, 1.0);
    Fixture f(base);
    for (std::size_t b = 0; b < base.tasks.size(); ++b) {
      if (base.tasks[b].samples.empty()) continue;
      WorkloadTrace more = base;
      more.tasks[b].samples.front().metrics[Index(kIo)].acquired += 250.0;
      more.Link();
      Fixture g(std::move(more));
      for (std::size_t a = 0; a < base.tasks.size(); ++a) {
        if (a == b) continue;
        EXPECT_GE(g.engine.BlamePair(a, SourceEntity::Task(b), kIo).beta,
                  f.engine.BlamePair(a, SourceEntity::Task(b), kIo).beta - 1e-15);
      }
    }
  }
}

TEST(BlameProperties, InvariantToRequestUnits) {
  std::mt19937_64 rng(31);
  for (int iter = 0; iter < 20; ++iter) {
    WorkloadTrace base = RandomHostTrace(rng, 1.5);
    WorkloadTrace kb = base;
    for (TaskRecord& t : kb.tasks) {
      for (MetricSample& s : t.samples) s.metrics[Index(kIo)].acquired /= 1024.0;
    }
    kb.Link();
    Fixture f(std::move(base));
    Fixture g(std::move(kb));
    for (std::size_t a = 0; a < f.trace.tasks.size(); ++a) {
      for (std::size_t b = 0; b < f.trace.tasks.size(); ++b) {
        if (a == b) continue;
        const double x = f.engine.BlamePair(a, SourceEntity::Task(b), kIo).beta;
        const double y = g.engine.BlamePair(a, SourceEntity::Task(b), kIo).beta;
        EXPECT_NEAR(x, y, 1e-12 * std::max(1.0, x));
      }
    }
  }
}

TEST(BlameProperties, ContributionsSumToPairBlame) {
  std::mt19937_64 rng(37);
  Fixture f(RandomHostTrace(rng, 1.0));
  for (std::size_t a = 0; a < f.trace.tasks.size(); ++a) {
    std::vector<double> sums(f.trace.tasks.size(), 0.0);
    f.engine.ForEachBlockedContribution(a, kIo, [&](const SourceEntity& s, double v) {
      if (s.kind == SourceEntity::Kind::kTask) sums[s.index] += v;
    });
    for (std::size_t b = 0; b < f.trace.tasks.size(); ++b) {
      if (a == b) continue;
      EXPECT_NEAR(sums[b], f.engine.BlamePair(a, SourceEntity::Task(b), kIo).beta, 1e-12);
    }
  }
}

}  // namespace
}  // namespace contendscope
