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

// contendscope: command-line front end. Exit codes: 0 success, 1 runtime
// failure (missing files, bad traces, analysis errors), 2 usage errors.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "contendscope/analysis.h"
#include "contendscope/graph_io.h"
#include "contendscope/proto_graph.h"
#include "contendscope/service.h"
#include "contendscope/simulator.h"
#include "contendscope/trace_io.h"
#include "contendscope/validate.h"

namespace cs = contendscope;
using ojson = nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutputFlags {
  std::string format = "json";
  bool pretty = false;
};

void AddOutputFlags(CLI::App* cmd, OutputFlags* o) {
  cmd->add_option("--format", o->format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  cmd->add_flag("--pretty", o->pretty, "human-readable tables");
}

// Prints a report that has both encodings.
void Emit(const OutputFlags& o, const ojson& j, const std::function<void(std::ostream&)>& csv) {
  if (o.format == "csv" || (o.pretty && csv)) {
    if (!csv) throw UsageError("csv output is not available for this command");
    std::ostringstream text;
    csv(text);
    std::cout << (o.pretty ? cs::PrettyTable(text.str()) : text.str());
    return;
  }
  std::cout << (o.pretty ? j.dump(2) : j.dump()) << "\n";
}

void EmitJsonOnly(const OutputFlags& o, const ojson& j) {
  if (o.format == "csv") throw UsageError("csv output is not available for this command");
  std::cout << (o.pretty ? j.dump(2) : j.dump()) << "\n";
}

struct GraphFlags {
  std::string config_path;
  std::vector<std::string> hosts;
  std::vector<std::string> requests;
  std::vector<std::string> source_users;
  std::string scope;
  std::string stage;
  bool blocked_at_l2 = false;
  bool include_own_query = false;
  bool no_estimate_ideal = false;
  double ideal_percentile = 0.0;
  unsigned threads = 0;
};

void AddGraphFlags(CLI::App* cmd, GraphFlags* f) {
  cmd->add_option("--config", f->config_path, "graph config JSON file")->check(CLI::ExistingFile);
  cmd->add_option("--hosts", f->hosts, "only these hosts")->delimiter(',');
  cmd->add_option("--requests", f->requests, "only these resource requests")->delimiter(',');
  cmd->add_option("--source-users", f->source_users, "only sources of these users")
      ->delimiter(',');
  cmd->add_option("--scope", f->scope, "target stages: all, stage or longest-path")
      ->check(CLI::IsMember({"all", "stage", "longest-path"}));
  cmd->add_option("--stage", f->stage, "target stage for --scope stage");
  cmd->add_flag("--blocked-at-l2", f->blocked_at_l2, "use blocked ratp for resource nodes");
  cmd->add_flag("--include-own-query", f->include_own_query,
                "let the target's own tasks act as sources");
  cmd->add_flag("--no-estimate-ideal", f->no_estimate_ideal,
                "do not estimate the ideal ratp for hosts without capacity");
  cmd->add_option("--ideal-percentile", f->ideal_percentile, "percentile for the estimator")
      ->check(CLI::Range(0.0, 100.0));
  cmd->add_option("--threads", f->threads, "worker threads (0: hardware)");
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json ReadJsonFile(const std::string& path) {
  const std::string text = ReadFile(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("'" + path + "': " + e.what());
  }
}

cs::GraphConfig MakeGraphConfig(const GraphFlags& f) {
  cs::GraphConfig c;
  if (!f.config_path.empty()) c = cs::GraphConfigFromJson(ReadJsonFile(f.config_path));
  if (!f.hosts.empty()) c.hosts = {f.hosts.begin(), f.hosts.end()};
  if (!f.requests.empty()) {
    c.requests.clear();
    for (const std::string& name : f.requests) {
      auto r = cs::ParseRequest(name);
      if (!r) throw UsageError("unknown request '" + name + "'");
      c.requests.insert(*r);
    }
  }
  if (!f.source_users.empty()) c.source_users = {f.source_users.begin(), f.source_users.end()};
  if (f.scope == "all") c.scope = cs::TargetScope::kAll;
  if (f.scope == "longest-path") c.scope = cs::TargetScope::kLongestPath;
  if (f.scope == "stage") {
    if (f.stage.empty()) throw UsageError("--scope stage needs --stage");
    c.scope = cs::TargetScope::kSingleStage;
    c.scope_stage = f.stage;
  }
  if (f.blocked_at_l2) c.blocked_at_l2 = true;
  if (f.include_own_query) c.exclude_own_query = false;
  if (f.no_estimate_ideal) c.blame.estimate_ideal = false;
  if (f.ideal_percentile > 0.0) c.blame.ideal_percentile = f.ideal_percentile;
  c.threads = f.threads;
  return c;
}

std::vector<std::string> AllQueries(const cs::WorkloadTrace& trace) {
  std::vector<std::string> out;
  for (const cs::QueryRecord& q : trace.queries) out.push_back(q.id);
  return out;
}

std::string OneLine(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

volatile std::sig_atomic_t g_stop = 0;
cs::HttpService* g_service = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contention blame attribution for multi-tenant dataflow traces", "contendscope"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "contendscope 1.0.0");

  OutputFlags out;
  std::function<void()> run;

  // ingest
  std::string trace_path, out_path;
  bool lenient = false;
  auto* ingest = app.add_subcommand("ingest", "validate a JSONL trace and summarize it");
  ingest->add_option("--trace", trace_path, "trace file")->required();
  ingest->add_flag("--lenient", lenient, "report violations instead of failing");
  ingest->add_option("--out", out_path, "write the canonical trace here");
  AddOutputFlags(ingest, &out);
  ingest->callback([&] {
    run = [&] {
      cs::WorkloadTrace t = cs::IngestTrace(trace_path, {.strict = !lenient});
      ojson j;
      j["trace"] = trace_path;
      j["queries"] = t.queries.size();
      j["stages"] = t.stages.size();
      j["tasks"] = t.tasks.size();
      j["hosts"] = t.hosts.size();
      j["heartbeat"] = t.heartbeat_interval;
      const cs::TimeWindow span = t.Span();
      j["span"] = {span.begin, span.end};
      ojson violations = ojson::array();
      for (const cs::Violation& v : cs::Validate(t)) {
        violations.push_back({{"entity", v.entity}, {"rule", v.rule}, {"detail", v.detail}});
      }
      j["violations"] = violations;
      if (!out_path.empty()) cs::WriteTraceFile(t, out_path);
      EmitJsonOnly(out, j);
    };
  });

  // simulate
  std::string scenario, sim_config, truth_path;
  std::uint64_t seed = 1;
  bool list = false, dump_config = false;
  auto* simulate = app.add_subcommand("simulate", "run the cluster simulator");
  auto* scenario_opt = simulate->add_option("--scenario", scenario, "named scenario");
  simulate->add_option("--config", sim_config, "simulator config JSON file")
      ->check(CLI::ExistingFile)
      ->excludes(scenario_opt);
  auto* seed_opt = simulate->add_option("--seed", seed, "random seed")->capture_default_str();
  simulate->add_option("--out", out_path, "trace output (JSONL)");
  simulate->add_option("--truth", truth_path, "ground truth output (JSON)");
  simulate->add_flag("--list", list, "list scenarios");
  simulate->add_flag("--dump-config", dump_config, "print the config instead of running it");
  AddOutputFlags(simulate, &out);
  simulate->callback([&] {
    run = [&] {
      if (list) {
        ojson names = ojson::array();
        for (const std::string& n : cs::ScenarioNames()) {
          names.push_back({{"name", n}, {"description", cs::MakeScenario(n).description}});
        }
        return EmitJsonOnly(out, names);
      }
      cs::SimConfig config;
      std::string target;
      if (!scenario.empty()) {
        cs::Scenario s = cs::MakeScenario(scenario, seed);
        config = s.config;
        target = s.target;
      } else if (!sim_config.empty()) {
        config = cs::SimConfigFromJson(ReadJsonFile(sim_config));
        if (seed_opt->count() > 0) config.seed = seed;
      } else {
        throw UsageError("give --scenario or --config");
      }
      if (dump_config) return EmitJsonOnly(out, cs::SimConfigToJson(config));
      if (out_path.empty()) throw UsageError("--out is required");
      cs::SimResult r = cs::Simulate(config);
      cs::WriteTraceFile(r.trace, out_path);
      if (!truth_path.empty()) {
        std::ofstream f(truth_path, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open '" + truth_path + "' for writing");
        f << cs::GroundTruthToJson(r.truth).dump() << "\n";
      }
      ojson j;
      j["trace"] = out_path;
      if (!truth_path.empty()) j["truth"] = truth_path;
      if (!scenario.empty()) j["scenario"] = scenario;
      if (!target.empty()) j["target"] = target;
      j["seed"] = config.seed;
      j["queries"] = r.trace.queries.size();
      j["tasks"] = r.trace.tasks.size();
      const cs::TimeWindow span = r.trace.Span();
      j["span"] = {span.begin, span.end};
      j["aggressors"] = r.truth.aggressors;
      EmitJsonOnly(out, j);
    };
  });

  // analyze
  std::vector<std::string> targets;
  GraphFlags gf;
  auto* analyze = app.add_subcommand("analyze", "build the explanation graph for target queries");
  analyze->add_option("--trace", trace_path, "trace file")->required();
  analyze->add_option("--target", targets, "target query (repeatable; default every query)")
      ->delimiter(',');
  analyze->add_option("--out", out_path, "graph output (JSON); stdout when omitted");
  AddGraphFlags(analyze, &gf);
  AddOutputFlags(analyze, &out);
  analyze->callback([&] {
    run = [&] {
      const cs::GraphConfig config = MakeGraphConfig(gf);
      cs::WorkloadTrace t = cs::IngestTrace(trace_path);
      cs::ProtoGraph g = cs::BuildGraph(t, targets.empty() ? AllQueries(t) : targets, config);
      if (out_path.empty()) return EmitJsonOnly(out, cs::GraphToJson(g));
      cs::ExportGraph(g, out_path);
      ojson j;
      j["graph"] = out_path;
      j["targets"] = g.targets;
      j["nodes"] = g.nodes.size();
      j["edges"] = g.edges.size();
      j["notes"] = g.notes;
      EmitJsonOnly(out, j);
    };
  });

  // Commands over a built graph.
  std::string graph_path, target, fix;
  int k = 10;
  auto add_graph_input = [&](CLI::App* cmd) {
    cmd->add_option("--graph", graph_path, "graph file from analyze")->required();
    AddOutputFlags(cmd, &out);
  };
  auto check_k = [&] {
    if (k <= 0) throw UsageError("--k must be a positive integer");
  };

  auto* topk = app.add_subcommand("topk", "top-k explanations toward a target");
  add_graph_input(topk);
  topk->add_option("--target", target, "target query (default: the graph's only target)");
  topk->add_option("--k", k, "number of explanations")->capture_default_str();
  topk->add_option("--fix", fix, "fixed fields, e.g. res=Io,host=h1");
  topk->callback([&] {
    run = [&] {
      check_k();
      cs::ProtoGraph g = cs::ImportGraph(graph_path);
      const std::string tq = cs::ResolveTarget(g, target);
      const cs::ExplanationFix f = fix.empty() ? cs::ExplanationFix{} : cs::ExplanationFix::Parse(fix);
      auto rows = cs::TopKExplanations(g, tq, k, f);
      Emit(out, cs::ToJson(rows), [&](std::ostream& o) { cs::WriteCsv(rows, o); });
    };
  });

  auto* aggressive = app.add_subcommand("aggressive", "most aggressive source queries");
  add_graph_input(aggressive);
  aggressive->add_option("--k", k, "number of sources")->capture_default_str();
  aggressive->callback([&] {
    run = [&] {
      check_k();
      auto list = cs::AggressiveSources(cs::ImportGraph(graph_path), k);
      Emit(out, cs::ToJson(list), [&](std::ostream& o) { cs::WriteCsv(list, o); });
    };
  });

  bool weighted = false;
  auto* slownodes = app.add_subcommand("slownodes", "hosts ranked by contention impact");
  add_graph_input(slownodes);
  slownodes->add_flag("--weighted", weighted, "rank by DOR instead of impact factors");
  slownodes->callback([&] {
    run = [&] {
      auto list = cs::SlowNodes(cs::ImportGraph(graph_path), weighted);
      Emit(out, cs::ToJson(list), [&](std::ostream& o) { cs::WriteCsv(list, o); });
    };
  });

  std::string granularity = "class";
  auto* hot = app.add_subcommand("hotresources", "resources ranked by contention impact");
  add_graph_input(hot);
  hot->add_option("--granularity", granularity, "class or request")
      ->check(CLI::IsMember({"class", "request"}))
      ->capture_default_str();
  hot->callback([&] {
    run = [&] {
      auto list = cs::HotResources(cs::ImportGraph(graph_path), cs::ParseGranularity(granularity));
      Emit(out, cs::ToJson(list), [&](std::ostream& o) { cs::WriteCsv(list, o); });
    };
  });

  std::string kind = "naive";
  auto* baseline = app.add_subcommand("baseline", "overlap and blocked-time baselines");
  baseline->add_option("--trace", trace_path, "trace file")->required();
  baseline->add_option("--target", target, "target query")->required();
  baseline->add_option("--kind", kind, "naive, deep or blocked")
      ->check(CLI::IsMember({"naive", "deep", "blocked"}))
      ->capture_default_str();
  AddOutputFlags(baseline, &out);
  baseline->callback([&] {
    run = [&] {
      cs::WorkloadTrace t = cs::IngestTrace(trace_path);
      if (kind == "blocked") {
        auto r = cs::BlockedTime(t, target);
        return Emit(out, cs::ToJson(r), [&](std::ostream& o) { cs::WriteCsv(r, o); });
      }
      auto list = kind == "naive" ? cs::NaiveOverlap(t, target) : cs::DeepOverlap(t, target);
      Emit(out, cs::ToJson(list), [&](std::ostream& o) { cs::WriteCsv(list, o); });
    };
  });

  std::string bounds;
  double width = 0.0;
  auto* windows = app.add_subcommand("windows", "source shares toward a target per time window");
  windows->add_option("--trace", trace_path, "trace file")->required();
  windows->add_option("--target", target, "target query")->required();
  auto* bounds_opt = windows->add_option("--bounds", bounds, "windows as b:e,b:e,...");
  windows->add_option("--width", width, "tumbling windows over the target's lifetime")
      ->check(CLI::PositiveNumber)
      ->excludes(bounds_opt);
  AddGraphFlags(windows, &gf);
  AddOutputFlags(windows, &out);
  windows->callback([&] {
    run = [&] {
      if (bounds.empty() && width <= 0.0) throw UsageError("give --bounds or --width");
      const cs::GraphConfig config = MakeGraphConfig(gf);
      cs::WorkloadTrace t = cs::IngestTrace(trace_path);
      const auto ws = bounds.empty() ? cs::TumblingWindows(t, target, width)
                                     : cs::ParseBounds(bounds);
      auto shares = cs::WindowedAnalysis(t, target, ws, config);
      Emit(out, cs::ToJson(shares), [&](std::ostream& o) { cs::WriteCsv(shares, o); });
    };
  });

  std::string table = "nodes";
  auto* exp = app.add_subcommand("export", "re-export a graph as canonical JSON or CSV tables");
  exp->add_option("--graph", graph_path, "graph file")->required();
  exp->add_option("--table", table, "CSV table: nodes or edges")
      ->check(CLI::IsMember({"nodes", "edges"}))
      ->capture_default_str();
  exp->add_option("--out", out_path, "output file; stdout when omitted");
  AddOutputFlags(exp, &out);
  exp->callback([&] {
    run = [&] {
      cs::ProtoGraph g = cs::ImportGraph(graph_path);
      std::ostringstream text;
      if (out.format == "csv") {
        cs::WriteGraphCsv(g, table, text);
      } else {
        text << (out.pretty ? cs::GraphToJson(g).dump(2) : cs::SerializeGraph(g)) << "\n";
      }
      if (out_path.empty()) {
        std::cout << (out.pretty && out.format == "csv" ? cs::PrettyTable(text.str()) : text.str());
        return;
      }
      std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
      if (!f || !(f << text.str()).flush()) {
        throw std::runtime_error("cannot write '" + out_path + "'");
      }
    };
  });

  std::string bind = "127.0.0.1", persist;
  int port = -1;
  auto* serve = app.add_subcommand("serve", "HTTP JSON service over analysis sessions");
  serve->add_option("--bind", bind, "address to listen on")->capture_default_str();
  serve->add_option("--port", port, "port (default $CONTENDSCOPE_PORT or 8780; 0 picks one)")
      ->check(CLI::Range(0, 65535));
  serve->add_option("--persist", persist, "write each session's graph JSON here");
  serve->callback([&] {
    run = [&] {
      if (port < 0) {
        const char* env = std::getenv("CONTENDSCOPE_PORT");
        port = 8780;
        if (env != nullptr && *env != '\0') {
          try {
            port = std::stoi(env);
          } catch (const std::exception&) {
            throw UsageError(std::string("bad CONTENDSCOPE_PORT '") + env + "'");
          }
        }
      }
      cs::SessionStore store(persist);
      cs::HttpService service(&store);
      const int bound = service.Bind(bind, port);
      if (bound < 0) {
        throw std::runtime_error("cannot listen on " + bind + ":" + std::to_string(port));
      }
      g_service = &service;
      std::signal(SIGINT, [](int) { g_stop = 1; if (g_service) g_service->Stop(); });
      std::signal(SIGTERM, [](int) { g_stop = 1; if (g_service) g_service->Stop(); });
      std::cout << ojson{{"listening", bind}, {"port", bound}}.dump() << std::endl;
      service.Serve();
      g_service = nullptr;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "contendscope: " << OneLine(e.what()) << "\n";
    std::cerr << "run 'contendscope --help' for usage\n";
    return 2;
  }
  try {
    run();
  } catch (const UsageError& e) {
    std::cerr << "contendscope: " << OneLine(e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "contendscope: error: " << OneLine(e.what()) << "\n";
    return 1;
  }
  return 0;
}
