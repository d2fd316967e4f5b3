/*
 * Copyright 2026 The DDS Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <chrono>
#include <random>
#include <set>

#include "dag.hpp"
#include "dg_oracle.hpp"
#include "doctest.h"

using namespace dds;

namespace {

JobGraph graph_of(std::vector<std::pair<std::string, std::vector<std::string>>> spec) {
  JobGraph g;
  for (auto& [id, deps] : spec) g.jobs.push_back({id, Json::object(), deps});
  return g;
}

const Content& job(const DagRun& run, const std::string& id) {
  for (const auto& c : run.jobs)
    if (c.name == id) return c;
  throw std::runtime_error("no job " + id);
}

// Every job executed once, none before its dependencies finished.
void check_audit(const JobGraph& g, const DagRun& run) {
  REQUIRE(run.completed);
  CHECK(run.status == "Finished");
  REQUIRE(run.jobs.size() == g.jobs.size());
  std::map<std::string, const Content*> by;
  for (const auto& c : run.jobs) by[c.name] = &c;
  CHECK(by.size() == g.jobs.size());
  std::size_t violations = 0, reruns = 0;
  for (const auto& j : g.jobs) {
    const Content* c = by.at(j.id);
    reruns += run.executions.at(j.id) != 1 || c->status != ContentStatus::kProcessed;
    for (const auto& d : j.depends_on) violations += c->started_at < by.at(d)->finished_at;
  }
  CHECK(reruns == 0);
  CHECK(violations == 0);
}

}  // namespace

TEST_CASE("layering: chain and diamond") {
  const auto chain = graph_of({{"a", {}}, {"b", {"a"}}, {"c", {"b"}}});
  CHECK(layer_jobs(chain) == std::vector<std::vector<std::string>>{{"a"}, {"b"}, {"c"}});
  const auto wf = ingest_job_graph(chain);
  CHECK(wf.templates.size() == 3);
  CHECK(validate_workflow(wf).ok());

  const auto diamond = job_graph_from_json(Json::parse(
      R"({"version":1,"jobs":[{"id":"a"},{"id":"b","depends_on":["a"]},{"id":"c","depends_on":["a"]},{"id":"d","depends_on":["b","c"]}]})"));
  CHECK(layer_jobs(diamond) == std::vector<std::vector<std::string>>{{"a"}, {"b", "c"}, {"d"}});
  CHECK(ingest_job_graph(diamond).templates.size() == 3);
  // longest path, not shortest
  const auto skew = graph_of({{"a", {}}, {"b", {"a"}}, {"c", {"a", "b"}}});
  CHECK(layer_jobs(skew) == std::vector<std::vector<std::string>>{{"a"}, {"b"}, {"c"}});
  CHECK(job_graph_from_json(job_graph_to_json(diamond)) == diamond);
}

TEST_CASE("ingest errors") {
  auto code = [](const JobGraph& g) {
    try {
      layer_jobs(g);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInternal;
  };
  CHECK(code(graph_of({{"a", {"b"}}, {"b", {"a"}}})) == ErrorCode::kCyclicJobGraph);
  CHECK(code(graph_of({{"a", {"a"}}})) == ErrorCode::kCyclicJobGraph);
  CHECK(code(graph_of({{"a", {"zz"}}})) == ErrorCode::kDanglingDependency);
  CHECK(code(graph_of({{"a", {}}, {"a", {}}})) == ErrorCode::kValidation);
  CHECK_THROWS_AS(job_graph_from_json(Json::parse(R"({"version":2,"jobs":[]})")), Error);
  CHECK_THROWS_AS(job_graph_from_json(Json::parse(R"({"version":1,"jobs":[{"id":"a","x":1}]})")), Error);
}

TEST_CASE("pipeline: chain and diamond run in order") {
  const auto chain = graph_of({{"a", {}}, {"b", {"a"}}, {"c", {"b"}}});
  check_audit(chain, run_dag(chain));
  const auto diamond = graph_of({{"a", {}}, {"b", {"a"}}, {"c", {"a"}}, {"d", {"b", "c"}}});
  const auto run = run_dag(diamond);
  check_audit(diamond, run);
  // b and c both released off a, d waits for both
  CHECK(job(run, "b").started_at == job(run, "c").started_at);
  CHECK(job(run, "d").started_at >= std::max(job(run, "b").finished_at, job(run, "c").finished_at));
}

TEST_CASE("incremental release: no layer barrier") {
  // One worker: layer 0 runs a, x1, x2, x3 one after another; b only needs a.
  const auto g = graph_of({{"a", {}}, {"x1", {}}, {"x2", {}}, {"x3", {}}, {"b", {"a"}}});
  Runtime rt;
  ComputeSimConfig cc;
  cc.workers = 1;
  rt.backends().bind(std::string(kDagScope), std::make_shared<DagCatalog>(),
                     std::make_shared<ComputeSim>(rt.clock(), cc));
  const std::string id = rt.submit({ingest_job_graph(g), "dag"});
  auto status_of = [&](const std::string& name) {
    Query<Content> q;
    q.where = [&](const Content& c) { return c.name == name && c.collection_id.ends_with("#in"); };
    const auto rows = rt.store().list(q);
    REQUIRE(rows.size() == 1);
    return rows[0].status;
  };
  rt.run_until([&] { return rt.clock().now() >= 2500; }, 3'600'000);
  CHECK(status_of("a") == ContentStatus::kProcessed);
  CHECK(status_of("x3") != ContentStatus::kProcessed);
  CHECK(status_of("b") != ContentStatus::kNew);
  REQUIRE(rt.run_until_terminal(id, 3'600'000));
  CHECK(to_string(rt.store().get<RequestRecord>(id).status) == "Finished");
}

TEST_CASE("replay: conductor restarts do not double release") {
  const auto g = random_job_graph(300, 6, 3, 21);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    std::mt19937_64 rng(seed);
    DagRunOptions o;
    o.workers = 8;
    o.fault_hook = [&](std::string_view) {
      if (rng() % 50 == 0) throw Error(ErrorCode::kInjectedCrash, "injected");
    };
    const auto run = run_dag(g, o);
    check_audit(g, run);
    CHECK(run.crashes > 0);
  }
}

TEST_CASE("random DAG generator") {
  const auto g = random_job_graph(500, 20, 3, 9);
  CHECK(g.jobs.size() == 500);
  CHECK(layer_jobs(g).size() == 20);
  CHECK(random_job_graph(500, 20, 3, 9) == g);
  for (const auto& j : g.jobs) CHECK(j.depends_on.size() <= 3);
}

TEST_CASE("10,000-job DAG: exactly once, dependency order") {
  const auto g = random_job_graph(10'000, 20, 3, 2024);
  const auto t0 = std::chrono::steady_clock::now();
  const auto run = run_dag(g);
  const auto wall = std::chrono::steady_clock::now() - t0;
  check_audit(g, run);
  CHECK(wall < std::chrono::minutes(5));
}

TEST_CASE("active learning: workflow shape") {
  ActiveLearningSpec s;
  const auto wf = build_active_learning(s);
  CHECK(validate_workflow(wf).ok());
  REQUIRE(wf.templates.size() == 2);
  CHECK(wf.templates[0].is_entry);
  CHECK(wf.templates[0].max_instantiations == 5);
  CHECK(wf.templates[1].work_kind == WorkKind::kDecisionMaking);
  CHECK(wf.conditions.size() == 2);
  s.max_loops = 0;
  CHECK_THROWS_AS(validate(s), Error);
}

TEST_CASE("active learning: stop at k") {
  for (int k : {1, 2, 3, 5}) {
    CAPTURE(k);
    ActiveLearningSpec s;
    std::vector<int> script(static_cast<std::size_t>(k - 1), 1);
    script.push_back(0);
    const auto run = run_active_learning(s, script);
    CHECK(run.processing_runs == k);
    CHECK(run.decision_runs == k);
    CHECK(run.status == "Finished");
    std::vector<std::string> expect;
    for (int i = 0; i < k; ++i) {
      expect.push_back("P");
      expect.push_back("D");
    }
    CHECK(run.sequence == expect);
  }
}

TEST_CASE("active learning: never stop hits the cap") {
  ActiveLearningSpec s;
  s.max_loops = 5;
  const auto run = run_active_learning(s, std::vector<int>(50, 1));
  CHECK(run.processing_runs == 5);
  CHECK(run.decision_runs == 5);
  CHECK(run.status == "SubFinished");
}

TEST_CASE("active learning: hints flow into the next round") {
  ActiveLearningSpec s;
  const auto run = run_active_learning(s, {1, 1, 0});
  std::vector<double> hints;
  for (const auto& w : run.works)
    if (w.template_name == "P") hints.push_back(std::get<double>(w.bindings.at("hint")));
  CHECK(hints == std::vector<double>{0.0, 1.0, 2.0});
}

TEST_CASE("property: loop count is min(1 + continues, max_loops)") {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 25; ++trial) {
    ActiveLearningSpec s;
    s.max_loops = 1 + static_cast<std::int64_t>(rng() % 6);
    std::vector<int> script;
    int continues = 0;
    while (rng() % 4 != 0 && script.size() < 8) {
      script.push_back(1);
      ++continues;
    }
    script.push_back(0);
    const auto run = run_active_learning(s, script);
    CHECK(run.processing_runs == std::min<std::int64_t>(1 + continues, s.max_loops));
  }
}

TEST_CASE("condition graphs: pipeline matches the topological oracle") {
  std::vector<oracle::Graph> acyclic, cyclic;
  oracle::enumerate([&](const oracle::Graph& g) { (oracle::acyclic(g) ? acyclic : cyclic).push_back(g); });
  CHECK(acyclic.size() == 3048);
  CHECK(cyclic.size() == 22830);
  // A stride through the enumeration; the acceptance run covers all of it.
  std::vector<oracle::Graph> sample;
  for (std::size_t i = 0; i < acyclic.size(); i += 5) sample.push_back(acyclic[i]);
  std::vector<Workflow> flows;
  for (const auto& g : sample) flows.push_back(oracle::to_workflow(g));
  const auto got = oracle::run_batch(flows);
  int mismatches = 0;
  for (std::size_t i = 0; i < sample.size(); ++i)
    mismatches += got[i].works != oracle::topological_oracle(sample[i]) || !got[i].all_finished;
  CHECK(mismatches == 0);

  flows.clear();
  for (std::size_t i = 0; i < cyclic.size(); i += 40) flows.push_back(oracle::to_workflow(cyclic[i], 3, 6));
  for (const auto& o : oracle::run_batch(flows)) {
    CHECK(o.terminal);
    CHECK(o.total <= 6);
    for (const auto& [t, n] : o.per_template) CHECK(n <= 3);
  }
}
