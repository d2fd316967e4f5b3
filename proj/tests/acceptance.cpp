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


// One line per headline criterion: PASS or FAIL with the measured numbers.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <random>
#include <string>

#include "carousel.hpp"
#include "carousel_oracle.hpp"
#include "crash_harness.hpp"
#include "dag.hpp"
#include "dg_oracle.hpp"
#include "hpo.hpp"
#include "hpo_driver.hpp"
#include "wire_gen.hpp"

using namespace dds;
using WallClock = std::chrono::steady_clock;

namespace {

int failed = 0;

void report(bool ok, const char* name, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  failed += !ok;
}

double seconds_since(WallClock::time_point t0) {
  return std::chrono::duration<double>(WallClock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ScenarioConfig thousand_files() {
  ScenarioConfig s;
  s.tape.dataset = "data18";
  s.tape.files = generate_files(1000, 1'000'000'000, 3'000'000'000, 42);
  s.tape.files_per_second = 10.0;
  s.tape.seed = 7;
  s.compute.workers = 8;
  s.compute.per_file_processing_time = 2000;
  s.compute.input_wait_timeout = 30'000;
  s.compute.resubmit_interval = 1000;
  s.compute.failure_rate = 0.0;
  s.compute.seed = 1;
  return s;
}

// Frozen from the independent replay in carousel_oracle.hpp.
constexpr std::int64_t kFilePeak = 1'196'962'213'951;
constexpr std::int64_t kDatasetPeak = 2'011'826'962'177;
constexpr std::int64_t kFileByteSeconds = 152'244'647'927'404;
constexpr std::int64_t kDatasetByteSeconds = 463'594'540'076'293;
const std::map<std::int64_t, std::int64_t> kDatasetHistogram = {{2, 300}, {3, 300}, {4, 300}, {5, 100}};

void carousel_criteria() {
  const ScenarioConfig s = thousand_files();
  TapeSim tape(s.tape);
  std::vector<oracle::File> files;
  for (const auto& f : s.tape.files) files.push_back({f.name, f.size_bytes, tape.stage_time(f.name)});
  const oracle::Farm farm{8, 2000, 30'000, 1000};
  const auto o_file = oracle::replay(files, farm, true);
  const auto o_data = oracle::replay(files, farm, false);
  const bool oracle_frozen = o_file.peak == kFilePeak && o_data.peak == kDatasetPeak &&
                             o_file.byte_seconds == kFileByteSeconds &&
                             o_data.byte_seconds == kDatasetByteSeconds && o_data.histogram == kDatasetHistogram;

  const auto t0 = WallClock::now();
  const auto fl = run_carousel(s, parse_policy("file-level"));
  const double fl_wall = seconds_since(t0);
  const auto t1 = WallClock::now();
  const auto dl = run_carousel(s, parse_policy("dataset-level"));
  const double dl_wall = seconds_since(t1);

  std::int64_t single = 0;
  for (const auto& c : fl.inputs) single += c.attempt_count == 1;
  const bool attempts_ok = fl.completed && dl.completed && single == 1000 &&
                           dl.metrics.mean_attempts > 1.5 && dl.metrics.attempts_histogram == o_data.histogram &&
                           fl.metrics.attempts_histogram == o_file.histogram && oracle_frozen &&
                           fl_wall < 10.0 && dl_wall < 10.0;
  report(attempts_ok, "carousel-attempts",
         fmt("file-level %lld/1000 single-attempt; dataset-level mean %.3f (oracle %.3f); "
             "virtual makespan %.1f s / %.1f s; wall %.2f s / %.2f s",
             static_cast<long long>(single), dl.metrics.mean_attempts, o_data.mean_attempts,
             fl.metrics.makespan / 1000.0, dl.metrics.makespan / 1000.0, fl_wall, dl_wall));

  const double ratio = static_cast<double>(fl.metrics.peak_disk_bytes) /
                       static_cast<double>(dl.metrics.peak_disk_bytes);
  const bool matches_oracle = fl.metrics.peak_disk_bytes == o_file.peak &&
                              dl.metrics.peak_disk_bytes == o_data.peak &&
                              fl.metrics.disk_byte_seconds == o_file.byte_seconds &&
                              dl.metrics.disk_byte_seconds == o_data.byte_seconds;
  const bool footprint_ok = matches_oracle && ratio <= 0.5 &&
                            fl.metrics.disk_byte_seconds < dl.metrics.disk_byte_seconds;
  report(footprint_ok, "carousel-footprint",
         fmt("peak %lld vs %lld bytes, ratio %.4f (needs <= 0.5); byte-seconds ratio %.4f; oracle %s",
             static_cast<long long>(fl.metrics.peak_disk_bytes),
             static_cast<long long>(dl.metrics.peak_disk_bytes), ratio,
             static_cast<double>(fl.metrics.disk_byte_seconds) / static_cast<double>(dl.metrics.disk_byte_seconds),
             matches_oracle ? "exact" : "MISMATCH"));
}

void dg_criterion() {
  const auto t0 = WallClock::now();
  std::vector<oracle::Graph> acyclic, cyclic;
  oracle::enumerate([&](const oracle::Graph& g) { (oracle::acyclic(g) ? acyclic : cyclic).push_back(g); });
  constexpr std::size_t kBatch = 50;
  std::size_t mismatches = 0, runaway = 0;
  for (std::size_t b = 0; b < acyclic.size(); b += kBatch) {
    std::vector<Workflow> flows;
    const std::size_t end = std::min(acyclic.size(), b + kBatch);
    for (std::size_t i = b; i < end; ++i) flows.push_back(oracle::to_workflow(acyclic[i]));
    const auto got = oracle::run_batch(flows);
    for (std::size_t i = b; i < end; ++i) {
      const auto& o = got[i - b];
      mismatches += !o.terminal || !o.all_finished || o.works != oracle::topological_oracle(acyclic[i]);
    }
  }
  for (std::size_t b = 0; b < cyclic.size(); b += kBatch) {
    std::vector<Workflow> flows;
    const std::size_t end = std::min(cyclic.size(), b + kBatch);
    for (std::size_t i = b; i < end; ++i) flows.push_back(oracle::to_workflow(cyclic[i], 3, 6));
    for (const auto& o : oracle::run_batch(flows)) {
      bool within = o.terminal && o.total <= 6;
      for (const auto& [t, n] : o.per_template) within = within && n <= 3;
      runaway += !within;
    }
  }
  const double wall = seconds_since(t0);
  report(mismatches == 0 && runaway == 0 && wall < 30.0, "dg-oracle",
         fmt("%zu acyclic graphs, %zu mismatches; %zu cyclic graphs, %zu past caps; %.1f s",
             acyclic.size(), mismatches, cyclic.size(), runaway, wall));
}

void dag_criterion() {
  const auto g = random_job_graph(10'000, 20, 3, 2024);
  const auto t0 = WallClock::now();
  const auto run = run_dag(g);
  const double wall = seconds_since(t0);
  std::map<std::string, const Content*> by;
  for (const auto& c : run.jobs) by[c.name] = &c;
  std::size_t not_once = 0, order = 0;
  for (const auto& j : g.jobs) {
    auto it = by.find(j.id);
    if (it == by.end() || run.executions.at(j.id) != 1 || it->second->status != ContentStatus::kProcessed) {
      ++not_once;
      continue;
    }
    for (const auto& d : j.depends_on) order += it->second->started_at < by.at(d)->finished_at;
  }
  report(run.completed && run.status == "Finished" && not_once == 0 && order == 0 && wall < 300.0,
         "rubin-dag",
         fmt("%zu jobs, %zu not executed exactly once, %zu dependency violations, status %s, %.1f s wall",
             g.jobs.size(), not_once, order, run.status.c_str(), wall));
}

void active_learning_criterion() {
  std::string detail;
  bool ok = true;
  for (int k : {1, 2, 5}) {
    std::vector<int> script(static_cast<std::size_t>(k - 1), 1);
    script.push_back(0);
    const auto r = run_active_learning({}, script);
    ok = ok && r.processing_runs == k && r.decision_runs == k && r.status == "Finished";
    detail += fmt("stop@%d: %lldP+%lldD %s; ", k, static_cast<long long>(r.processing_runs),
                  static_cast<long long>(r.decision_runs), r.status.c_str());
  }
  ActiveLearningSpec s;
  s.max_loops = 5;
  const auto r = run_active_learning(s, std::vector<int>(100, 1));
  ok = ok && r.processing_runs == 5 && r.decision_runs == 5 && r.status == "SubFinished";
  detail += fmt("never-stop: %lldP+%lldD %s", static_cast<long long>(r.processing_runs),
                static_cast<long long>(r.decision_runs), r.status.c_str());
  report(ok, "active-learning", detail);
}

void hpo_criterion() {
  const auto objective = [](const Json& v) {
    const double x = v.at("x").get<double>();
    return (x - 1.0) * (x - 1.0);
  };
  int converged = 0, monotone = 0, oracle_agree = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto t = test::one_dim_task(-5, 5, seed);
    t.points_per_iteration = 10;
    t.max_points = 200;
    HpoRunOptions o;
    o.objective = objective;
    o.evaluator.seed = seed;
    o.evaluator.order_seed = seed;
    const auto r = run_hpo(t, o);
    converged += r.best_loss && *r.best_loss < 1e-2 && r.trace.size() == 200;
    bool mono = true;
    for (std::size_t i = 1; i < r.trace.size(); ++i) mono = mono && r.trace[i] <= r.trace[i - 1];
    monotone += mono;
    oracle_agree += r.best_loss && *r.best_loss == test::best_of(test::drive_standalone(t, objective));
  }
  auto t = test::one_dim_task(-5, 5, 77);
  t.points_per_iteration = 10;
  t.max_points = 200;
  HpoRunOptions o;
  o.objective = objective;
  const auto base = run_hpo(t, o);
  int invariant = 0;
  for (std::uint64_t order = 1; order <= 100; ++order) {
    o.evaluator.order_seed = order;
    const auto r = run_hpo(t, o);
    invariant += r.trace == base.trace && r.best_point == base.best_point && r.points == base.points;
  }
  report(converged >= 95 && monotone == 100 && invariant == 100, "hpo-convergence",
         fmt("best_loss < 1e-2 in %d/100 seeds (standalone sampler agrees in %d/100); "
             "monotone trace %d/100; order-invariant %d/100 shuffles",
             converged, oracle_agree, monotone, invariant));
}

void crash_criterion() {
  const auto baseline = test::run_crash_trial(0, 0.0, 0.0);
  int consistent = 0;
  std::int64_t injected = 0;
  std::array<std::int64_t, 5> restarts{};
  std::string first_problem;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto t = test::run_crash_trial(seed);
    const bool ok = t.problem.empty() && t.message_ids == baseline.message_ids;
    consistent += ok;
    if (!ok && first_problem.empty()) first_problem = fmt("seed %llu: %s", static_cast<unsigned long long>(seed), t.problem.c_str());
    injected += t.injected;
    for (std::size_t i = 0; i < 5; ++i) restarts[i] += t.restarts[i];
  }
  bool every_daemon = true;
  for (auto r : restarts) every_daemon = every_daemon && r > 0;
  report(consistent == 100 && every_daemon, "crash-safety",
         fmt("%d/100 trials consistent; %lld injected crashes; restarts per daemon %lld/%lld/%lld/%lld/%lld%s%s",
             consistent, static_cast<long long>(injected), static_cast<long long>(restarts[0]),
             static_cast<long long>(restarts[1]), static_cast<long long>(restarts[2]),
             static_cast<long long>(restarts[3]), static_cast<long long>(restarts[4]),
             first_problem.empty() ? "" : "; ", first_problem.c_str()));
}

void wire_criterion() {
  test::Gen gen(4242);
  int identical = 0;
  for (int i = 0; i < 1000; ++i) {
    const WireRequest req{gen.workflow(), gen.text()};
    const std::string first = render_wire_request(req);
    try {
      const WireRequest back = parse_wire_request(first);
      identical += render_wire_request(back) == first && back == req;
    } catch (const Error&) {
    }
  }
  const Json base = Json::parse(test::valid_request());
  const auto suite = test::rejection_suite();
  int rejected = 0;
  for (const auto& r : suite) rejected += test::check_rejection(base, r).empty();
  for (const char* text : {"", "{", "[]", "null", "{\"wire_version\": 1,"}) {
    try {
      parse_wire_request(text);
    } catch (const Error& e) {
      rejected += e.code() == ErrorCode::kParse;
    }
  }
  const int cases = static_cast<int>(suite.size()) + 5;
  report(identical == 1000 && rejected == cases, "wire-round-trip",
         fmt("%d/1000 byte-identical round trips; %d/%d malformed documents rejected", identical, rejected, cases));
}

}  // namespace

int main() {
  carousel_criteria();
  dg_criterion();
  dag_criterion();
  active_learning_criterion();
  hpo_criterion();
  crash_criterion();
  wire_criterion();
  std::printf("%d criteria failed\n", failed);
  return failed;
}
