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
#include <thread>

#include "carousel.hpp"
#include "daemons.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "service.hpp"

using namespace dds;
using dds::test::make_template;

namespace {

enum Slot { kClerk = 0, kMarshaller, kTransformer, kCarrier, kConductor };

WireRequest one_template(const std::string& scope = "default", const std::string& dataset = "ds") {
  Workflow wf;
  wf.name = "w";
  auto t = make_template("A", true);
  t.input_spec = {scope, dataset};
  wf.templates.push_back(t);
  return {wf, "consumer-1"};
}

std::vector<Message> messages(const Store& store, MessageType type) {
  Query<Message> q;
  q.where = [type](const Message& m) { return m.msg_type == type; };
  return store.list(q);
}

std::string only_work(const Store& store, const std::string& request_id) {
  Query<WorkRecord> q;
  q.owner = request_id;
  const auto works = store.list(q);
  REQUIRE(works.size() == 1);
  return works[0].work.work_id;
}

}  // namespace

TEST_CASE("transformer: three files give matching collections and one processing") {
  Runtime rt;
  auto ddm = std::make_shared<InstantDdm>(InstantDdmConfig{3, 10});
  rt.backends().set_default(ddm, std::make_shared<InstantWfm>(rt.clock()));
  const auto id = rt.submit(one_template());
  rt.pipeline().daemon(kClerk).step();
  CHECK(rt.store().get<RequestRecord>(id).status == RequestStatus::kTransforming);
  const auto wid = only_work(rt.store(), id);
  CHECK(rt.pipeline().daemon(kTransformer).step() >= 1);
  CHECK(rt.store().get<WorkRecord>(wid).work.status == WorkStatus::kActivated);
  const auto in = rt.store().get<Collection>(input_collection_id(wid));
  const auto out = rt.store().get<Collection>(output_collection_id(wid));
  CHECK(in.kind == CollectionKind::kInput);
  CHECK(out.kind == CollectionKind::kOutput);
  CHECK(in.total_contents == 3);
  CHECK(out.total_contents == 3);
  CHECK(in.available_contents == 3);
  CHECK(rt.store().count<Processing>() == 1);
  CHECK(rt.store().get<Processing>(processing_id(wid)).status == ProcessingStatus::kNew);
}

TEST_CASE("transformer: empty input finishes without a processing") {
  Runtime rt;
  auto ddm = std::make_shared<InstantDdm>();
  ddm->set_files("empty", 0);
  rt.backends().set_default(ddm, std::make_shared<InstantWfm>(rt.clock()));
  const auto id = rt.submit(one_template("default", "empty"));
  rt.pipeline().daemon(kClerk).step();
  rt.pipeline().daemon(kTransformer).step();
  CHECK(rt.store().get<WorkRecord>(only_work(rt.store(), id)).work.status == WorkStatus::kFinished);
  CHECK(rt.store().count<Processing>() == 0);
  REQUIRE(rt.run_until_terminal(id, 60'000));
  CHECK(rt.store().get<RequestRecord>(id).status == RequestStatus::kFinished);
}

TEST_CASE("transformer: unreachable DDM fails the work after max_retries") {
  RuntimeOptions opts;
  opts.pipeline.base.max_retries = 3;
  Runtime rt(opts);
  auto ddm = std::make_shared<InstantDdm>();
  ddm->set_down(true);
  rt.backends().set_default(ddm, std::make_shared<InstantWfm>(rt.clock()));
  const auto id = rt.submit(one_template());
  rt.pipeline().daemon(kClerk).step();
  const auto wid = only_work(rt.store(), id);
  for (int cycle = 0; cycle < 3; ++cycle) {
    rt.pipeline().daemon(kTransformer).step();
    CHECK(rt.store().get<WorkRecord>(wid).work.status == WorkStatus::kNew);
    rt.virtual_clock()->advance(1000);
  }
  rt.pipeline().daemon(kTransformer).step();
  CHECK(rt.store().get<WorkRecord>(wid).work.status == WorkStatus::kFailed);
  CHECK(ddm->resolve_calls() == 4);
  REQUIRE(rt.run_until_terminal(id, 60'000));
  CHECK(rt.store().get<RequestRecord>(id).status == RequestStatus::kFailed);
}

TEST_CASE("carrier: submit, partial progress, terminal") {
  Runtime rt;
  ComputeSimConfig cfg;
  cfg.workers = 1;
  cfg.per_file_processing_time = 1000;
  auto wfm = std::make_shared<ComputeSim>(rt.clock(), cfg);
  rt.backends().set_default(std::make_shared<InstantDdm>(InstantDdmConfig{3, 10}), wfm);
  const auto id = rt.submit(one_template());
  rt.pipeline().daemon(kClerk).step();
  rt.pipeline().daemon(kTransformer).step();
  const auto wid = only_work(rt.store(), id);
  rt.pipeline().daemon(kCarrier).step();
  const auto p = rt.store().get<Processing>(processing_id(wid));
  CHECK(p.status != ProcessingStatus::kNew);
  CHECK_FALSE(p.external_id.empty());
  CHECK(rt.store().get<WorkRecord>(wid).work.status == WorkStatus::kRunning);

  rt.virtual_clock()->advance(2000);
  rt.pipeline().daemon(kCarrier).step();
  CHECK(rt.store().get<Collection>(input_collection_id(wid)).processed_contents == 2);
  CHECK(rt.store().get<Processing>(processing_id(wid)).status == ProcessingStatus::kRunning);

  rt.virtual_clock()->advance(1000);
  rt.pipeline().daemon(kCarrier).step();
  rt.pipeline().daemon(kCarrier).step();
  CHECK(rt.store().get<Processing>(processing_id(wid)).status == ProcessingStatus::kFinished);
  CHECK(rt.store().get<WorkRecord>(wid).work.status == WorkStatus::kTerminating);
  rt.pipeline().daemon(kTransformer).step();
  CHECK(rt.store().get<WorkRecord>(wid).work.status == WorkStatus::kFinished);
  Query<Content> q;
  q.owner = input_collection_id(wid);
  for (const auto& c : rt.store().list(q)) CHECK(c.status == ContentStatus::kProcessed);
}

TEST_CASE("conductor: one message per event, idempotent across restarts") {
  Runtime rt;
  rt.backends().set_default(std::make_shared<InstantDdm>(InstantDdmConfig{1, 1}),
                            std::make_shared<InstantWfm>(rt.clock()));
  const auto id = rt.submit(one_template());
  rt.pipeline().daemon(kClerk).step();
  rt.pipeline().daemon(kTransformer).step();
  rt.pipeline().daemon(kConductor).step();
  CHECK(messages(rt.store(), MessageType::kContentAvailable).size() == 1);
  rt.pipeline().restart(kConductor);
  rt.pipeline().daemon(kConductor).step();
  CHECK(messages(rt.store(), MessageType::kContentAvailable).size() == 1);

  REQUIRE(rt.run_until_terminal(id, 60'000));
  rt.pipeline().run_until_quiescent();
  CHECK(messages(rt.store(), MessageType::kRequestDone).size() == 1);
  CHECK(messages(rt.store(), MessageType::kWorkTerminated).size() == 1);
  for (const auto& m : rt.store().list<Message>()) {
    CHECK(m.destination == "consumer-1");
    CHECK(m.delivery_status == DeliveryStatus::kAcked);
  }
  CHECK(rt.transport().distinct_count() == rt.store().count<Message>());
}

TEST_CASE("conductor: transport outage leaves messages pending until recovery") {
  Runtime rt;
  rt.backends().set_default(std::make_shared<InstantDdm>(InstantDdmConfig{2, 1}),
                            std::make_shared<InstantWfm>(rt.clock()));
  rt.transport().set_down(true);
  const auto id = rt.submit(one_template());
  REQUIRE(rt.run_until_terminal(id, 60'000));
  rt.pipeline().run_until_quiescent();
  const auto pending = rt.store().list<Message>();
  CHECK_FALSE(pending.empty());
  for (const auto& m : pending) CHECK(m.delivery_status == DeliveryStatus::kPending);
  CHECK(rt.transport().delivery_count() == 0);
  rt.transport().set_down(false);
  rt.pipeline().run_until_quiescent();
  for (const auto& m : rt.store().list<Message>()) CHECK(m.delivery_status == DeliveryStatus::kAcked);
  CHECK(rt.transport().distinct_count() == pending.size());
}

TEST_CASE("pipeline: terminal within lifecycle-edge many poll intervals") {
  // request 2 edges, work 4, processing 3, content 3
  const Millis edges = 2 + 4 + 3 + 3;
  RuntimeOptions opts;
  Runtime rt(opts);
  rt.backends().set_default(std::make_shared<InstantDdm>(InstantDdmConfig{3, 1}),
                            std::make_shared<InstantWfm>(rt.clock()));
  const auto id = rt.submit(one_template());
  VirtualRunner ticks(rt.pipeline(), *rt.virtual_clock(), rt.backends());
  const Millis poll = opts.pipeline.base.poll_interval;
  CHECK(ticks.run_ticks(
      [&] { return is_terminal(rt.store().get<RequestRecord>(id).status); }, edges * poll));
  CHECK(rt.store().get<RequestRecord>(id).status == RequestStatus::kFinished);
}

TEST_CASE("pipeline: instant backends give one attempt per content") {
  Runtime rt;
  rt.backends().set_default(std::make_shared<InstantDdm>(InstantDdmConfig{25, 1}),
                            std::make_shared<InstantWfm>(rt.clock()));
  Workflow wf = one_template().workflow;
  wf.templates.push_back(make_template("B"));
  wf.conditions.push_back(dds::test::edge("A", "B"));
  const auto id = rt.submit({wf, "c"});
  REQUIRE(rt.run_until_terminal(id, 60'000));
  CHECK(rt.store().get<RequestRecord>(id).status == RequestStatus::kFinished);
  Query<Content> q;
  q.where = [](const Content& c) { return c.collection_id.find("#in") != std::string::npos; };
  const auto contents = rt.store().list(q);
  CHECK(contents.size() == 50);
  for (const auto& c : contents) CHECK(c.attempt_count == 1);
}

TEST_CASE("pipeline: replicas share work through claims") {
  RuntimeOptions opts;
  opts.pipeline.replicas = {2, 2, 3, 3, 2};
  opts.pipeline.base.batch_size = 2;
  Runtime rt(opts);
  rt.backends().set_default(std::make_shared<InstantDdm>(InstantDdmConfig{10, 1}),
                            std::make_shared<InstantWfm>(rt.clock()));
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) ids.push_back(rt.submit(one_template()));
  REQUIRE(rt.run_until([&] {
    for (const auto& id : ids) {
      if (!is_terminal(rt.store().get<RequestRecord>(id).status)) return false;
    }
    return true;
  }, 600'000));
  CHECK(rt.store().count<WorkRecord>() == 6);
  CHECK(rt.store().count<Processing>() == 6);
  CHECK(rt.stats().step_errors == 0);
}

TEST_CASE("pipeline: failed contents make the work SubFinished, the request Failed") {
  Runtime rt;
  ComputeSimConfig cfg;
  cfg.workers = 4;
  cfg.failure_rate = 0.5;
  cfg.seed = 2;
  rt.backends().set_default(std::make_shared<InstantDdm>(InstantDdmConfig{20, 1}),
                            std::make_shared<ComputeSim>(rt.clock(), cfg));
  const auto id = rt.submit(one_template());
  REQUIRE(rt.run_until_terminal(id, 3'600'000));
  const auto wid = only_work(rt.store(), id);
  CHECK(rt.store().get<WorkRecord>(wid).work.status == WorkStatus::kSubFinished);
  // no work Finished
  CHECK(rt.store().get<RequestRecord>(id).status == RequestStatus::kFailed);
}

TEST_CASE("run_pipeline: real-time threads reach terminal and shut down promptly") {
  RuntimeOptions opts;
  opts.virtual_time = false;
  opts.pipeline.base.poll_interval = 10;
  Runtime rt(opts);
  rt.backends().set_default(std::make_shared<InstantDdm>(InstantDdmConfig{3, 1}),
                            std::make_shared<InstantWfm>(rt.clock()));
  const auto id = rt.submit(one_template());
  rt.start();
  const auto t0 = std::chrono::steady_clock::now();
  while (!is_terminal(rt.store().get<RequestRecord>(id).status) &&
         std::chrono::steady_clock::now() - t0 < std::chrono::seconds(10)) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  CHECK(rt.store().get<RequestRecord>(id).status == RequestStatus::kFinished);
  const auto s0 = std::chrono::steady_clock::now();
  rt.stop();
  CHECK(std::chrono::steady_clock::now() - s0 < std::chrono::seconds(2));
  CHECK_FALSE(rt.running());
  // leases released on the way out
  for (const auto& w : rt.store().list<WorkRecord>()) CHECK_FALSE(rt.store().lease_holder<WorkRecord>(w.work.work_id));
}

TEST_CASE("determinism: equal seeds give identical audits") {
  ScenarioConfig s;
  s.tape.files = generate_files(30, 1000, 5000, 3);
  s.tape.files_per_second = 2;
  s.tape.seed = 5;
  s.compute.workers = 3;
  s.compute.failure_rate = 0.2;
  s.compute.seed = 8;
  for (const auto& policy : {parse_policy("file-level"), parse_policy("dataset-level")}) {
    const auto a = run_carousel(s, policy);
    const auto b = run_carousel(s, policy);
    CHECK(a.completed);
    CHECK(a.audit == b.audit);
  }
}

TEST_CASE("incremental release: availability follows staging file by file") {
  ScenarioConfig s;
  s.tape.files = generate_files(10, 100, 100, 1);
  for (std::size_t i = 0; i < s.tape.files.size(); ++i) {
    s.tape.stage_schedule[s.tape.files[i].name] = static_cast<Millis>(i + 1) * 5000;
  }
  s.compute.workers = 2;
  const auto run = run_carousel(s, parse_policy("file-level"));
  REQUIRE(run.completed);
  for (const auto& c : run.inputs) {
    const Millis staged = s.tape.stage_schedule.at(c.name);
    CHECK(c.staged_at >= staged);
    // released before the next file lands
    CHECK(c.started_at < staged + 5000);
  }
}
