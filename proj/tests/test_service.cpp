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


#include <set>
#include <sstream>
#include <thread>

#include "carousel.hpp"
#include "dag.hpp"
#include "deploy.hpp"
#include "doctest.h"
#include "http.hpp"
#include "service.hpp"

using namespace dds;

namespace {

constexpr std::int64_t kGB = 1'000'000'000;

DeploymentConfig three_file_deployment() {
  DeploymentConfig dc;
  auto& s = dc.scenario;
  s.tape.files = {{"f1", kGB, {}}, {"f2", kGB, {}}, {"f3", kGB, {}}};
  s.tape.stage_schedule = {{"f1", 1000}, {"f2", 2000}, {"f3", 3000}};
  s.compute.workers = 1;
  s.compute.per_file_processing_time = 1000;
  s.compute.input_wait_timeout = 1000;
  return dc;
}

struct Fixture {
  std::unique_ptr<Runtime> rt = make_runtime(three_file_deployment());
  Service svc{*rt, {{"good", "alice", 0}, {"old", "bob", 1}}};

  ApiResponse call(const std::string& method, const std::string& path, const std::string& body = {},
                   const std::string& token = "good", std::map<std::string, std::string> query = {},
                   const std::string& key = {}) {
    ApiRequest r;
    r.method = method;
    r.path = path;
    r.body = body;
    r.query = std::move(query);
    if (!token.empty()) r.headers["authorization"] = "Bearer " + token;
    if (!key.empty()) r.headers["idempotency-key"] = key;
    return svc.handle(r);
  }

  std::string submit(const Workflow& wf) {
    const auto r = call("POST", "/requests", render_wire_request({wf, ""}));
    REQUIRE(r.status == 201);
    return Json::parse(r.body)["request_id"];
  }

  std::map<std::string, std::int64_t> metrics() {
    std::map<std::string, std::int64_t> out;
    std::istringstream in(svc.metrics_text());
    std::string name;
    std::int64_t v;
    while (in >> name >> v) out[name] = v;
    return out;
  }
};

std::string active_learning_doc() { return render_wire_request({build_active_learning({}), "ml"}); }

}  // namespace

TEST_CASE("submit: 201, stored New, untouched without daemons") {
  Fixture f;
  const auto r = f.call("POST", "/requests", active_learning_doc());
  CHECK(r.status == 201);
  const std::string id = Json::parse(r.body)["request_id"];
  CHECK(f.rt->store().count<RequestRecord>() == 1);
  const auto rec = f.rt->store().get<RequestRecord>(id);
  CHECK(rec.status == RequestStatus::kNew);
  CHECK(rec.requester == "alice");
  CHECK(rec.consumer == "ml");
  // Time passes, nothing runs the pipeline.
  f.rt->virtual_clock()->advance_to(3'600'000);
  const auto g = f.call("GET", "/requests/" + id);
  CHECK(g.status == 200);
  const Json j = Json::parse(g.body);
  CHECK(j["status"] == "New");
  CHECK(j["works"]["total"] == 0);
  CHECK(j["work_list"].empty());
}

TEST_CASE("submit: schema violations are 400 with details") {
  Fixture f;
  Json doc = Json::parse(active_learning_doc());
  doc["foo"] = 1;
  auto r = f.call("POST", "/requests", doc.dump());
  CHECK(r.status == 400);
  CHECK(Json::parse(r.body).contains("code"));
  r = f.call("POST", "/requests", "{not json");
  CHECK(r.status == 400);
  Workflow bad = build_active_learning({});
  bad.conditions[0].destinations[0].template_name = "X";
  r = f.call("POST", "/requests", render_wire_request({bad, ""}));
  CHECK(r.status == 400);
  CHECK_FALSE(Json::parse(r.body)["details"].empty());
  CHECK(f.rt->store().count<RequestRecord>() == 0);
  CHECK(f.metrics()["requests_rejected"] == 3);
}

TEST_CASE("auth: every endpoint needs a live token") {
  Fixture f;
  const std::string id = f.submit(build_active_learning({}));
  const std::vector<std::pair<std::string, std::string>> probes = {
      {"POST", "/requests"},
      {"GET", "/requests/" + id},
      {"GET", "/requests/" + id + "/collections"},
      {"GET", "/collections/" + id + "%2Fx/contents"},
      {"GET", "/hpo/" + id + "/points"},
      {"POST", "/hpo/points/p/loss"},
      {"POST", "/hpo/points/p/failure"},
      {"GET", "/schema"},
  };
  for (const auto& [method, path] : probes) {
    CAPTURE(path);
    CHECK(f.call(method, path, active_learning_doc(), "").status == 401);
    CHECK(f.call(method, path, active_learning_doc(), "old").status == 401);
    CHECK(f.call(method, path, active_learning_doc(), "nope").status == 401);
  }
  CHECK(f.rt->store().count<RequestRecord>() == 1);
}

TEST_CASE("lookups: unknown ids are 404") {
  Fixture f;
  CHECK(f.call("GET", "/requests/req-424242").status == 404);
  CHECK(f.call("GET", "/requests/req-424242/collections").status == 404);
  CHECK(f.call("GET", "/collections/nope/contents").status == 404);
  CHECK(f.call("GET", "/nowhere").status == 404);
}

TEST_CASE("idempotency key") {
  Fixture f;
  const auto a = f.call("POST", "/requests", active_learning_doc(), "good", {}, "k1");
  CHECK(a.status == 201);
  const auto b = f.call("POST", "/requests", active_learning_doc(), "good", {}, "k1");
  CHECK(b.status == 200);
  CHECK(Json::parse(b.body)["request_id"] == Json::parse(a.body)["request_id"]);
  Workflow other = build_active_learning({});
  other.name = "other";
  CHECK(f.call("POST", "/requests", render_wire_request({other, ""}), "good", {}, "k1").status == 409);
  CHECK(f.rt->store().count<RequestRecord>() == 1);
}

TEST_CASE("carousel request: listings, filters, pages, counters") {
  Fixture f;
  const std::string id = f.submit(build_carousel_workflow("data", parse_policy("file-level")));
  std::string in_id;
  // Mid-run the collection counters agree with the rows.
  f.rt->run_until([&] { return f.rt->clock().now() >= 2500; }, 3'600'000);
  {
    const Json cols = Json::parse(f.call("GET", "/requests/" + id + "/collections", {}, "good", {{"kind", "Input"}}).body);
    REQUIRE(cols["items"].size() == 1);
    in_id = cols["items"][0]["collection_id"];
    const auto avail = cols["items"][0]["available_contents"].get<std::int64_t>();
    CHECK(avail >= 0);
    CHECK(avail <= 3);
    const Json rows = Json::parse(f.call("GET", "/collections/" + in_id + "/contents", {}, "good", {{"status", "Available,Delivered"}}).body);
    CHECK(static_cast<std::int64_t>(rows["items"].size()) == avail);
  }
  REQUIRE(f.rt->run_until_terminal(id, 3'600'000));
  const Json req = Json::parse(f.call("GET", "/requests/" + id).body);
  CHECK(req["status"] == "Finished");
  CHECK(req["works"]["total"] == 1);
  for (const auto& w : req["work_list"]) CHECK(w["status"] == "Finished");

  const Json cols = Json::parse(f.call("GET", "/requests/" + id + "/collections").body);
  CHECK(cols["items"].size() == 2);
  const Json done = Json::parse(f.call("GET", "/collections/" + in_id + "/contents", {}, "good", {{"status", "Processed"}}).body);
  REQUIRE(done["items"].size() == 3);
  for (const auto& c : done["items"]) {
    CHECK(c["attempt_count"] == 1);
    CHECK(c["size_bytes"] == kGB);
  }
  const Json p1 = Json::parse(f.call("GET", "/collections/" + in_id + "/contents", {}, "good", {{"page_size", "2"}}).body);
  CHECK(p1["items"].size() == 2);
  REQUIRE(p1["next_cursor"].is_string());
  const Json p2 = Json::parse(f.call("GET", "/collections/" + in_id + "/contents", {}, "good",
                                     {{"page_size", "2"}, {"cursor", p1["next_cursor"].get<std::string>()}}).body);
  CHECK(p2["items"].size() == 1);
  CHECK(p2["next_cursor"].is_null());
  CHECK(f.call("GET", "/collections/" + in_id + "/contents", {}, "good", {{"status", "Bogus"}}).status == 400);
  CHECK(f.call("GET", "/collections/" + in_id + "/contents", {}, "good", {{"page_size", "0"}}).status == 400);
}

TEST_CASE("metrics: zero when fresh, monotone, counts finished requests") {
  Fixture f;
  for (const auto& [name, v] : f.metrics()) {
    CAPTURE(name);
    CHECK(v == 0);
  }
  const std::string id = f.submit(build_carousel_workflow("data", parse_policy("file-level")));
  auto last = f.metrics();
  for (int i = 0; i < 20 && !is_terminal(f.rt->store().get<RequestRecord>(id).status); ++i) {
    f.rt->run_until([&, t = f.rt->clock().now() + 500] { return f.rt->clock().now() >= t; }, 3'600'000);
    const auto now = f.metrics();
    for (const auto& [name, v] : now) CHECK(v >= last[name]);
    last = now;
  }
  f.rt->run_until_terminal(id, 3'600'000);
  CHECK(f.metrics()["requests_finished"] == 1);
}

TEST_CASE("concurrent submissions get distinct ids") {
  Fixture f;
  std::vector<std::string> ids(64);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 16; ++i) {
        const auto r = f.call("POST", "/requests", active_learning_doc());
        ids[static_cast<std::size_t>(t * 16 + i)] = Json::parse(r.body).value("request_id", "");
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == 64);
  CHECK(f.rt->store().count<RequestRecord>() == 64);
}

TEST_CASE("http: server and client end to end") {
  auto dc = three_file_deployment();
  dc.wall_tick = 2;
  auto rt = make_runtime(dc);
  Service svc(*rt, {{"good", "alice", 0}});
  HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  server.start();
  rt->start();
  HttpClient client("http://127.0.0.1:" + std::to_string(port), "good");
  const auto sub = client.request("POST", "/requests",
                                  render_wire_request({build_carousel_workflow("data", parse_policy("file-level")), ""}));
  REQUIRE(sub.status == 201);
  const std::string id = Json::parse(sub.body)["request_id"];
  std::string status;
  for (int i = 0; i < 500 && status != "Finished"; ++i) {
    status = Json::parse(client.request("GET", "/requests/" + id).body)["status"];
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  CHECK(status == "Finished");
  const Json cols = Json::parse(client.request("GET", "/requests/" + id + "/collections").body);
  const std::string in_id = cols["items"][0]["collection_id"];
  const auto contents = client.request("GET", url_encode_path("/collections/" + in_id + "/contents"));
  CHECK(contents.status == 200);
  CHECK(Json::parse(contents.body)["items"].size() == 3);
  HttpClient anon("http://127.0.0.1:" + std::to_string(port), "");
  CHECK(anon.request("GET", "/requests/" + id).status == 401);
  CHECK(anon.request("GET", "/metrics").status == 200);
  rt->stop();
  server.stop();
  HttpClient gone("http://127.0.0.1:" + std::to_string(port), "good");
  CHECK_THROWS_AS(gone.request("GET", "/requests/" + id), Error);
}
