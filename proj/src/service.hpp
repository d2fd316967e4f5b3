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

// Process wiring (clock, store, backends, transport, daemons) and the head
// service: request intake, lookups, metrics and the evaluator protocol.
//
// Service::handle is transport-agnostic; server.cpp maps HTTP onto it. The
// head service never steps the pipeline: without running daemons a
// submitted request stays New.

#ifndef DDS_SRC_SERVICE_HPP_
#define DDS_SRC_SERVICE_HPP_

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "backends.hpp"
#include "daemons.hpp"
#include "store.hpp"
#include "transport.hpp"
#include "wire.hpp"

namespace dds {

struct RuntimeOptions {
  bool virtual_time = true;
  Millis t0 = 0;
  StoreOptions store;
  PipelineConfig pipeline;
  LogSink log;
  // Virtual time under start(): wall milliseconds per scheduler cycle.
  Millis wall_tick = 20;
};

// Owns one deployment's moving parts. Backends are registered by the
// caller before the pipeline runs.
class Runtime {
 public:
  explicit Runtime(RuntimeOptions options = {});
  ~Runtime();

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  Clock& clock() { return *clock_; }
  // Null in real-time mode.
  VirtualClock* virtual_clock() { return virtual_clock_; }
  Store& store() { return *store_; }
  BackendRegistry& backends() { return backends_; }
  InMemoryTransport& transport() { return transport_; }
  PipelineStats& stats() { return stats_; }
  Pipeline& pipeline() { return *pipeline_; }
  PipelineContext context();
  const RuntimeOptions& options() const { return options_; }

  // Inserts a New request the way the head service does. Returns its id.
  std::string submit(const WireRequest& request, const std::string& requester = "local");

  // Virtual time: drives the daemons until `done` or the virtual deadline.
  // Real time: waits for the background daemons (see start()).
  bool run_until(const std::function<bool()>& done, Millis deadline);
  bool run_until_terminal(const std::string& request_id, Millis deadline);
  std::int64_t cycles() const { return runner_ ? runner_->cycles() : 0; }

  // Background execution until stop(): one thread per daemon on real time,
  // an accelerated scheduler thread on virtual time.
  void start();
  void stop();
  bool running() const { return worker_.joinable(); }

 private:
  RuntimeOptions options_;
  std::unique_ptr<Clock> clock_;
  VirtualClock* virtual_clock_ = nullptr;
  std::unique_ptr<Store> store_;
  BackendRegistry backends_;
  InMemoryTransport transport_;
  PipelineStats stats_;
  std::unique_ptr<Pipeline> pipeline_;
  std::unique_ptr<VirtualRunner> runner_;
  std::jthread worker_;
  std::mutex submit_mu_;
};

std::string next_request_id(const Store& store);

struct ApiToken {
  std::string token;
  std::string subject;
  // Milliseconds since the epoch; 0 never expires.
  Millis expiry = 0;
};

// Whitespace-separated "token subject expiry_ms" lines; '#' starts a
// comment. Throws Error(kParse).
std::vector<ApiToken> parse_token_file(std::string_view text);
std::vector<ApiToken> load_token_file(const std::string& path);

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  // Lower-case header names.
  std::map<std::string, std::string> headers;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

inline constexpr std::size_t kDefaultPageSize = 100;
inline constexpr std::size_t kMaxPageSize = 1000;

class Service {
 public:
  // `auth_clock` judges token expiry (wall time by default, also when the
  // runtime itself runs on virtual time).
  Service(Runtime& runtime, std::vector<ApiToken> tokens, const Clock* auth_clock = nullptr);

  ApiResponse handle(const ApiRequest& request);

  // Plain-text counters, one "name value" line each; all monotone.
  std::string metrics_text() const;

 private:
  std::string authenticate(const ApiRequest& request) const;
  ApiResponse submit(const ApiRequest& request, const std::string& subject);
  ApiResponse get_request(const std::string& id);
  ApiResponse list_collections(const ApiRequest& request, const std::string& id);
  ApiResponse list_contents(const ApiRequest& request, const std::string& cid);
  ApiResponse hpo_points(const ApiRequest& request, const std::string& task);
  ApiResponse hpo_loss(const ApiRequest& request, const std::string& point);
  ApiResponse hpo_failure(const std::string& point);

  Runtime& runtime_;
  std::map<std::string, ApiToken> tokens_;
  RealClock wall_;
  const Clock* auth_clock_;
  std::atomic<std::int64_t> submitted_{0};
  std::atomic<std::int64_t> rejected_{0};
  std::atomic<std::int64_t> http_requests_{0};
  std::mutex submit_mu_;
};

// {code, message, details}
ApiResponse error_response(const Error& e, Json details = Json::array());
int http_status(ErrorCode code);

Json request_summary(const Store& store, const RequestRecord& r);
Json collection_to_api(const Collection& c);
Json content_to_api(const Content& c);

}  // namespace dds

#endif  // DDS_SRC_SERVICE_HPP_
