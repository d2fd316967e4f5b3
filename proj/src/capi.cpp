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

#include "dds/dds.h"

#include <cstring>
#include <memory>
#include <sstream>
#include <string>

#include "carousel.hpp"
#include "dag.hpp"
#include "deploy.hpp"
#include "hpo.hpp"
#include "http.hpp"
#include "json_util.hpp"
#include "shorthand.hpp"
#include "wire.hpp"

struct dds_client {
  std::unique_ptr<dds::HttpClient> http;
};

struct dds_server {
  dds::DeploymentConfig config;
  std::unique_ptr<dds::Runtime> runtime;
  std::unique_ptr<dds::Service> service;
  std::unique_ptr<dds::HttpServer> http;
};

namespace {

using dds::ErrorCode;

thread_local std::string last_error;

dds_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return DDS_E_INVALID_ARGUMENT;
    case ErrorCode::kParse: return DDS_E_PARSE;
    case ErrorCode::kValidation:
    case ErrorCode::kMissingBinding:
    case ErrorCode::kTypeMismatch:
    case ErrorCode::kExhaustedSpace:
    case ErrorCode::kCyclicJobGraph:
    case ErrorCode::kDanglingDependency:
      return DDS_E_VALIDATION;
    case ErrorCode::kNotFound:
    case ErrorCode::kUnknownPoint:
      return DDS_E_NOT_FOUND;
    case ErrorCode::kConflict:
    case ErrorCode::kConflictingLoss:
    case ErrorCode::kStaleTransition:
    case ErrorCode::kIllegalTransition:
      return DDS_E_CONFLICT;
    case ErrorCode::kUnauthorized: return DDS_E_UNAUTHORIZED;
    case ErrorCode::kBackendUnavailable: return DDS_E_UNAVAILABLE;
    default: return DDS_E_INTERNAL;
  }
}

template <class F>
dds_status guarded(F&& body) {
  last_error.clear();
  try {
    body();
    return DDS_OK;
  } catch (const dds::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::parse_error& e) {
    last_error = e.what();
    return DDS_E_PARSE;
  } catch (const std::exception& e) {
    last_error = e.what();
    return DDS_E_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw dds::Error(ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

char* copy_out(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

dds::Json parse(const char* text) { return dds::Json::parse(text); }

dds::ScenarioConfig scenario(const char* text) { return dds::scenario_from_json(parse(text)); }

dds::Json metrics_json(const dds::CarouselMetrics& m) {
  dds::Json hist = dds::Json::object();
  for (const auto& [a, n] : m.attempts_histogram) hist[std::to_string(a)] = n;
  return {{"policy", m.policy},
          {"status", m.request_status},
          {"jobs", m.jobs},
          {"mean_attempts", m.mean_attempts},
          {"attempts_histogram", hist},
          {"peak_disk_bytes", m.peak_disk_bytes},
          {"disk_byte_seconds", m.disk_byte_seconds},
          {"makespan_ms", m.makespan},
          {"time_to_first_processing_ms", m.time_to_first_processing},
          {"bytes_total", m.bytes_total},
          {"bytes_staged", m.bytes_staged},
          {"bytes_processed", m.bytes_processed},
          {"bytes_failed", m.bytes_failed}};
}

dds::Json comparison_json(const dds::PolicyComparison& c) {
  dds::Json rows = dds::Json::array();
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    dds::Json r = metrics_json(c.rows[i]);
    r["peak_ratio"] = c.peak_ratio[i];
    r["byte_seconds_ratio"] = c.byte_seconds_ratio[i];
    r["mean_attempts_ratio"] = c.mean_attempts_ratio[i];
    rows.push_back(std::move(r));
  }
  return {{"rows", rows},
          {"metrics_csv", dds::comparison_csv(c)},
          {"histogram_csv", dds::histogram_csv(c.rows)},
          {"series_csv", dds::disk_series_csv(c.rows)}};
}

}  // namespace

extern "C" {

DDS_API const char* dds_version(void) { return "1.0.0"; }

DDS_API const char* dds_last_error(void) { return last_error.c_str(); }

DDS_API const char* dds_status_name(dds_status status) {
  switch (status) {
    case DDS_OK: return "OK";
    case DDS_E_INVALID_ARGUMENT: return "InvalidArgument";
    case DDS_E_PARSE: return "Parse";
    case DDS_E_VALIDATION: return "Validation";
    case DDS_E_NOT_FOUND: return "NotFound";
    case DDS_E_CONFLICT: return "Conflict";
    case DDS_E_UNAUTHORIZED: return "Unauthorized";
    case DDS_E_UNAVAILABLE: return "Unavailable";
    case DDS_E_INTERNAL: return "Internal";
  }
  return "Unknown";
}

DDS_API void dds_free(char* str) { std::free(str); }

DDS_API dds_status dds_wire_canonicalize(const char* json, char** out) {
  return guarded([&] {
    require(json, "json");
    require(out, "out");
    *out = copy_out(dds::render_wire_request(dds::parse_wire_request(json)));
  });
}

DDS_API dds_status dds_wire_validate(const char* json, char** report) {
  return guarded([&] {
    require(json, "json");
    require(report, "report");
    const auto request = dds::parse_wire_request(json);
    *report = copy_out(dds::validate_workflow(request.workflow).to_json().dump());
  });
}

DDS_API dds_status dds_expand_request(const char* json, char** wire) {
  return guarded([&] {
    require(json, "json");
    require(wire, "wire");
    *wire = copy_out(dds::render_wire_request(dds::expand_request(parse(json))));
  });
}

DDS_API dds_status dds_dag_ingest(const char* graph_json, const char* name, char** wire) {
  return guarded([&] {
    require(graph_json, "graph_json");
    require(wire, "wire");
    const auto graph = dds::job_graph_from_json(parse(graph_json));
    dds::WireRequest request{dds::ingest_job_graph(graph, name ? name : "dag"), "cli"};
    *wire = copy_out(dds::render_wire_request(request));
  });
}

DDS_API dds_status dds_carousel_run(const char* scenario_json, const char* policy, char** result) {
  return guarded([&] {
    require(scenario_json, "scenario_json");
    require(policy, "policy");
    require(result, "result");
    const auto s = scenario(scenario_json);
    const auto run = dds::run_carousel(s, dds::parse_policy(policy));
    dds::PolicyComparison single;
    single.rows = {run.metrics};
    single.peak_ratio = single.byte_seconds_ratio = single.mean_attempts_ratio = {1.0};
    dds::Json out = comparison_json(single);
    out["completed"] = run.completed;
    *result = copy_out(out.dump());
  });
}

DDS_API dds_status dds_carousel_compare(const char* scenario_json, const char* policies,
                                        char** result) {
  return guarded([&] {
    require(scenario_json, "scenario_json");
    require(policies, "policies");
    require(result, "result");
    std::vector<dds::CarouselPolicy> list;
    std::stringstream ss(policies);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (!name.empty()) list.push_back(dds::parse_policy(name));
    }
    *result = copy_out(comparison_json(dds::compare_policies(scenario(scenario_json), list)).dump());
  });
}

DDS_API dds_status dds_hpo_run(const char* task_json, const char* options_json, char** result) {
  return guarded([&] {
    using namespace dds::json_util;
    require(task_json, "task_json");
    require(result, "result");
    const dds::HpoTaskSpec spec = dds::hpo_spec_from_json(parse(task_json));
    dds::validate(spec);
    dds::HpoRunOptions options;
    if (options_json != nullptr) {
      const dds::Json o = parse(options_json);
      const std::string p = "options";
      expect_object(o, p, {"center", "min_delay", "max_delay", "loss_rate", "seed"});
      if (const auto* v = field(o, "center")) options.objective = dds::quadratic_objective(get_number(*v, p + ".center"));
      if (const auto* v = field(o, "min_delay")) options.evaluator.min_delay = std::llround(get_number(*v, p) * 1000);
      if (const auto* v = field(o, "max_delay")) options.evaluator.max_delay = std::llround(get_number(*v, p) * 1000);
      if (const auto* v = field(o, "loss_rate")) options.evaluator.loss_rate = get_number(*v, p + ".loss_rate");
      if (const auto* v = field(o, "seed")) {
        options.evaluator.seed = static_cast<std::uint64_t>(get_int(*v, p + ".seed"));
        options.evaluator.order_seed = options.evaluator.seed;
      }
    }
    const dds::HpoResult r = dds::run_hpo(spec, options);
    dds::Json best = nullptr;
    if (r.best_point) {
      best = {{"point_id", r.best_point->point_id},
              {"values", r.best_point->values},
              {"iteration", r.best_point->iteration},
              {"loss", *r.best_point->loss}};
    }
    dds::Json out = {{"status", r.status},
                     {"request_status", r.request_status},
                     {"best_point", best},
                     {"best_loss", r.best_loss ? dds::Json(*r.best_loss) : dds::Json(nullptr)},
                     {"iterations", r.iterations},
                     {"points", r.points.size()},
                     {"evaluations", r.trace.size()},
                     {"trace", r.trace}};
    *result = copy_out(out.dump());
  });
}

DDS_API dds_status dds_client_open(const char* server_url, const char* token, dds_client** out) {
  return guarded([&] {
    require(server_url, "server_url");
    require(out, "out");
    auto c = std::make_unique<dds_client>();
    c->http = std::make_unique<dds::HttpClient>(server_url, token ? token : "");
    *out = c.release();
  });
}

DDS_API void dds_client_close(dds_client* client) { delete client; }

DDS_API dds_status dds_client_call(dds_client* client, const char* method, const char* path,
                                   const char* body, const char* idempotency_key,
                                   int* http_status, char** response) {
  return guarded([&] {
    require(client, "client");
    require(method, "method");
    require(path, "path");
    require(http_status, "http_status");
    require(response, "response");
    const auto r = client->http->request(method, path, body ? body : "",
                                         idempotency_key ? idempotency_key : "");
    *http_status = r.status;
    *response = copy_out(r.body);
  });
}

DDS_API dds_status dds_server_create(const char* deployment_json, dds_server** out) {
  return guarded([&] {
    require(out, "out");
    auto s = std::make_unique<dds_server>();
    if (deployment_json != nullptr) s->config = dds::deployment_from_json(parse(deployment_json));
    std::vector<dds::ApiToken> tokens;
    if (!s->config.tokens_file.empty()) tokens = dds::load_token_file(s->config.tokens_file);
    s->runtime = dds::make_runtime(s->config);
    s->service = std::make_unique<dds::Service>(*s->runtime, std::move(tokens));
    s->http = std::make_unique<dds::HttpServer>(*s->service);
    *out = s.release();
  });
}

DDS_API dds_status dds_server_listen(dds_server* server, const char* host, int port,
                                     int* bound_port) {
  return guarded([&] {
    require(server, "server");
    require(host, "host");
    const int p = server->http->bind(host, port);
    if (bound_port) *bound_port = p;
    server->runtime->start();
    server->http->start();
  });
}

DDS_API void dds_server_stop(dds_server* server) {
  if (server == nullptr) return;
  server->http->stop();
  server->runtime->stop();
}

DDS_API void dds_server_destroy(dds_server* server) {
  if (server == nullptr) return;
  dds_server_stop(server);
  delete server;
}

}  // extern "C"
