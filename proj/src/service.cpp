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

#include "service.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "hpo.hpp"

namespace dds {

Runtime::Runtime(RuntimeOptions options) : options_(std::move(options)) {
  if (options_.virtual_time) {
    auto vc = std::make_unique<VirtualClock>(options_.t0);
    virtual_clock_ = vc.get();
    clock_ = std::move(vc);
  } else {
    clock_ = std::make_unique<RealClock>();
  }
  store_ = std::make_unique<Store>(*clock_, options_.store);
  pipeline_ = std::make_unique<Pipeline>(context(), options_.pipeline);
  if (virtual_clock_) runner_ = std::make_unique<VirtualRunner>(*pipeline_, *virtual_clock_, backends_);
}

Runtime::~Runtime() { stop(); }

PipelineContext Runtime::context() {
  return {store_.get(), &backends_, &transport_, &stats_, options_.log};
}

std::string next_request_id(const Store& store) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "req-%06zu", store.count<RequestRecord>() + 1);
  return buf;
}

std::string Runtime::submit(const WireRequest& request, const std::string& requester) {
  std::lock_guard lock(submit_mu_);
  RequestRecord r;
  r.requester = requester;
  r.workflow = render_workflow(request.workflow);
  r.consumer = request.consumer.empty() ? requester : request.consumer;
  r.created_at = clock_->now();
  r.updated_at = r.created_at;
  for (;;) {
    r.request_id = next_request_id(*store_);
    if (store_->insert_if_absent(r)) return r.request_id;
  }
}

bool Runtime::run_until(const std::function<bool()>& done, Millis deadline) {
  if (runner_ && !running()) return runner_->run_until(done, deadline);
  while (!done()) {
    if (clock_->now() >= deadline) return false;
    if (!running()) pipeline_->step_all();
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return true;
}

bool Runtime::run_until_terminal(const std::string& request_id, Millis deadline) {
  return run_until(
      [&] {
        const auto r = store_->find<RequestRecord>(request_id);
        return r && is_terminal(r->status);
      },
      deadline);
}

void Runtime::start() {
  if (running()) return;
  if (!virtual_clock_) {
    worker_ = std::jthread([this](std::stop_token st) { run_pipeline(context(), options_.pipeline, st); });
    return;
  }
  // Accelerated simulation: every wall tick, settle the pipeline and jump
  // to the next backend event (at most one poll interval ahead).
  worker_ = std::jthread([this](std::stop_token st) {
    const Millis poll = options_.pipeline.base.poll_interval;
    while (!st.stop_requested()) {
      pipeline_->run_until_quiescent(10'000);
      const Millis now = virtual_clock_->now();
      Millis next = now + poll;
      if (auto t = backends_.next_event(now); t && *t > now && *t < next) next = *t;
      std::this_thread::sleep_for(std::chrono::milliseconds(options_.wall_tick));
      virtual_clock_->advance_to(next);
    }
  });
}

void Runtime::stop() {
  if (!worker_.joinable()) return;
  worker_.request_stop();
  worker_.join();
}

// ---------------------------------------------------------------------------

std::vector<ApiToken> parse_token_file(std::string_view text) {
  std::vector<ApiToken> tokens;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    ApiToken t;
    std::string expiry;
    if (!(fields >> t.token)) continue;
    std::string extra;
    if (!(fields >> t.subject >> expiry) || (fields >> extra)) {
      throw Error(ErrorCode::kParse, "token file line " + std::to_string(lineno) +
                                         ": expected 'token subject expiry_ms'");
    }
    try {
      std::size_t used = 0;
      t.expiry = std::stoll(expiry, &used);
      if (used != expiry.size() || t.expiry < 0) throw std::invalid_argument(expiry);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParse,
                  "token file line " + std::to_string(lineno) + ": bad expiry '" + expiry + "'");
    }
    tokens.push_back(std::move(t));
  }
  return tokens;
}

std::vector<ApiToken> load_token_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot read token file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_token_file(ss.str());
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kParse:
    case ErrorCode::kValidation:
    case ErrorCode::kMissingBinding:
    case ErrorCode::kTypeMismatch:
      return 400;
    case ErrorCode::kUnauthorized:
      return 401;
    case ErrorCode::kNotFound:
    case ErrorCode::kUnknownPoint:
      return 404;
    case ErrorCode::kConflict:
    case ErrorCode::kConflictingLoss:
    case ErrorCode::kStaleTransition:
      return 409;
    case ErrorCode::kBackendUnavailable:
      return 503;
    default:
      return 500;
  }
}

ApiResponse error_response(const Error& e, Json details) {
  ApiResponse r;
  r.status = http_status(e.code());
  r.body = Json{{"code", to_string(e.code())}, {"message", e.what()}, {"details", std::move(details)}}.dump();
  return r;
}

namespace {

ApiResponse json_response(int status, const Json& body) {
  ApiResponse r;
  r.status = status;
  r.body = body.dump();
  return r;
}

std::size_t page_size(const ApiRequest& req) {
  auto it = req.query.find("page_size");
  if (it == req.query.end()) return kDefaultPageSize;
  const std::string& v = it->second;
  if (v.empty() || v.size() > 6 || !std::all_of(v.begin(), v.end(), ::isdigit)) {
    throw Error(ErrorCode::kInvalidArgument, "page_size must be a positive integer");
  }
  const auto n = std::stoull(v);
  if (n == 0 || n > kMaxPageSize) {
    throw Error(ErrorCode::kInvalidArgument,
                "page_size must be within 1.." + std::to_string(kMaxPageSize));
  }
  return n;
}

std::string query_value(const ApiRequest& req, const std::string& key) {
  auto it = req.query.find(key);
  return it == req.query.end() ? std::string() : it->second;
}

template <class Row>
Json page(const Store& store, Query<Row> q, const ApiRequest& req, Json (*render)(const Row&)) {
  q.after_id = query_value(req, "cursor");
  q.limit = page_size(req) + 1;
  auto rows = store.list(q);
  Json items = Json::array();
  Json next = nullptr;
  if (rows.size() > page_size(req)) {
    rows.pop_back();
    next = RowTraits<Row>::id(rows.back());
  }
  for (const auto& r : rows) items.push_back(render(r));
  return {{"items", items}, {"next_cursor", next}};
}

Json point_to_api(const TrialPoint& p) {
  Json j = {{"point_id", p.point_id},
            {"values", p.values},
            {"status", to_string(p.status)},
            {"iteration", p.iteration},
            {"loss", nullptr}};
  if (p.loss) j["loss"] = *p.loss;
  return j;
}

}  // namespace

Json collection_to_api(const Collection& c) {
  return {{"collection_id", c.collection_id},
          {"request_id", c.request_id},
          {"work_id", c.work_id},
          {"scope", c.scope},
          {"name", c.name},
          {"kind", to_string(c.kind)},
          {"status", to_string(c.status)},
          {"total_contents", c.total_contents},
          {"available_contents", c.available_contents},
          {"processed_contents", c.processed_contents}};
}

Json content_to_api(const Content& c) {
  return {{"content_id", c.content_id},
          {"collection_id", c.collection_id},
          {"name", c.name},
          {"status", to_string(c.status)},
          {"size_bytes", c.size_bytes},
          {"attempt_count", c.attempt_count},
          {"staged_at", c.staged_at},
          {"started_at", c.started_at},
          {"finished_at", c.finished_at},
          {"released_at", c.released_at}};
}

Json request_summary(const Store& store, const RequestRecord& r) {
  Query<WorkRecord> q;
  q.owner = r.request_id;
  const auto works = store.list(q);
  Json by_status = Json::object();
  Json list = Json::array();
  for (const auto& w : works) {
    const std::string s(to_string(w.work.status));
    by_status[s] = by_status.value(s, 0) + 1;
    Json metrics = Json::object();
    for (const auto& [k, v] : w.work.output_metrics) metrics[k] = v;
    list.push_back({{"work_id", w.work.work_id},
                    {"template", w.work.template_name},
                    {"status", s},
                    {"generation", w.work.generation},
                    {"metrics", metrics}});
  }
  Json report = nullptr;
  if (!r.report.empty()) report = Json::parse(r.report, nullptr, false);
  return {{"request_id", r.request_id},
          {"status", to_string(r.status)},
          {"requester", r.requester},
          {"consumer", r.consumer},
          {"created_at", r.created_at},
          {"updated_at", r.updated_at},
          {"degraded", r.degraded},
          {"report", report},
          {"works", {{"total", works.size()}, {"by_status", by_status}}},
          {"work_list", list}};
}

Service::Service(Runtime& runtime, std::vector<ApiToken> tokens, const Clock* auth_clock)
    : runtime_(runtime), auth_clock_(auth_clock ? auth_clock : &wall_) {
  for (auto& t : tokens) tokens_[t.token] = std::move(t);
}

std::string Service::authenticate(const ApiRequest& req) const {
  auto it = req.headers.find("authorization");
  const std::string prefix = "Bearer ";
  if (it == req.headers.end() || it->second.rfind(prefix, 0) != 0) {
    throw Error(ErrorCode::kUnauthorized, "missing bearer token");
  }
  auto t = tokens_.find(it->second.substr(prefix.size()));
  if (t == tokens_.end()) throw Error(ErrorCode::kUnauthorized, "invalid token");
  if (t->second.expiry != 0 && t->second.expiry <= auth_clock_->now()) {
    throw Error(ErrorCode::kUnauthorized, "token expired");
  }
  return t->second.subject;
}

ApiResponse Service::handle(const ApiRequest& req) {
  http_requests_.fetch_add(1);
  static const std::regex request_re("^/requests/([^/]+)$");
  static const std::regex collections_re("^/requests/([^/]+)/collections$");
  static const std::regex contents_re("^/collections/(.+)/contents$");
  static const std::regex points_re("^/hpo/([^/]+)/points$");
  static const std::regex loss_re("^/hpo/points/(.+)/loss$");
  static const std::regex failure_re("^/hpo/points/(.+)/failure$");
  std::smatch m;
  try {
    if (req.method == "GET" && req.path == "/metrics") {
      ApiResponse r;
      r.content_type = "text/plain";
      r.body = metrics_text();
      return r;
    }
    const bool known =
        req.path == "/requests" || req.path == "/schema" || std::regex_match(req.path, m, request_re) ||
        std::regex_match(req.path, m, collections_re) || std::regex_match(req.path, m, contents_re) ||
        std::regex_match(req.path, m, points_re) || std::regex_match(req.path, m, loss_re) ||
        std::regex_match(req.path, m, failure_re);
    if (!known) throw Error(ErrorCode::kNotFound, "no route for " + req.path);
    const std::string subject = authenticate(req);
    if (req.method == "POST" && req.path == "/requests") return submit(req, subject);
    if (req.method == "GET" && req.path == "/schema") {
      return json_response(200, {{"wire_version", kWireVersion},
                                 {"example", wire_request_to_json(WireRequest{})}});
    }
    if (req.method == "GET" && std::regex_match(req.path, m, request_re)) return get_request(m[1]);
    if (req.method == "GET" && std::regex_match(req.path, m, collections_re)) {
      return list_collections(req, m[1]);
    }
    if (req.method == "GET" && std::regex_match(req.path, m, contents_re)) {
      return list_contents(req, m[1]);
    }
    if (req.method == "GET" && std::regex_match(req.path, m, points_re)) return hpo_points(req, m[1]);
    if (req.method == "POST" && std::regex_match(req.path, m, loss_re)) return hpo_loss(req, m[1]);
    if (req.method == "POST" && std::regex_match(req.path, m, failure_re)) return hpo_failure(m[1]);
    ApiResponse r = error_response(Error(ErrorCode::kInvalidArgument, "method not allowed"));
    r.status = 405;
    return r;
  } catch (const Error& e) {
    return error_response(e);
  } catch (const std::exception& e) {
    return error_response(Error(ErrorCode::kInternal, e.what()));
  }
}

ApiResponse Service::submit(const ApiRequest& req, const std::string& subject) {
  WireRequest wire;
  try {
    wire = parse_wire_request(req.body);
  } catch (const Error& e) {
    rejected_.fetch_add(1);
    return error_response(e, Json::array({{{"kind", "schema"}, {"message", e.what()}}}));
  }
  if (const auto report = validate_workflow(wire.workflow); !report.ok()) {
    rejected_.fetch_add(1);
    return error_response(Error(ErrorCode::kValidation, "workflow is not well-formed"), report.to_json());
  }
  const std::string canonical = render_wire_request(wire);
  const std::string digest = hex64(fnv1a(canonical));
  std::string key;
  if (auto it = req.headers.find("idempotency-key"); it != req.headers.end()) key = it->second;

  Store& store = runtime_.store();
  std::lock_guard lock(submit_mu_);
  if (!key.empty()) {
    Query<RequestRecord> q;
    q.owner = subject;
    q.where = [&](const RequestRecord& r) { return r.idempotency_key == key; };
    q.limit = 1;
    const auto prior = store.list(q);
    if (!prior.empty()) {
      if (prior.front().body_digest != digest) {
        throw Error(ErrorCode::kConflict, "idempotency key reused with a different body");
      }
      return json_response(200, {{"request_id", prior.front().request_id}, {"duplicate", true}});
    }
  }
  RequestRecord r;
  r.requester = subject;
  r.workflow = render_workflow(wire.workflow);
  r.consumer = wire.consumer.empty() ? subject : wire.consumer;
  r.idempotency_key = key;
  r.body_digest = digest;
  r.created_at = runtime_.clock().now();
  r.updated_at = r.created_at;
  for (;;) {
    r.request_id = next_request_id(store);
    if (store.insert_if_absent(r)) break;
  }
  submitted_.fetch_add(1);
  return json_response(201, {{"request_id", r.request_id}});
}

ApiResponse Service::get_request(const std::string& id) {
  const auto r = runtime_.store().find<RequestRecord>(id);
  if (!r) throw Error(ErrorCode::kNotFound, "unknown request " + id);
  return json_response(200, request_summary(runtime_.store(), *r));
}

ApiResponse Service::list_collections(const ApiRequest& req, const std::string& id) {
  const Store& store = runtime_.store();
  if (!store.find<RequestRecord>(id)) throw Error(ErrorCode::kNotFound, "unknown request " + id);
  const std::string kind = query_value(req, "kind");
  if (!kind.empty() && kind != "Input" && kind != "Output") {
    throw Error(ErrorCode::kInvalidArgument, "kind must be Input or Output");
  }
  Query<Collection> q;
  q.where = [&](const Collection& c) {
    return c.request_id == id && (kind.empty() || to_string(c.kind) == kind);
  };
  return json_response(200, page<Collection>(store, q, req, collection_to_api));
}

ApiResponse Service::list_contents(const ApiRequest& req, const std::string& cid) {
  const Store& store = runtime_.store();
  if (!store.find<Collection>(cid)) throw Error(ErrorCode::kNotFound, "unknown collection " + cid);
  Query<Content> q;
  q.owner = cid;
  const std::string filter = query_value(req, "status");
  if (!filter.empty()) {
    std::stringstream ss(filter);
    std::string s;
    while (std::getline(ss, s, ',')) {
      const auto st = content_status_from_string(s);
      if (!st) throw Error(ErrorCode::kInvalidArgument, "unknown content status '" + s + "'");
      q.statuses.push_back(*st);
    }
  }
  return json_response(200, page<Content>(store, q, req, content_to_api));
}

ApiResponse Service::hpo_points(const ApiRequest& req, const std::string& task) {
  std::size_t limit = 0;
  if (const std::string l = query_value(req, "limit"); !l.empty()) {
    if (l.size() > 6 || !std::all_of(l.begin(), l.end(), ::isdigit)) {
      throw Error(ErrorCode::kInvalidArgument, "limit must be a non-negative integer");
    }
    limit = std::stoull(l);
  }
  Json points = Json::array();
  for (const auto& p : fetch_points(runtime_.store(), task, limit)) points.push_back(point_to_api(p));
  return json_response(200, {{"task_id", task}, {"points", points}});
}

ApiResponse Service::hpo_loss(const ApiRequest& req, const std::string& point) {
  const Json body = Json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object() || body.size() != 1 || !body.contains("loss") ||
      !body["loss"].is_number()) {
    throw Error(ErrorCode::kParse, "body must be {\"loss\": number}");
  }
  return json_response(200, point_to_api(report_loss(runtime_.store(), point, body["loss"].get<double>())));
}

ApiResponse Service::hpo_failure(const std::string& point) {
  report_failure(runtime_.store(), point);
  return json_response(200, {{"point_id", point}});
}

std::string Service::metrics_text() const {
  const PipelineStats& s = runtime_.stats();
  std::ostringstream out;
  out << "requests_submitted " << submitted_.load() << "\n";
  out << "requests_rejected " << rejected_.load() << "\n";
  out << "requests_finished " << s.requests_finished.load() << "\n";
  out << "requests_subfinished " << s.requests_subfinished.load() << "\n";
  out << "requests_failed " << s.requests_failed.load() << "\n";
  out << "works_created " << s.works_created.load() << "\n";
  for (int d = 0; d < PipelineStats::kDaemonCount; ++d) {
    const auto name = daemon_name(static_cast<PipelineStats::Daemon>(d));
    out << "daemon_steps{daemon=\"" << name << "\"} " << s.steps[d].load() << "\n";
  }
  for (int d = 0; d < PipelineStats::kDaemonCount; ++d) {
    const auto name = daemon_name(static_cast<PipelineStats::Daemon>(d));
    out << "daemon_advanced{daemon=\"" << name << "\"} " << s.advanced[d].load() << "\n";
  }
  out << "step_errors " << s.step_errors.load() << "\n";
  out << "messages_emitted " << s.messages_emitted.load() << "\n";
  out << "messages_delivered " << s.messages_delivered.load() << "\n";
  out << "messages_acked " << s.messages_acked.load() << "\n";
  out << "http_requests " << http_requests_.load() << "\n";
  return out.str();
}

}  // namespace dds
