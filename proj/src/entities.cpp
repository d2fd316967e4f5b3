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

#include "entities.hpp"

#include <array>

#include "wire.hpp"

namespace dds {

namespace {

template <class E, std::size_t N>
E enum_from(const Json& j, const std::array<E, N>& values) {
  const auto text = j.get<std::string>();
  for (E v : values) {
    if (to_string(v) == text) return v;
  }
  throw Error(ErrorCode::kParse, "unknown enum value '" + text + "'");
}

constexpr std::array kRequestStatuses = {RequestStatus::kNew, RequestStatus::kTransforming,
                                         RequestStatus::kFinished, RequestStatus::kSubFinished,
                                         RequestStatus::kFailed};
constexpr std::array kProcessingStatuses = {
    ProcessingStatus::kNew, ProcessingStatus::kSubmitted, ProcessingStatus::kRunning,
    ProcessingStatus::kFinished, ProcessingStatus::kFailed};
constexpr std::array kContentStatuses = {ContentStatus::kNew, ContentStatus::kAvailable,
                                         ContentStatus::kDelivered, ContentStatus::kProcessed,
                                         ContentStatus::kFailed};
constexpr std::array kMessageTypes = {MessageType::kContentAvailable,
                                      MessageType::kWorkTerminated,
                                      MessageType::kHpoPointsReady, MessageType::kRequestDone};
constexpr std::array kDeliveryStatuses = {DeliveryStatus::kPending, DeliveryStatus::kDelivered,
                                          DeliveryStatus::kAcked};
constexpr std::array kCollectionKinds = {CollectionKind::kInput, CollectionKind::kOutput};

}  // namespace

std::string_view to_string(RequestStatus s) {
  switch (s) {
    case RequestStatus::kNew: return "New";
    case RequestStatus::kTransforming: return "Transforming";
    case RequestStatus::kFinished: return "Finished";
    case RequestStatus::kSubFinished: return "SubFinished";
    case RequestStatus::kFailed: return "Failed";
  }
  return "New";
}

std::string_view to_string(ProcessingStatus s) {
  switch (s) {
    case ProcessingStatus::kNew: return "New";
    case ProcessingStatus::kSubmitted: return "Submitted";
    case ProcessingStatus::kRunning: return "Running";
    case ProcessingStatus::kFinished: return "Finished";
    case ProcessingStatus::kFailed: return "Failed";
  }
  return "New";
}

std::string_view to_string(CollectionKind k) {
  return k == CollectionKind::kInput ? "Input" : "Output";
}

std::string_view to_string(CollectionStatus) { return "Open"; }

std::string_view to_string(ContentStatus s) {
  switch (s) {
    case ContentStatus::kNew: return "New";
    case ContentStatus::kAvailable: return "Available";
    case ContentStatus::kDelivered: return "Delivered";
    case ContentStatus::kProcessed: return "Processed";
    case ContentStatus::kFailed: return "Failed";
  }
  return "New";
}

std::string_view to_string(MessageType t) {
  switch (t) {
    case MessageType::kContentAvailable: return "ContentAvailable";
    case MessageType::kWorkTerminated: return "WorkTerminated";
    case MessageType::kHpoPointsReady: return "HPOPointsReady";
    case MessageType::kRequestDone: return "RequestDone";
  }
  return "ContentAvailable";
}

std::string_view to_string(DeliveryStatus s) {
  switch (s) {
    case DeliveryStatus::kPending: return "Pending";
    case DeliveryStatus::kDelivered: return "Delivered";
    case DeliveryStatus::kAcked: return "Acked";
  }
  return "Pending";
}

std::optional<RequestStatus> request_status_from_string(std::string_view text) {
  for (auto s : kRequestStatuses) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::optional<ContentStatus> content_status_from_string(std::string_view text) {
  for (auto s : kContentStatuses) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

bool is_terminal(RequestStatus s) {
  return s == RequestStatus::kFinished || s == RequestStatus::kSubFinished ||
         s == RequestStatus::kFailed;
}

bool is_terminal(ProcessingStatus s) {
  return s == ProcessingStatus::kFinished || s == ProcessingStatus::kFailed;
}

bool RowTraits<RequestRecord>::legal(Status from, Status to) {
  if (from == RequestStatus::kNew) return to == RequestStatus::kTransforming;
  if (from == RequestStatus::kTransforming) return is_terminal(to);
  return false;
}

bool RowTraits<Processing>::legal(Status from, Status to) {
  switch (from) {
    // New -> Failed: submission gave up before the backend assigned an id.
    case ProcessingStatus::kNew:
      return to == ProcessingStatus::kSubmitted || to == ProcessingStatus::kFailed;
    case ProcessingStatus::kSubmitted: return to == ProcessingStatus::kRunning;
    case ProcessingStatus::kRunning: return is_terminal(to);
    default: return false;
  }
}

bool RowTraits<Content>::legal(Status from, Status to) {
  switch (from) {
    case ContentStatus::kNew: return to == ContentStatus::kAvailable;
    case ContentStatus::kAvailable: return to == ContentStatus::kDelivered;
    case ContentStatus::kDelivered:
      return to == ContentStatus::kProcessed || to == ContentStatus::kFailed;
    case ContentStatus::kFailed: return to == ContentStatus::kAvailable;
    default: return false;
  }
}

bool RowTraits<Message>::legal(Status from, Status to) {
  return (from == DeliveryStatus::kPending && to == DeliveryStatus::kDelivered) ||
         (from == DeliveryStatus::kDelivered && to == DeliveryStatus::kAcked);
}

std::string input_collection_id(std::string_view work_id) {
  return std::string(work_id) + "#in";
}

std::string output_collection_id(std::string_view work_id) {
  return std::string(work_id) + "#out";
}

std::string content_id(std::string_view collection_id, std::string_view name) {
  return std::string(collection_id) + "/" + std::string(name);
}

std::string processing_id(std::string_view work_id) { return std::string(work_id) + "#p"; }

std::string message_id(MessageType type, std::string_view entity_id,
                       std::string_view qualifier) {
  std::string id = std::string(to_string(type)) + ":" + std::string(entity_id);
  if (!qualifier.empty()) id += ":" + std::string(qualifier);
  return id;
}

Json work_to_json(const Work& w) {
  Json bindings = Json::object();
  for (const auto& [k, v] : w.bindings) bindings[k] = param_value_to_json(v);
  return {{"work_id", w.work_id},
          {"template_name", w.template_name},
          {"bindings", std::move(bindings)},
          {"status", to_string(w.status)},
          {"output_metrics", w.output_metrics},
          {"generation", w.generation},
          {"parent_work_id", w.parent_work_id}};
}

Work work_from_json(const Json& j) {
  Work w;
  w.work_id = j.at("work_id").get<std::string>();
  w.template_name = j.at("template_name").get<std::string>();
  for (const auto& [k, v] : j.at("bindings").items()) {
    w.bindings.emplace(k, param_value_from_json(v, "bindings." + k));
  }
  auto status = work_status_from_string(j.at("status").get<std::string>());
  if (!status) throw Error(ErrorCode::kParse, "bad work status");
  w.status = *status;
  w.output_metrics = j.at("output_metrics").get<Metrics>();
  w.generation = j.at("generation").get<std::int64_t>();
  w.parent_work_id = j.at("parent_work_id").get<std::string>();
  return w;
}

void to_json(Json& j, const RequestRecord& r) {
  j = {{"request_id", r.request_id}, {"requester", r.requester},
       {"workflow", r.workflow},     {"consumer", r.consumer},
       {"status", to_string(r.status)}, {"created_at", r.created_at},
       {"updated_at", r.updated_at}, {"report", r.report},
       {"idempotency_key", r.idempotency_key}, {"body_digest", r.body_digest},
       {"degraded", r.degraded}};
}

void from_json(const Json& j, RequestRecord& r) {
  r.request_id = j.at("request_id").get<std::string>();
  r.requester = j.at("requester").get<std::string>();
  r.workflow = j.at("workflow").get<std::string>();
  r.consumer = j.at("consumer").get<std::string>();
  r.status = enum_from(j.at("status"), kRequestStatuses);
  r.created_at = j.at("created_at").get<Millis>();
  r.updated_at = j.at("updated_at").get<Millis>();
  r.report = j.at("report").get<std::string>();
  r.idempotency_key = j.at("idempotency_key").get<std::string>();
  r.body_digest = j.at("body_digest").get<std::string>();
  r.degraded = j.at("degraded").get<bool>();
}

void to_json(Json& j, const WorkRecord& r) {
  j = {{"work", work_to_json(r.work)},     {"request_id", r.request_id},
       {"evaluated", r.evaluated},         {"ddm_retries", r.ddm_retries},
       {"next_retry_at", r.next_retry_at}, {"error", r.error},
       {"walk_target", r.walk_target ? to_string(*r.walk_target) : ""},
       {"created_at", r.created_at},       {"updated_at", r.updated_at}};
}

void from_json(const Json& j, WorkRecord& r) {
  r.work = work_from_json(j.at("work"));
  r.request_id = j.at("request_id").get<std::string>();
  r.evaluated = j.at("evaluated").get<bool>();
  r.ddm_retries = j.at("ddm_retries").get<std::int64_t>();
  r.next_retry_at = j.at("next_retry_at").get<Millis>();
  r.error = j.at("error").get<std::string>();
  r.walk_target = work_status_from_string(j.at("walk_target").get<std::string>());
  r.created_at = j.at("created_at").get<Millis>();
  r.updated_at = j.at("updated_at").get<Millis>();
}

void to_json(Json& j, const Processing& r) {
  j = {{"processing_id", r.processing_id}, {"work_id", r.work_id},
       {"request_id", r.request_id},       {"external_id", r.external_id},
       {"status", to_string(r.status)},    {"submitted_at", r.submitted_at},
       {"polled_at", r.polled_at},         {"submit_retries", r.submit_retries},
       {"next_retry_at", r.next_retry_at}, {"closed", r.closed},
       {"metrics", r.metrics},             {"error", r.error},
       {"created_at", r.created_at},       {"updated_at", r.updated_at}};
}

void from_json(const Json& j, Processing& r) {
  r.processing_id = j.at("processing_id").get<std::string>();
  r.work_id = j.at("work_id").get<std::string>();
  r.request_id = j.at("request_id").get<std::string>();
  r.external_id = j.at("external_id").get<std::string>();
  r.status = enum_from(j.at("status"), kProcessingStatuses);
  r.submitted_at = j.at("submitted_at").get<Millis>();
  r.polled_at = j.at("polled_at").get<Millis>();
  r.submit_retries = j.at("submit_retries").get<std::int64_t>();
  r.next_retry_at = j.at("next_retry_at").get<Millis>();
  r.closed = j.at("closed").get<bool>();
  r.metrics = j.at("metrics").get<Metrics>();
  r.error = j.at("error").get<std::string>();
  r.created_at = j.at("created_at").get<Millis>();
  r.updated_at = j.at("updated_at").get<Millis>();
}

void to_json(Json& j, const Collection& r) {
  j = {{"collection_id", r.collection_id},
       {"request_id", r.request_id},
       {"work_id", r.work_id},
       {"scope", r.scope},
       {"name", r.name},
       {"kind", to_string(r.kind)},
       {"total_contents", r.total_contents},
       {"available_contents", r.available_contents},
       {"processed_contents", r.processed_contents},
       {"created_at", r.created_at},
       {"updated_at", r.updated_at}};
}

void from_json(const Json& j, Collection& r) {
  r.collection_id = j.at("collection_id").get<std::string>();
  r.request_id = j.at("request_id").get<std::string>();
  r.work_id = j.at("work_id").get<std::string>();
  r.scope = j.at("scope").get<std::string>();
  r.name = j.at("name").get<std::string>();
  r.kind = enum_from(j.at("kind"), kCollectionKinds);
  r.total_contents = j.at("total_contents").get<std::int64_t>();
  r.available_contents = j.at("available_contents").get<std::int64_t>();
  r.processed_contents = j.at("processed_contents").get<std::int64_t>();
  r.created_at = j.at("created_at").get<Millis>();
  r.updated_at = j.at("updated_at").get<Millis>();
}

void to_json(Json& j, const Content& r) {
  j = {{"content_id", r.content_id},       {"collection_id", r.collection_id},
       {"request_id", r.request_id},       {"work_id", r.work_id},
       {"name", r.name},                   {"size_bytes", r.size_bytes},
       {"status", to_string(r.status)},    {"attempt_count", r.attempt_count},
       {"attributes", r.attributes},       {"staged_at", r.staged_at},
       {"started_at", r.started_at},       {"finished_at", r.finished_at},
       {"released_at", r.released_at},     {"updated_at", r.updated_at}};
}

void from_json(const Json& j, Content& r) {
  r.content_id = j.at("content_id").get<std::string>();
  r.collection_id = j.at("collection_id").get<std::string>();
  r.request_id = j.at("request_id").get<std::string>();
  r.work_id = j.at("work_id").get<std::string>();
  r.name = j.at("name").get<std::string>();
  r.size_bytes = j.at("size_bytes").get<std::int64_t>();
  r.status = enum_from(j.at("status"), kContentStatuses);
  r.attempt_count = j.at("attempt_count").get<std::int64_t>();
  r.attributes = j.at("attributes");
  r.staged_at = j.at("staged_at").get<Millis>();
  r.started_at = j.at("started_at").get<Millis>();
  r.finished_at = j.at("finished_at").get<Millis>();
  r.released_at = j.at("released_at").get<Millis>();
  r.updated_at = j.at("updated_at").get<Millis>();
}

void to_json(Json& j, const Message& r) {
  j = {{"message_id", r.message_id},
       {"msg_type", to_string(r.msg_type)},
       {"destination", r.destination},
       {"request_id", r.request_id},
       {"payload", r.payload},
       {"delivery_status", to_string(r.delivery_status)},
       {"created_at", r.created_at},
       {"delivered_at", r.delivered_at},
       {"acked_at", r.acked_at},
       {"updated_at", r.updated_at}};
}

void from_json(const Json& j, Message& r) {
  r.message_id = j.at("message_id").get<std::string>();
  r.msg_type = enum_from(j.at("msg_type"), kMessageTypes);
  r.destination = j.at("destination").get<std::string>();
  r.request_id = j.at("request_id").get<std::string>();
  r.payload = j.at("payload").get<std::string>();
  r.delivery_status = enum_from(j.at("delivery_status"), kDeliveryStatuses);
  r.created_at = j.at("created_at").get<Millis>();
  r.delivered_at = j.at("delivered_at").get<Millis>();
  r.acked_at = j.at("acked_at").get<Millis>();
  r.updated_at = j.at("updated_at").get<Millis>();
}

}  // namespace dds
