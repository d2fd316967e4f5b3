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

// Persistent entities and their lifecycles.
//
// Identifiers are derived deterministically from their owners (see the
// *_id helpers below) so that a daemon repeating a step after a crash
// produces the same rows and the store rejects the duplicates.

#ifndef DDS_SRC_ENTITIES_HPP_
#define DDS_SRC_ENTITIES_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "common.hpp"
#include "workflow.hpp"

namespace dds {

enum class RequestStatus { kNew, kTransforming, kFinished, kSubFinished, kFailed };
enum class ProcessingStatus { kNew, kSubmitted, kRunning, kFinished, kFailed };
enum class CollectionKind { kInput, kOutput };
enum class CollectionStatus { kOpen };
enum class ContentStatus { kNew, kAvailable, kDelivered, kProcessed, kFailed };
enum class MessageType { kContentAvailable, kWorkTerminated, kHpoPointsReady, kRequestDone };
enum class DeliveryStatus { kPending, kDelivered, kAcked };

std::string_view to_string(RequestStatus s);
std::string_view to_string(ProcessingStatus s);
std::string_view to_string(CollectionKind k);
std::string_view to_string(CollectionStatus s);
std::string_view to_string(ContentStatus s);
std::string_view to_string(MessageType t);
std::string_view to_string(DeliveryStatus s);

std::optional<RequestStatus> request_status_from_string(std::string_view text);
std::optional<ContentStatus> content_status_from_string(std::string_view text);

bool is_terminal(RequestStatus s);
bool is_terminal(ProcessingStatus s);

struct RequestRecord {
  std::string request_id;
  std::string requester;
  // Canonical workflow JSON as submitted.
  std::string workflow;
  std::string consumer;
  RequestStatus status = RequestStatus::kNew;
  Millis created_at = 0;
  Millis updated_at = 0;
  // Validation report (JSON array) for rejected workflows.
  std::string report;
  std::string idempotency_key;
  std::string body_digest;
  // A branch was suppressed or failed to map; caps the outcome at SubFinished.
  bool degraded = false;

  bool operator==(const RequestRecord&) const = default;
};

struct WorkRecord {
  Work work;
  std::string request_id;
  bool evaluated = false;
  std::int64_t ddm_retries = 0;
  Millis next_retry_at = 0;
  std::string error;
  // Terminal status a work is being walked to without ever reaching a
  // backend (empty input, unresolvable collection).
  std::optional<WorkStatus> walk_target;
  Millis created_at = 0;
  Millis updated_at = 0;

  bool operator==(const WorkRecord&) const = default;
};

struct Processing {
  std::string processing_id;
  std::string work_id;
  std::string request_id;
  std::string external_id;
  ProcessingStatus status = ProcessingStatus::kNew;
  Millis submitted_at = kNoTime;
  Millis polled_at = kNoTime;
  std::int64_t submit_retries = 0;
  Millis next_retry_at = 0;
  bool closed = false;
  Metrics metrics;
  std::string error;
  Millis created_at = 0;
  Millis updated_at = 0;

  bool operator==(const Processing&) const = default;
};

struct Collection {
  std::string collection_id;
  std::string request_id;
  std::string work_id;
  std::string scope;
  std::string name;
  CollectionKind kind = CollectionKind::kInput;
  CollectionStatus status = CollectionStatus::kOpen;
  std::int64_t total_contents = 0;
  std::int64_t available_contents = 0;
  std::int64_t processed_contents = 0;
  Millis created_at = 0;
  Millis updated_at = 0;

  bool operator==(const Collection&) const = default;
};

struct Content {
  std::string content_id;
  std::string collection_id;
  std::string request_id;
  std::string work_id;
  std::string name;
  std::int64_t size_bytes = 0;
  ContentStatus status = ContentStatus::kNew;
  std::int64_t attempt_count = 0;
  // Use-case payload: job dependencies, hyperparameter values, loss.
  Json attributes = Json::object();
  Millis staged_at = kNoTime;
  Millis started_at = kNoTime;
  Millis finished_at = kNoTime;
  Millis released_at = kNoTime;
  Millis updated_at = 0;

  bool operator==(const Content&) const = default;
};

struct Message {
  std::string message_id;
  MessageType msg_type = MessageType::kContentAvailable;
  std::string destination;
  std::string request_id;
  // Canonical JSON object.
  std::string payload;
  DeliveryStatus delivery_status = DeliveryStatus::kPending;
  Millis created_at = 0;
  Millis delivered_at = kNoTime;
  Millis acked_at = kNoTime;
  Millis updated_at = 0;

  bool operator==(const Message&) const = default;
};

// Deterministic identifiers.
std::string input_collection_id(std::string_view work_id);
std::string output_collection_id(std::string_view work_id);
std::string content_id(std::string_view collection_id, std::string_view name);
std::string processing_id(std::string_view work_id);
std::string message_id(MessageType type, std::string_view entity_id,
                       std::string_view qualifier = {});

void to_json(Json& j, const RequestRecord& r);
void from_json(const Json& j, RequestRecord& r);
void to_json(Json& j, const WorkRecord& r);
void from_json(const Json& j, WorkRecord& r);
void to_json(Json& j, const Processing& r);
void from_json(const Json& j, Processing& r);
void to_json(Json& j, const Collection& r);
void from_json(const Json& j, Collection& r);
void to_json(Json& j, const Content& r);
void from_json(const Json& j, Content& r);
void to_json(Json& j, const Message& r);
void from_json(const Json& j, Message& r);

Json work_to_json(const Work& w);
Work work_from_json(const Json& j);

// Per-row-type metadata used by the generic store.
template <class Row>
struct RowTraits;

template <>
struct RowTraits<RequestRecord> {
  using Status = RequestStatus;
  static constexpr std::string_view kKind = "requests";
  static const std::string& id(const RequestRecord& r) { return r.request_id; }
  static std::string owner(const RequestRecord& r) { return r.requester; }
  static Status status(const RequestRecord& r) { return r.status; }
  static void set_status(RequestRecord& r, Status s) { r.status = s; }
  static void touch(RequestRecord& r, Millis now) { r.updated_at = now; }
  static bool legal(Status from, Status to);
};

template <>
struct RowTraits<WorkRecord> {
  using Status = WorkStatus;
  static constexpr std::string_view kKind = "works";
  static const std::string& id(const WorkRecord& r) { return r.work.work_id; }
  static std::string owner(const WorkRecord& r) { return r.request_id; }
  static Status status(const WorkRecord& r) { return r.work.status; }
  static void set_status(WorkRecord& r, Status s) { r.work.status = s; }
  static void touch(WorkRecord& r, Millis now) { r.updated_at = now; }
  static bool legal(Status from, Status to) { return is_legal_transition(from, to); }
};

template <>
struct RowTraits<Processing> {
  using Status = ProcessingStatus;
  static constexpr std::string_view kKind = "processings";
  static const std::string& id(const Processing& r) { return r.processing_id; }
  static std::string owner(const Processing& r) { return r.work_id; }
  static Status status(const Processing& r) { return r.status; }
  static void set_status(Processing& r, Status s) { r.status = s; }
  static void touch(Processing& r, Millis now) { r.updated_at = now; }
  static bool legal(Status from, Status to);
};

template <>
struct RowTraits<Collection> {
  using Status = CollectionStatus;
  static constexpr std::string_view kKind = "collections";
  static const std::string& id(const Collection& r) { return r.collection_id; }
  static std::string owner(const Collection& r) { return r.work_id; }
  static Status status(const Collection& r) { return r.status; }
  static void set_status(Collection& r, Status s) { r.status = s; }
  static void touch(Collection& r, Millis now) { r.updated_at = now; }
  static bool legal(Status, Status) { return false; }
};

template <>
struct RowTraits<Content> {
  using Status = ContentStatus;
  static constexpr std::string_view kKind = "contents";
  static const std::string& id(const Content& r) { return r.content_id; }
  static std::string owner(const Content& r) { return r.collection_id; }
  static Status status(const Content& r) { return r.status; }
  static void set_status(Content& r, Status s) { r.status = s; }
  static void touch(Content& r, Millis now) { r.updated_at = now; }
  static bool legal(Status from, Status to);
};

template <>
struct RowTraits<Message> {
  using Status = DeliveryStatus;
  static constexpr std::string_view kKind = "messages";
  static const std::string& id(const Message& r) { return r.message_id; }
  static std::string owner(const Message& r) { return r.request_id; }
  static Status status(const Message& r) { return r.delivery_status; }
  static void set_status(Message& r, Status s) { r.delivery_status = s; }
  static void touch(Message& r, Millis now) { r.updated_at = now; }
  static bool legal(Status from, Status to);
};

}  // namespace dds

#endif  // DDS_SRC_ENTITIES_HPP_
