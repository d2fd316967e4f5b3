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

// Message transport between the Conductor and data consumers.
//
// Delivery is at-least-once: a message may reach a consumer more than once
// (redelivery after a transport outage or a Conductor restart), so consumers
// deduplicate by message_id.

#ifndef DDS_SRC_TRANSPORT_HPP_
#define DDS_SRC_TRANSPORT_HPP_

#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "entities.hpp"

namespace dds {

class Transport {
 public:
  virtual ~Transport() = default;
  // False when the transport is unreachable; the message stays Pending.
  virtual bool publish(const Message& message) = 0;
  // Message ids acknowledged by consumers since the last call.
  virtual std::vector<std::string> take_acks() = 0;
};

class InMemoryTransport final : public Transport {
 public:
  using Handler = std::function<void(const Message&)>;

  bool publish(const Message& message) override;
  std::vector<std::string> take_acks() override;

  void set_down(bool down);
  // Acknowledge every message on receipt.
  void set_auto_ack(bool auto_ack);
  void ack(const std::string& message_id);
  void subscribe(const std::string& destination, Handler handler);

  // Every delivery, duplicates included.
  std::vector<Message> deliveries() const;
  // Distinct message ids seen, i.e. what a deduplicating consumer processes.
  std::size_t distinct_count() const;
  std::size_t delivery_count() const;

 private:
  mutable std::mutex mu_;
  bool down_ = false;
  bool auto_ack_ = true;
  std::vector<Message> deliveries_;
  std::set<std::string> seen_;
  std::vector<std::string> acks_;
  std::multimap<std::string, Handler> handlers_;
};

}  // namespace dds

#endif  // DDS_SRC_TRANSPORT_HPP_
