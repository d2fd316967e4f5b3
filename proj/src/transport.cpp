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


#include "transport.hpp"

namespace dds {

bool InMemoryTransport::publish(const Message& message) {
  std::vector<Handler> handlers;
  {
    std::lock_guard lock(mu_);
    if (down_) return false;
    deliveries_.push_back(message);
    seen_.insert(message.message_id);
    if (auto_ack_) acks_.push_back(message.message_id);
    auto [lo, hi] = handlers_.equal_range(message.destination);
    for (auto it = lo; it != hi; ++it) handlers.push_back(it->second);
  }
  for (auto& h : handlers) h(message);
  return true;
}

std::vector<std::string> InMemoryTransport::take_acks() {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  out.swap(acks_);
  return out;
}

void InMemoryTransport::set_down(bool down) {
  std::lock_guard lock(mu_);
  down_ = down;
}

void InMemoryTransport::set_auto_ack(bool auto_ack) {
  std::lock_guard lock(mu_);
  auto_ack_ = auto_ack;
}

void InMemoryTransport::ack(const std::string& message_id) {
  std::lock_guard lock(mu_);
  acks_.push_back(message_id);
}

void InMemoryTransport::subscribe(const std::string& destination, Handler handler) {
  std::lock_guard lock(mu_);
  handlers_.emplace(destination, std::move(handler));
}

std::vector<Message> InMemoryTransport::deliveries() const {
  std::lock_guard lock(mu_);
  return deliveries_;
}

std::size_t InMemoryTransport::distinct_count() const {
  std::lock_guard lock(mu_);
  return seen_.size();
}

std::size_t InMemoryTransport::delivery_count() const {
  std::lock_guard lock(mu_);
  return deliveries_.size();
}

}  // namespace dds
