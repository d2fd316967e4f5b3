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

#ifndef DDS_SRC_CLOCK_HPP_
#define DDS_SRC_CLOCK_HPP_

#include <atomic>

#include "common.hpp"

namespace dds {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Millis now() const = 0;
  virtual bool is_virtual() const = 0;
};

// Shared virtual time for simulators and the daemon scheduler. Only moves
// forward, and only when advanced explicitly.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(Millis t0 = 0) : now_(t0) {}

  Millis now() const override { return now_.load(std::memory_order_acquire); }
  bool is_virtual() const override { return true; }

  void advance(Millis dt);
  void advance_to(Millis t);

 private:
  std::atomic<Millis> now_;
};

// Wall-clock milliseconds since the Unix epoch.
class RealClock final : public Clock {
 public:
  Millis now() const override;
  bool is_virtual() const override { return false; }
};

}  // namespace dds

#endif  // DDS_SRC_CLOCK_HPP_
