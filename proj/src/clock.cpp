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

#include "clock.hpp"

#include <chrono>

namespace dds {

void VirtualClock::advance(Millis dt) {
  if (dt < 0) throw Error(ErrorCode::kInvalidArgument, "clock cannot move backwards");
  now_.fetch_add(dt, std::memory_order_acq_rel);
}

void VirtualClock::advance_to(Millis t) {
  Millis current = now_.load(std::memory_order_acquire);
  if (t < current) throw Error(ErrorCode::kInvalidArgument, "clock cannot move backwards");
  now_.store(t, std::memory_order_release);
}

Millis RealClock::now() const {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace dds
