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

#ifndef DDS_SRC_COMMON_HPP_
#define DDS_SRC_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"

namespace dds {

using Json = nlohmann::json;

// Milliseconds since the Unix epoch (or since t0 for virtual clocks).
using Millis = std::int64_t;

inline constexpr Millis kNoTime = -1;

enum class ErrorCode {
  kInvalidArgument,
  kParse,
  kValidation,
  kNotFound,
  kConflict,
  kStaleTransition,
  kIllegalTransition,
  kMissingBinding,
  kTypeMismatch,
  kUnauthorized,
  kBackendUnavailable,
  kExhaustedSpace,
  kCyclicJobGraph,
  kDanglingDependency,
  kUnknownPoint,
  kConflictingLoss,
  kInjectedCrash,
  kInternal,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// 64-bit FNV-1a, used for deterministic identifiers and seed mixing.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

// Mixes integers into a seed (splitmix64 finaliser).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value);

}  // namespace dds

#endif  // DDS_SRC_COMMON_HPP_
