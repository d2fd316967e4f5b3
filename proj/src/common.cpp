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

#include "common.hpp"

#include <array>

namespace dds {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kParse: return "Parse";
    case ErrorCode::kValidation: return "Validation";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kConflict: return "Conflict";
    case ErrorCode::kStaleTransition: return "StaleTransition";
    case ErrorCode::kIllegalTransition: return "IllegalTransition";
    case ErrorCode::kMissingBinding: return "MissingBinding";
    case ErrorCode::kTypeMismatch: return "TypeMismatch";
    case ErrorCode::kUnauthorized: return "Unauthorized";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kExhaustedSpace: return "ExhaustedSpace";
    case ErrorCode::kCyclicJobGraph: return "CyclicJobGraph";
    case ErrorCode::kDanglingDependency: return "DanglingDependency";
    case ErrorCode::kUnknownPoint: return "UnknownPoint";
    case ErrorCode::kConflictingLoss: return "ConflictingLoss";
    case ErrorCode::kInjectedCrash: return "InjectedCrash";
    case ErrorCode::kInternal: return "Internal";
  }
  return "Unknown";
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static constexpr std::array<char, 16> kDigits = {
      '0', '1', '2', '3', '4', '5', '6', '7',
      '8', '9', 'a', 'b', 'c', 'd', 'e', 'f'};
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (value + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace dds
