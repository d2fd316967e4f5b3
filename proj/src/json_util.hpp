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

// Helpers for strict (closed-schema) JSON decoding. Every failure is an
// Error(kParse) whose message starts with the offending path.

#ifndef DDS_SRC_JSON_UTIL_HPP_
#define DDS_SRC_JSON_UTIL_HPP_

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string>
#include <string_view>

#include "common.hpp"

namespace dds::json_util {

[[noreturn]] inline void fail(const std::string& path, const std::string& message) {
  throw Error(ErrorCode::kParse, path + ": " + message);
}

inline void expect_object(const Json& j, const std::string& path,
                   std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) fail(path, "unknown field '" + key + "'");
  }
}

inline const Json* field(const Json& j, std::string_view key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

inline const Json& required(const Json& j, std::string_view key, const std::string& path) {
  const Json* f = field(j, key);
  if (f == nullptr) fail(path, "missing field '" + std::string(key) + "'");
  return *f;
}

inline std::string get_string(const Json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

inline bool get_bool(const Json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected a boolean");
  return j.get<bool>();
}

inline std::int64_t get_int(const Json& j, const std::string& path) {
  if (j.is_number_unsigned()) {
    const auto u = j.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
      fail(path, "integer out of range");
    }
    return static_cast<std::int64_t>(u);
  }
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<std::int64_t>();
}

inline std::string optional_string(const Json& j, std::string_view key, const std::string& path,
                            std::string fallback = {}) {
  const Json* f = field(j, key);
  return f ? get_string(*f, path + "." + std::string(key)) : std::move(fallback);
}

inline double get_number(const Json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

}  // namespace dds::json_util

#endif  // DDS_SRC_JSON_UTIL_HPP_
