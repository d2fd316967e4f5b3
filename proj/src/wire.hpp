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

// Canonical JSON wire schema for workflow requests.
//
// Rendering is canonical: every field is emitted, object keys are sorted and
// numbers use shortest round-trip form, so render(parse(render(x))) is
// byte-identical to render(x). Parsing is strict: unknown fields, wrong
// types and unsupported versions raise Error(kParse) naming the JSON path.

#ifndef DDS_SRC_WIRE_HPP_
#define DDS_SRC_WIRE_HPP_

#include <string>
#include <string_view>

#include "common.hpp"
#include "workflow.hpp"

namespace dds {

inline constexpr int kWireVersion = 1;

struct WireRequest {
  Workflow workflow;
  std::string consumer;

  bool operator==(const WireRequest&) const = default;
};

Json param_value_to_json(const ParamValue& value);
ParamValue param_value_from_json(const Json& j, const std::string& path);

Json workflow_to_json(const Workflow& wf);
Workflow workflow_from_json(const Json& j, const std::string& path = "workflow");

std::string render_workflow(const Workflow& wf);
Workflow parse_workflow(std::string_view text);

Json wire_request_to_json(const WireRequest& request);
WireRequest wire_request_from_json(const Json& j);

std::string render_wire_request(const WireRequest& request);
WireRequest parse_wire_request(std::string_view text);

}  // namespace dds

#endif  // DDS_SRC_WIRE_HPP_
