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

// Client-side shorthands that expand to full WireRequests, so the server
// only ever sees the strict wire schema.
//
//   {"carousel": {"dataset", "policy", "bundle_size"}, "consumer"}
//   {"hpo": <task spec>, "consumer"}
//   {"dag": <job graph>, "name", "consumer"}
//   {"active_learning": {"max_loops", "hints"}, "consumer"}
//
// A document with a "workflow" field is taken as a WireRequest as is.

#ifndef DDS_SRC_SHORTHAND_HPP_
#define DDS_SRC_SHORTHAND_HPP_

#include "wire.hpp"

namespace dds {

// Throws Error(kParse) or the use case's validation error.
WireRequest expand_request(const Json& document);

}  // namespace dds

#endif  // DDS_SRC_SHORTHAND_HPP_
