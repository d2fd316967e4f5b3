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

// Small builders shared by the test suites.

#ifndef DDS_TESTS_HELPERS_HPP_
#define DDS_TESTS_HELPERS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "workflow.hpp"

namespace dds::test {

inline WorkTemplate make_template(const std::string& name, bool entry = false,
                                  std::int64_t cap = kDefaultMaxInstantiations) {
  WorkTemplate t;
  t.name = name;
  t.input_spec = {"default", name + "-in"};
  t.output_spec = {"default", name + "-out"};
  t.executable_spec = "run " + name;
  t.is_entry = entry;
  t.max_instantiations = cap;
  return t;
}

inline ConditionBranch edge(const std::string& from, const std::string& to, bool literal = true) {
  ConditionBranch c;
  c.source_template = from;
  c.predicate = PredicateExpr::always(literal);
  c.destinations.push_back({to, {}});
  return c;
}

inline Work terminated(const std::string& tmpl, WorkStatus status = WorkStatus::kFinished,
                       Metrics metrics = {}, std::int64_t generation = 0) {
  Work w;
  w.work_id = "r/" + tmpl + ".0";
  w.template_name = tmpl;
  w.status = status;
  w.output_metrics = std::move(metrics);
  w.generation = generation;
  return w;
}

}  // namespace dds::test

#endif  // DDS_TESTS_HELPERS_HPP_
