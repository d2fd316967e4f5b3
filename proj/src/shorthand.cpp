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

#include "shorthand.hpp"

#include "carousel.hpp"
#include "dag.hpp"
#include "hpo.hpp"
#include "json_util.hpp"

namespace dds {

using namespace json_util;

WireRequest expand_request(const Json& doc) {
  if (!doc.is_object()) fail("request", "expected an object");
  if (doc.contains("workflow")) return wire_request_from_json(doc);
  expect_object(doc, "request", {"carousel", "hpo", "dag", "name", "active_learning", "consumer"});
  const std::string consumer = optional_string(doc, "consumer", "request", "cli");
  int kinds = 0;
  for (const char* k : {"carousel", "hpo", "dag", "active_learning"}) kinds += doc.contains(k);
  if (kinds != 1) fail("request", "expected exactly one of workflow|carousel|hpo|dag|active_learning");
  if (doc.contains("name") && !doc.contains("dag")) fail("request.name", "only valid with dag");

  if (const Json* c = field(doc, "carousel")) {
    const std::string p = "request.carousel";
    expect_object(*c, p, {"dataset", "policy", "prompt_release", "bundle_size"});
    CarouselPolicy policy = parse_policy(optional_string(*c, "policy", p, "file-level"));
    if (const Json* v = field(*c, "prompt_release")) policy.prompt_release = get_bool(*v, p + ".prompt_release");
    if (const Json* v = field(*c, "bundle_size")) policy.bundle_size = get_int(*v, p + ".bundle_size");
    return {build_carousel_workflow(optional_string(*c, "dataset", p, "data"), policy), consumer};
  }
  if (const Json* h = field(doc, "hpo")) return {build_hpo_workflow(hpo_spec_from_json(*h)), consumer};
  if (const Json* d = field(doc, "dag")) {
    return {ingest_job_graph(job_graph_from_json(*d), optional_string(doc, "name", "request", "dag")),
            consumer};
  }
  const Json& a = doc.at("active_learning");
  const std::string p = "request.active_learning";
  expect_object(a, p, {"max_loops", "hints", "continue_metric"});
  ActiveLearningSpec spec;
  if (const Json* v = field(a, "max_loops")) spec.max_loops = get_int(*v, p + ".max_loops");
  if (const Json* v = field(a, "continue_metric")) spec.continue_metric = get_string(*v, p + ".continue_metric");
  if (const Json* v = field(a, "hints")) {
    if (!v->is_array()) fail(p + ".hints", "expected an array");
    spec.hint_metrics.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      spec.hint_metrics.push_back(get_string((*v)[i], p + ".hints[" + std::to_string(i) + "]"));
    }
  }
  return {build_active_learning(spec), consumer};
}

}  // namespace dds
