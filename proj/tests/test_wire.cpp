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


#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "wire.hpp"
#include "wire_gen.hpp"

using namespace dds;

using dds::test::Gen;
using dds::test::valid_request;

TEST_CASE("round trip: 1000 generated workflows") {
  Gen gen(2026);
  for (int i = 0; i < 1000; ++i) {
    const WireRequest req{gen.workflow(), gen.text()};
    const std::string first = render_wire_request(req);
    const WireRequest back = parse_wire_request(first);
    const std::string second = render_wire_request(back);
    REQUIRE(first == second);
    CHECK(back == req);
  }
}

TEST_CASE("canonical form: key order and whitespace do not matter") {
  const std::string canonical = valid_request();
  const Json j = Json::parse(canonical);
  CHECK(render_wire_request(parse_wire_request(j.dump(4))) == canonical);
  CHECK(canonical.find('\n') == std::string::npos);
}

TEST_CASE("floats keep their type through the wire") {
  Workflow wf;
  wf.name = "w";
  wf.templates.push_back(dds::test::make_template("A", true));
  wf.initial_bindings["x"] = ParamValue{2.0};
  wf.initial_bindings["n"] = ParamValue{std::int64_t{2}};
  const auto back = parse_wire_request(render_wire_request({wf, "c"}));
  CHECK(std::holds_alternative<double>(back.workflow.initial_bindings.at("x")));
  CHECK(std::holds_alternative<std::int64_t>(back.workflow.initial_bindings.at("n")));
}

TEST_CASE("strict schema rejections") {
  const Json base = Json::parse(valid_request());
  REQUIRE_NOTHROW(parse_wire_request(base.dump()));

  SUBCASE("not JSON") {
    CHECK_THROWS_AS(parse_wire_request("{\"wire_version\": 1,"), Error);
    CHECK_THROWS_AS(parse_wire_request("[]"), Error);
  }
  const auto suite = dds::test::rejection_suite();
  CHECK(suite.size() == 16);
  for (const auto& r : suite) {
    CAPTURE(r.label);
    CHECK(dds::test::check_rejection(base, r) == "");
  }
}
