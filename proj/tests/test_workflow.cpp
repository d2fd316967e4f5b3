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

#include <deque>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "workflow.hpp"

using namespace dds;
using dds::test::edge;
using dds::test::make_template;
using dds::test::terminated;

namespace {

Workflow single_entry() {
  Workflow wf;
  wf.name = "w";
  wf.templates.push_back(make_template("A", true));
  return wf;
}

// Runs the pure engine to a fixed point; every Work finishes with the given metrics.
std::vector<Work> unfold(const Workflow& wf, const Metrics& metrics = {}) {
  std::vector<Work> all;
  std::deque<Work> pending;
  for (auto& w : instantiate_entry_works(wf, "r")) pending.push_back(w);
  std::map<std::string, std::int64_t> counts;
  for (const auto& w : pending) ++counts[w.template_name];
  while (!pending.empty()) {
    Work w = pending.front();
    pending.pop_front();
    w.status = WorkStatus::kFinished;
    w.output_metrics = metrics;
    all.push_back(w);
    auto out = evaluate_conditions(wf, w, counts);
    for (auto& n : out.works) {
      ++counts[n.template_name];
      pending.push_back(n);
    }
  }
  return all;
}

}  // namespace

TEST_CASE("validate: minimal workflow is clean") {
  CHECK(validate_workflow(single_entry()).ok());
}

TEST_CASE("validate: unknown template in a condition") {
  Workflow wf = single_entry();
  wf.conditions.push_back(edge("A", "X"));
  const auto report = validate_workflow(wf);
  CHECK(report.violations.size() == 1);
  CHECK(report.count("unknown-template") == 1);
}

TEST_CASE("validate: undeclared placeholder") {
  Workflow wf = single_entry();
  wf.templates[0].executable_spec = "run %{undeclared}";
  const auto report = validate_workflow(wf);
  CHECK(report.violations.size() == 1);
  CHECK(report.count("unknown-placeholder") == 1);
}

TEST_CASE("validate: structural problems are all listed") {
  Workflow wf;
  CHECK(validate_workflow(wf).count("no-templates") == 1);
  wf.templates = {make_template("A"), make_template("A")};
  wf.templates[0].max_instantiations = 0;
  const auto report = validate_workflow(wf);
  CHECK(report.count("duplicate-template") == 1);
  CHECK(report.count("no-entry") == 1);
  CHECK(report.count("invalid-cap") >= 1);
}

TEST_CASE("validate: destination slot without default or mapping") {
  Workflow wf = single_entry();
  auto b = make_template("B");
  b.parameters.push_back({"n", ParamType::kInt, std::nullopt});
  wf.templates.push_back(b);
  wf.conditions.push_back(edge("A", "B"));
  CHECK(validate_workflow(wf).count("unbound-parameter") == 1);
  wf.conditions[0].destinations[0].param_map["n"] = ParamExpr::constant(std::string("x"));
  CHECK(validate_workflow(wf).count("type-mismatch") == 1);
}

TEST_CASE("instantiate: one and two entry templates") {
  Workflow wf = single_entry();
  auto works = instantiate_entry_works(wf);
  REQUIRE(works.size() == 1);
  CHECK(works[0].generation == 0);
  CHECK(works[0].status == WorkStatus::kNew);
  CHECK(works[0].work_id == "A.0");
  wf.templates.push_back(make_template("B", true));
  CHECK(instantiate_entry_works(wf, "req").size() == 2);
  CHECK(instantiate_entry_works(wf, "req")[1].work_id == "req/B.0");
}

TEST_CASE("instantiate: initial bindings override defaults") {
  Workflow wf = single_entry();
  wf.templates[0].parameters.push_back({"lr", ParamType::kFloat, ParamValue{0.1}});
  wf.templates[0].parameters.push_back({"n", ParamType::kInt, ParamValue{std::int64_t{3}}});
  wf.initial_bindings["lr"] = ParamValue{std::int64_t{2}};
  const auto w = instantiate_entry_works(wf)[0];
  CHECK(std::get<double>(w.bindings.at("lr")) == 2.0);
  CHECK(std::get<std::int64_t>(w.bindings.at("n")) == 3);
}

TEST_CASE("instantiate: missing binding") {
  Workflow wf = single_entry();
  wf.templates[0].parameters.push_back({"n", ParamType::kInt, std::nullopt});
  try {
    instantiate_entry_works(wf);
    FAIL("expected MissingBinding");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingBinding);
  }
}

TEST_CASE("conditions: status predicate fires one destination") {
  Workflow wf = single_entry();
  wf.templates.push_back(make_template("B"));
  ConditionBranch c = edge("A", "B");
  c.predicate = PredicateExpr::compare(PredicateExpr::Op::kEq, {ValueRef::Kind::kStatus, ""},
                                       ParamValue{std::string("Finished")});
  wf.conditions.push_back(c);
  auto out = evaluate_conditions(wf, terminated("A"), {{"A", 1}});
  REQUIRE(out.works.size() == 1);
  CHECK(out.works[0].template_name == "B");
  CHECK(out.works[0].generation == 1);
  CHECK(out.works[0].parent_work_id == "r/A.0");
  CHECK(out.works[0].work_id.rfind("r/B.", 0) == 0);
  CHECK(evaluate_conditions(wf, terminated("A", WorkStatus::kFailed), {{"A", 1}}).works.empty());
}

TEST_CASE("conditions: metric comparison") {
  Workflow wf = single_entry();
  wf.templates.push_back(make_template("B"));
  ConditionBranch c = edge("A", "B");
  c.predicate = PredicateExpr::compare(PredicateExpr::Op::kLt, {ValueRef::Kind::kMetric, "loss"},
                                       ParamValue{0.1});
  wf.conditions.push_back(c);
  CHECK(evaluate_conditions(wf, terminated("A", WorkStatus::kFinished, {{"loss", 0.05}}), {}).works.size() == 1);
  CHECK(evaluate_conditions(wf, terminated("A", WorkStatus::kFinished, {{"loss", 0.5}}), {}).works.empty());
  // missing metric: false, never an error
  CHECK(evaluate_conditions(wf, terminated("A"), {}).works.empty());
}

TEST_CASE("conditions: active-learning loop caps P at 5") {
  Workflow wf;
  auto p = make_template("P", true, 5);
  p.parameters.push_back({"loop", ParamType::kInt, ParamValue{std::int64_t{0}}});
  auto d = make_template("D", false, 100);
  d.parameters.push_back({"loop", ParamType::kInt, ParamValue{std::int64_t{0}}});
  wf.templates = {p, d};
  ConditionBranch pd = edge("P", "D");
  pd.destinations[0].param_map["loop"] = ParamExpr::binding("loop");
  ConditionBranch dp = edge("D", "P");
  dp.predicate = PredicateExpr::compare(PredicateExpr::Op::kEq, {ValueRef::Kind::kMetric, "continue"},
                                        ParamValue{std::int64_t{1}});
  dp.destinations[0].param_map["loop"] = ParamExpr::arithmetic(
      ParamExpr::Op::kAdd, ParamExpr::binding("loop"), ParamExpr::constant(std::int64_t{1}));
  wf.conditions = {pd, dp};
  REQUIRE(validate_workflow(wf).ok());

  const auto works = unfold(wf, {{"continue", 1}});
  std::int64_t ps = 0;
  std::vector<std::int64_t> generations;
  for (const auto& w : works) {
    if (w.template_name == "P") {
      ++ps;
      generations.push_back(w.generation);
    }
  }
  CHECK(ps == 5);
  CHECK(generations == std::vector<std::int64_t>{0, 2, 4, 6, 8});
  // the sixth P is suppressed
  const Work last_d = works.back();
  CHECK(last_d.template_name == "D");
  auto out = evaluate_conditions(wf, last_d, {{"P", 5}, {"D", 5}});
  CHECK(out.works.empty());
  REQUIRE(out.suppressed.size() == 1);
  CHECK(out.suppressed[0].reason == "max_instantiations");
}

TEST_CASE("conditions: type mismatch in a parameter map") {
  Workflow wf = single_entry();
  auto b = make_template("B");
  b.parameters.push_back({"n", ParamType::kInt, std::nullopt});
  wf.templates.push_back(b);
  auto c = edge("A", "B");
  c.destinations[0].param_map["n"] = ParamExpr::metric("loss");
  wf.conditions.push_back(c);
  try {
    evaluate_conditions(wf, terminated("A", WorkStatus::kFinished, {{"loss", 0.5}}), {});
    FAIL("expected TypeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTypeMismatch);
  }
}

TEST_CASE("conditions: all true branches fire, branch then destination order") {
  Workflow wf = single_entry();
  for (const char* n : {"B", "C", "D"}) wf.templates.push_back(make_template(n));
  auto c1 = edge("A", "C");
  c1.destinations.push_back({"D", {}});
  wf.conditions = {edge("A", "B"), c1, edge("A", "D", false)};
  const auto a = evaluate_conditions(wf, terminated("A"), {});
  const auto b = evaluate_conditions(wf, terminated("A"), {});
  REQUIRE(a.works.size() == 3);
  CHECK(a.works[0].template_name == "B");
  CHECK(a.works[1].template_name == "C");
  CHECK(a.works[2].template_name == "D");
  CHECK(a.works == b.works);
}

TEST_CASE("conditions: max_total_works suppression") {
  Workflow wf = single_entry();
  wf.templates.push_back(make_template("B"));
  wf.max_total_works = 1;
  wf.conditions.push_back(edge("A", "B"));
  auto out = evaluate_conditions(wf, terminated("A"), {{"A", 1}});
  CHECK(out.works.empty());
  REQUIRE(out.suppressed.size() == 1);
  CHECK(out.suppressed[0].reason == "max_total_works");
}

TEST_CASE("substitute: examples") {
  CHECK(substitute_params("train --lr=%{lr}", {{"lr", ParamValue{0.01}}}) == "train --lr=0.01");
  CHECK(substitute_params("plain text % { }", {}) == "plain text % { }");
  CHECK(substitute_params("a=%{a}", {{"a", ParamValue{std::string("%{x}")}}}) == "a=%{x}");
  CHECK(substitute_params("%{n}-%{b}", {{"n", ParamValue{std::int64_t{7}}}, {"b", ParamValue{true}}}) == "7-true");
  try {
    substitute_params("%{missing}", {});
    FAIL("expected MissingBinding");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingBinding);
  }
  CHECK(placeholders("%{a} %{b} %{a}") == std::vector<std::string>{"a", "b", "a"});
}

TEST_CASE("render and coerce") {
  CHECK(render_value(ParamValue{1.5}) == "1.5");
  CHECK(render_value(ParamValue{0.1}) == "0.1");
  CHECK(render_value(ParamValue{std::int64_t{-3}}) == "-3");
  CHECK(coerce(ParamValue{std::int64_t{2}}, ParamType::kFloat) == ParamValue{2.0});
  CHECK(coerce(ParamValue{2.0}, ParamType::kInt) == ParamValue{std::int64_t{2}});
  CHECK_FALSE(coerce(ParamValue{2.5}, ParamType::kInt));
  CHECK_FALSE(coerce(ParamValue{std::string("1")}, ParamType::kInt));
}

TEST_CASE("work lifecycle edges") {
  CHECK(is_legal_transition(WorkStatus::kNew, WorkStatus::kActivated));
  CHECK(is_legal_transition(WorkStatus::kRunning, WorkStatus::kTerminating));
  CHECK(is_legal_transition(WorkStatus::kTerminating, WorkStatus::kSubFinished));
  CHECK_FALSE(is_legal_transition(WorkStatus::kFinished, WorkStatus::kRunning));
  CHECK_FALSE(is_legal_transition(WorkStatus::kNew, WorkStatus::kFinished));
  for (auto s : {WorkStatus::kFinished, WorkStatus::kSubFinished, WorkStatus::kFailed}) CHECK(is_terminal(s));
}

TEST_CASE("property: predicates are total") {
  std::mt19937_64 rng(11);
  const std::vector<std::string> names = {"loss", "acc", "n", "missing"};
  auto leaf = [&]() {
    auto op = static_cast<PredicateExpr::Op>(1 + rng() % 6);
    ValueRef ref{static_cast<ValueRef::Kind>(rng() % 3), names[rng() % names.size()]};
    ParamValue lit;
    switch (rng() % 4) {
      case 0: lit = std::int64_t(rng() % 5); break;
      case 1: lit = double(rng() % 100) / 10.0; break;
      case 2: lit = std::string("Finished"); break;
      default: lit = bool(rng() % 2);
    }
    return PredicateExpr::compare(op, ref, lit);
  };
  Work w = terminated("A", WorkStatus::kFinished, {{"loss", 0.3}, {"acc", 0.9}});
  w.bindings["n"] = std::int64_t{2};
  w.bindings["acc"] = std::string("high");
  for (int i = 0; i < 2000; ++i) {
    PredicateExpr p = rng() % 2 ? PredicateExpr::all_of({leaf(), leaf()})
                                : PredicateExpr::any_of({leaf(), PredicateExpr::negate(leaf())});
    CHECK_NOTHROW(evaluate_predicate(p, w));
  }
  CHECK_FALSE(evaluate_predicate(
      PredicateExpr::compare(PredicateExpr::Op::kGt, {ValueRef::Kind::kMetric, "missing"}, ParamValue{0.0}), w));
}

TEST_CASE("property: cycles terminate within the caps") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    Workflow wf;
    const int n = 1 + static_cast<int>(rng() % 4);
    std::int64_t cap_sum = 0;
    for (int t = 0; t < n; ++t) {
      const std::int64_t cap = 1 + static_cast<std::int64_t>(rng() % 6);
      cap_sum += cap;
      wf.templates.push_back(make_template(std::string(1, char('A' + t)), t == 0, cap));
    }
    wf.max_total_works = 1 + static_cast<std::int64_t>(rng() % 30);
    const int edges = static_cast<int>(rng() % 6);
    for (int e = 0; e < edges; ++e) {
      wf.conditions.push_back(edge(wf.templates[rng() % n].name, wf.templates[rng() % n].name));
    }
    const auto works = unfold(wf);
    CHECK(static_cast<std::int64_t>(works.size()) <= std::min(wf.max_total_works, cap_sum));
  }
}
