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

#include "wire.hpp"

#include <cmath>
#include <initializer_list>
#include <limits>

#include "json_util.hpp"

namespace dds {

namespace {

using namespace json_util;

Json spec_to_json(const CollectionSpec& spec) {
  return {{"scope", spec.scope}, {"name", spec.name}};
}

CollectionSpec spec_from_json(const Json& j, const std::string& path) {
  expect_object(j, path, {"scope", "name"});
  return {optional_string(j, "scope", path), optional_string(j, "name", path)};
}

std::string ref_to_string(const ValueRef& ref) {
  switch (ref.kind) {
    case ValueRef::Kind::kStatus: return "status";
    case ValueRef::Kind::kMetric: return "metric:" + ref.name;
    case ValueRef::Kind::kBinding: return "binding:" + ref.name;
  }
  return "status";
}

ValueRef ref_from_string(const std::string& text, const std::string& path) {
  if (text == "status") return {ValueRef::Kind::kStatus, ""};
  if (text.rfind("metric:", 0) == 0 && text.size() > 7) {
    return {ValueRef::Kind::kMetric, text.substr(7)};
  }
  if (text.rfind("binding:", 0) == 0 && text.size() > 8) {
    return {ValueRef::Kind::kBinding, text.substr(8)};
  }
  fail(path, "reference must be 'status', 'metric:<name>' or 'binding:<name>'");
}

struct OpName {
  PredicateExpr::Op op;
  std::string_view name;
};

constexpr OpName kPredicateOps[] = {
    {PredicateExpr::Op::kConst, "const"}, {PredicateExpr::Op::kEq, "eq"},
    {PredicateExpr::Op::kNe, "ne"},       {PredicateExpr::Op::kLt, "lt"},
    {PredicateExpr::Op::kLe, "le"},       {PredicateExpr::Op::kGt, "gt"},
    {PredicateExpr::Op::kGe, "ge"},       {PredicateExpr::Op::kAnd, "and"},
    {PredicateExpr::Op::kOr, "or"},       {PredicateExpr::Op::kNot, "not"},
};

Json predicate_to_json(const PredicateExpr& p) {
  std::string_view name = "const";
  for (const auto& entry : kPredicateOps) {
    if (entry.op == p.op) name = entry.name;
  }
  Json j = {{"op", name}};
  switch (p.op) {
    case PredicateExpr::Op::kConst:
      j["value"] = p.constant;
      break;
    case PredicateExpr::Op::kAnd:
    case PredicateExpr::Op::kOr:
    case PredicateExpr::Op::kNot: {
      Json args = Json::array();
      for (const auto& a : p.args) args.push_back(predicate_to_json(a));
      j["args"] = std::move(args);
      break;
    }
    default:
      j["ref"] = ref_to_string(p.ref);
      j["value"] = param_value_to_json(p.literal);
  }
  return j;
}

PredicateExpr predicate_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  const std::string op = get_string(required(j, "op", path), path + ".op");
  PredicateExpr p;
  bool found = false;
  for (const auto& entry : kPredicateOps) {
    if (entry.name == op) {
      p.op = entry.op;
      found = true;
    }
  }
  if (!found) fail(path + ".op", "unknown predicate operator '" + op + "'");
  switch (p.op) {
    case PredicateExpr::Op::kConst:
      expect_object(j, path, {"op", "value"});
      p.constant = get_bool(required(j, "value", path), path + ".value");
      break;
    case PredicateExpr::Op::kAnd:
    case PredicateExpr::Op::kOr:
    case PredicateExpr::Op::kNot: {
      expect_object(j, path, {"op", "args"});
      const Json& args = required(j, "args", path);
      if (!args.is_array()) fail(path + ".args", "expected an array");
      if (p.op == PredicateExpr::Op::kNot && args.size() != 1) {
        fail(path + ".args", "'not' takes exactly one argument");
      }
      for (std::size_t i = 0; i < args.size(); ++i) {
        p.args.push_back(predicate_from_json(args[i], path + ".args[" + std::to_string(i) + "]"));
      }
      break;
    }
    default:
      expect_object(j, path, {"op", "ref", "value"});
      p.ref = ref_from_string(get_string(required(j, "ref", path), path + ".ref"), path + ".ref");
      p.literal = param_value_from_json(required(j, "value", path), path + ".value");
  }
  return p;
}

constexpr std::pair<ParamExpr::Op, std::string_view> kParamOps[] = {
    {ParamExpr::Op::kLiteral, "literal"}, {ParamExpr::Op::kBinding, "binding"},
    {ParamExpr::Op::kMetric, "metric"},   {ParamExpr::Op::kAdd, "add"},
    {ParamExpr::Op::kSub, "sub"},         {ParamExpr::Op::kMul, "mul"},
};

Json param_expr_to_json(const ParamExpr& e) {
  std::string_view name = "literal";
  for (const auto& [op, text] : kParamOps) {
    if (op == e.op) name = text;
  }
  Json j = {{"op", name}};
  switch (e.op) {
    case ParamExpr::Op::kLiteral:
      j["value"] = param_value_to_json(e.literal);
      break;
    case ParamExpr::Op::kBinding:
    case ParamExpr::Op::kMetric:
      j["name"] = e.name;
      if (e.fallback) j["default"] = param_value_to_json(*e.fallback);
      break;
    default: {
      Json args = Json::array();
      for (const auto& a : e.args) args.push_back(param_expr_to_json(a));
      j["args"] = std::move(args);
    }
  }
  return j;
}

ParamExpr param_expr_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  const std::string op = get_string(required(j, "op", path), path + ".op");
  ParamExpr e;
  bool found = false;
  for (const auto& [value, text] : kParamOps) {
    if (text == op) {
      e.op = value;
      found = true;
    }
  }
  if (!found) fail(path + ".op", "unknown parameter operator '" + op + "'");
  switch (e.op) {
    case ParamExpr::Op::kLiteral:
      expect_object(j, path, {"op", "value"});
      e.literal = param_value_from_json(required(j, "value", path), path + ".value");
      break;
    case ParamExpr::Op::kBinding:
    case ParamExpr::Op::kMetric:
      expect_object(j, path, {"op", "name", "default"});
      e.name = get_string(required(j, "name", path), path + ".name");
      if (const Json* d = field(j, "default")) {
        e.fallback = param_value_from_json(*d, path + ".default");
      }
      break;
    default: {
      expect_object(j, path, {"op", "args"});
      const Json& args = required(j, "args", path);
      if (!args.is_array() || args.size() != 2) {
        fail(path + ".args", "expected an array of two operands");
      }
      for (std::size_t i = 0; i < 2; ++i) {
        e.args.push_back(param_expr_from_json(args[i], path + ".args[" + std::to_string(i) + "]"));
      }
    }
  }
  return e;
}

Json template_to_json(const WorkTemplate& t) {
  Json params = Json::array();
  for (const auto& slot : t.parameters) {
    Json s = {{"name", slot.name}, {"type", to_string(slot.type)}};
    if (slot.default_value) s["default"] = param_value_to_json(*slot.default_value);
    params.push_back(std::move(s));
  }
  return {
      {"name", t.name},
      {"work_kind", to_string(t.work_kind)},
      {"parameters", std::move(params)},
      {"input_spec", spec_to_json(t.input_spec)},
      {"output_spec", spec_to_json(t.output_spec)},
      {"executable_spec", t.executable_spec},
      {"is_entry", t.is_entry},
      {"max_instantiations", t.max_instantiations},
      {"delivery",
       {{"granularity", to_string(t.delivery.granularity)},
        {"prompt_release", t.delivery.prompt_release},
        {"bundle_size", t.delivery.bundle_size}}},
  };
}

WorkTemplate template_from_json(const Json& j, const std::string& path) {
  expect_object(j, path,
                {"name", "work_kind", "parameters", "input_spec", "output_spec",
                 "executable_spec", "is_entry", "max_instantiations", "delivery"});
  WorkTemplate t;
  t.name = get_string(required(j, "name", path), path + ".name");
  if (const Json* k = field(j, "work_kind")) {
    const std::string kind = get_string(*k, path + ".work_kind");
    if (kind == "Processing") {
      t.work_kind = WorkKind::kProcessing;
    } else if (kind == "DecisionMaking") {
      t.work_kind = WorkKind::kDecisionMaking;
    } else {
      fail(path + ".work_kind", "expected Processing or DecisionMaking");
    }
  }
  if (const Json* params = field(j, "parameters")) {
    if (!params->is_array()) fail(path + ".parameters", "expected an array");
    for (std::size_t i = 0; i < params->size(); ++i) {
      const std::string p = path + ".parameters[" + std::to_string(i) + "]";
      const Json& s = (*params)[i];
      expect_object(s, p, {"name", "type", "default"});
      ParamSlot slot;
      slot.name = get_string(required(s, "name", p), p + ".name");
      const std::string type = get_string(required(s, "type", p), p + ".type");
      auto parsed = param_type_from_string(type);
      if (!parsed) fail(p + ".type", "unknown parameter type '" + type + "'");
      slot.type = *parsed;
      if (const Json* d = field(s, "default")) {
        slot.default_value = param_value_from_json(*d, p + ".default");
      }
      t.parameters.push_back(std::move(slot));
    }
  }
  if (const Json* in = field(j, "input_spec")) t.input_spec = spec_from_json(*in, path + ".input_spec");
  if (const Json* out = field(j, "output_spec")) {
    t.output_spec = spec_from_json(*out, path + ".output_spec");
  }
  t.executable_spec = optional_string(j, "executable_spec", path);
  if (const Json* e = field(j, "is_entry")) t.is_entry = get_bool(*e, path + ".is_entry");
  if (const Json* m = field(j, "max_instantiations")) {
    t.max_instantiations = get_int(*m, path + ".max_instantiations");
  }
  if (const Json* d = field(j, "delivery")) {
    const std::string p = path + ".delivery";
    expect_object(*d, p, {"granularity", "prompt_release", "bundle_size"});
    if (const Json* g = field(*d, "granularity")) {
      const std::string text = get_string(*g, p + ".granularity");
      if (text == "FileLevel") {
        t.delivery.granularity = Granularity::kFileLevel;
      } else if (text == "DatasetLevel") {
        t.delivery.granularity = Granularity::kDatasetLevel;
      } else {
        fail(p + ".granularity", "expected FileLevel or DatasetLevel");
      }
    }
    if (const Json* r = field(*d, "prompt_release")) {
      t.delivery.prompt_release = get_bool(*r, p + ".prompt_release");
    }
    if (const Json* b = field(*d, "bundle_size")) {
      t.delivery.bundle_size = get_int(*b, p + ".bundle_size");
    }
  }
  return t;
}

Json bindings_to_json(const Bindings& bindings) {
  Json j = Json::object();
  for (const auto& [k, v] : bindings) j[k] = param_value_to_json(v);
  return j;
}

Bindings bindings_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  Bindings out;
  for (const auto& [k, v] : j.items()) out.emplace(k, param_value_from_json(v, path + "." + k));
  return out;
}

}  // namespace

Json param_value_to_json(const ParamValue& value) {
  return std::visit([](const auto& v) { return Json(v); }, value);
}

ParamValue param_value_from_json(const Json& j, const std::string& path) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer() || j.is_number_unsigned()) return get_int(j, path);
  if (j.is_number_float()) {
    const double d = j.get<double>();
    if (!std::isfinite(d)) fail(path, "non-finite number");
    return d;
  }
  if (j.is_string()) return j.get<std::string>();
  fail(path, "expected a scalar value");
}

Json workflow_to_json(const Workflow& wf) {
  Json templates = Json::array();
  for (const auto& t : wf.templates) templates.push_back(template_to_json(t));
  Json conditions = Json::array();
  for (const auto& c : wf.conditions) {
    Json dests = Json::array();
    for (const auto& d : c.destinations) {
      Json map = Json::object();
      for (const auto& [param, expr] : d.param_map) map[param] = param_expr_to_json(expr);
      dests.push_back({{"destination_template", d.template_name}, {"param_map", std::move(map)}});
    }
    conditions.push_back({{"source_template", c.source_template},
                          {"predicate", predicate_to_json(c.predicate)},
                          {"destinations", std::move(dests)}});
  }
  return {{"name", wf.name},
          {"templates", std::move(templates)},
          {"conditions", std::move(conditions)},
          {"initial_bindings", bindings_to_json(wf.initial_bindings)},
          {"max_total_works", wf.max_total_works}};
}

Workflow workflow_from_json(const Json& j, const std::string& path) {
  expect_object(j, path,
                {"name", "templates", "conditions", "initial_bindings", "max_total_works"});
  Workflow wf;
  wf.name = get_string(required(j, "name", path), path + ".name");
  const Json& templates = required(j, "templates", path);
  if (!templates.is_array()) fail(path + ".templates", "expected an array");
  for (std::size_t i = 0; i < templates.size(); ++i) {
    wf.templates.push_back(
        template_from_json(templates[i], path + ".templates[" + std::to_string(i) + "]"));
  }
  if (const Json* conditions = field(j, "conditions")) {
    if (!conditions->is_array()) fail(path + ".conditions", "expected an array");
    for (std::size_t i = 0; i < conditions->size(); ++i) {
      const std::string p = path + ".conditions[" + std::to_string(i) + "]";
      const Json& c = (*conditions)[i];
      expect_object(c, p, {"source_template", "predicate", "destinations"});
      ConditionBranch branch;
      branch.source_template = get_string(required(c, "source_template", p), p + ".source_template");
      if (const Json* pred = field(c, "predicate")) {
        branch.predicate = predicate_from_json(*pred, p + ".predicate");
      }
      const Json& dests = required(c, "destinations", p);
      if (!dests.is_array()) fail(p + ".destinations", "expected an array");
      for (std::size_t k = 0; k < dests.size(); ++k) {
        const std::string dp = p + ".destinations[" + std::to_string(k) + "]";
        expect_object(dests[k], dp, {"destination_template", "param_map"});
        Destination dest;
        dest.template_name =
            get_string(required(dests[k], "destination_template", dp), dp + ".destination_template");
        if (const Json* map = field(dests[k], "param_map")) {
          if (!map->is_object()) fail(dp + ".param_map", "expected an object");
          for (const auto& [param, expr] : map->items()) {
            dest.param_map.emplace(param, param_expr_from_json(expr, dp + ".param_map." + param));
          }
        }
        branch.destinations.push_back(std::move(dest));
      }
      wf.conditions.push_back(std::move(branch));
    }
  }
  if (const Json* b = field(j, "initial_bindings")) {
    wf.initial_bindings = bindings_from_json(*b, path + ".initial_bindings");
  }
  if (const Json* m = field(j, "max_total_works")) {
    wf.max_total_works = get_int(*m, path + ".max_total_works");
  }
  return wf;
}

std::string render_workflow(const Workflow& wf) { return workflow_to_json(wf).dump(); }

Workflow parse_workflow(std::string_view text) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kParse, "workflow: malformed JSON");
  return workflow_from_json(j);
}

Json wire_request_to_json(const WireRequest& request) {
  return {{"wire_version", kWireVersion},
          {"workflow", workflow_to_json(request.workflow)},
          {"consumer", request.consumer}};
}

WireRequest wire_request_from_json(const Json& j) {
  expect_object(j, "$", {"wire_version", "workflow", "consumer"});
  const std::int64_t version = get_int(required(j, "wire_version", "$"), "$.wire_version");
  if (version != kWireVersion) {
    fail("$.wire_version", "unsupported version " + std::to_string(version));
  }
  WireRequest request;
  request.workflow = workflow_from_json(required(j, "workflow", "$"), "$.workflow");
  request.consumer = optional_string(j, "consumer", "$");
  return request;
}

std::string render_wire_request(const WireRequest& request) {
  return wire_request_to_json(request).dump();
}

WireRequest parse_wire_request(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("$: malformed JSON: ") + e.what());
  }
  return wire_request_from_json(j);
}

}  // namespace dds
