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

#include "workflow.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

namespace dds {

namespace {

bool is_numeric(const ParamValue& v) {
  return std::holds_alternative<std::int64_t>(v) ||
         std::holds_alternative<double>(v);
}

double as_double(const ParamValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}

template <class T>
bool apply_compare(PredicateExpr::Op op, const T& lhs, const T& rhs) {
  switch (op) {
    case PredicateExpr::Op::kEq: return lhs == rhs;
    case PredicateExpr::Op::kNe: return lhs != rhs;
    case PredicateExpr::Op::kLt: return lhs < rhs;
    case PredicateExpr::Op::kLe: return lhs <= rhs;
    case PredicateExpr::Op::kGt: return lhs > rhs;
    case PredicateExpr::Op::kGe: return lhs >= rhs;
    default: return false;
  }
}

// Mismatched kinds compare false for every operator, including !=.
bool compare_values(PredicateExpr::Op op, const ParamValue& lhs,
                    const ParamValue& rhs) {
  if (is_numeric(lhs) && is_numeric(rhs)) {
    const auto* li = std::get_if<std::int64_t>(&lhs);
    const auto* ri = std::get_if<std::int64_t>(&rhs);
    if (li && ri) return apply_compare(op, *li, *ri);
    const double l = as_double(lhs);
    const double r = as_double(rhs);
    if (std::isnan(l) || std::isnan(r)) return false;
    return apply_compare(op, l, r);
  }
  if (std::holds_alternative<std::string>(lhs) &&
      std::holds_alternative<std::string>(rhs)) {
    return apply_compare(op, std::get<std::string>(lhs), std::get<std::string>(rhs));
  }
  if (std::holds_alternative<bool>(lhs) && std::holds_alternative<bool>(rhs)) {
    if (op != PredicateExpr::Op::kEq && op != PredicateExpr::Op::kNe) return false;
    return apply_compare(op, std::get<bool>(lhs), std::get<bool>(rhs));
  }
  return false;
}

std::optional<ParamValue> lookup(const ValueRef& ref, const Work& source) {
  switch (ref.kind) {
    case ValueRef::Kind::kStatus:
      return ParamValue{std::string(to_string(source.status))};
    case ValueRef::Kind::kMetric: {
      auto it = source.output_metrics.find(ref.name);
      if (it == source.output_metrics.end()) return std::nullopt;
      return ParamValue{it->second};
    }
    case ValueRef::Kind::kBinding: {
      auto it = source.bindings.find(ref.name);
      if (it == source.bindings.end()) return std::nullopt;
      return it->second;
    }
  }
  return std::nullopt;
}

ParamValue evaluate_param(const ParamExpr& expr, const Work& source) {
  switch (expr.op) {
    case ParamExpr::Op::kLiteral:
      return expr.literal;
    case ParamExpr::Op::kBinding: {
      auto it = source.bindings.find(expr.name);
      if (it != source.bindings.end()) return it->second;
      if (expr.fallback) return *expr.fallback;
      throw Error(ErrorCode::kTypeMismatch,
                  "binding '" + expr.name + "' is absent on " + source.work_id);
    }
    case ParamExpr::Op::kMetric: {
      auto it = source.output_metrics.find(expr.name);
      if (it != source.output_metrics.end()) return it->second;
      if (expr.fallback) return *expr.fallback;
      throw Error(ErrorCode::kTypeMismatch,
                  "metric '" + expr.name + "' is absent on " + source.work_id);
    }
    case ParamExpr::Op::kAdd:
    case ParamExpr::Op::kSub:
    case ParamExpr::Op::kMul: {
      if (expr.args.size() != 2) {
        throw Error(ErrorCode::kTypeMismatch, "arithmetic needs two operands");
      }
      const ParamValue lhs = evaluate_param(expr.args[0], source);
      const ParamValue rhs = evaluate_param(expr.args[1], source);
      if (expr.op == ParamExpr::Op::kAdd && std::holds_alternative<std::string>(lhs) &&
          std::holds_alternative<std::string>(rhs)) {
        return std::get<std::string>(lhs) + std::get<std::string>(rhs);
      }
      if (!is_numeric(lhs) || !is_numeric(rhs)) {
        throw Error(ErrorCode::kTypeMismatch, "arithmetic on non-numeric operands");
      }
      const auto* li = std::get_if<std::int64_t>(&lhs);
      const auto* ri = std::get_if<std::int64_t>(&rhs);
      if (li && ri) {
        switch (expr.op) {
          case ParamExpr::Op::kAdd: return *li + *ri;
          case ParamExpr::Op::kSub: return *li - *ri;
          default: return *li * *ri;
        }
      }
      const double l = as_double(lhs);
      const double r = as_double(rhs);
      switch (expr.op) {
        case ParamExpr::Op::kAdd: return l + r;
        case ParamExpr::Op::kSub: return l - r;
        default: return l * r;
      }
    }
  }
  throw Error(ErrorCode::kTypeMismatch, "unknown parameter expression");
}

void check_placeholders(const WorkTemplate& tmpl, std::string_view field,
                        std::string_view text, ValidationReport& report) {
  for (const auto& name : placeholders(text)) {
    if (tmpl.find_slot(name) == nullptr) {
      report.violations.push_back(
          {"unknown-placeholder", "template '" + tmpl.name + "' " + std::string(field) +
                                      " uses undeclared %{" + name + "}"});
    }
  }
}

void check_predicate_refs(const PredicateExpr& p, const WorkTemplate& source,
                          ValidationReport& report) {
  if (p.op >= PredicateExpr::Op::kEq && p.op <= PredicateExpr::Op::kGe &&
      p.ref.kind == ValueRef::Kind::kBinding && source.find_slot(p.ref.name) == nullptr) {
    report.violations.push_back({"unknown-binding", "predicate on '" + source.name +
                                                        "' reads undeclared binding '" +
                                                        p.ref.name + "'"});
  }
  for (const auto& arg : p.args) check_predicate_refs(arg, source, report);
}

void check_param_expr_refs(const ParamExpr& e, const WorkTemplate& source,
                           ValidationReport& report) {
  if (e.op == ParamExpr::Op::kBinding && !e.fallback &&
      source.find_slot(e.name) == nullptr) {
    report.violations.push_back({"unknown-binding", "parameter map reads binding '" +
                                                        e.name + "' undeclared on '" +
                                                        source.name + "'"});
  }
  for (const auto& arg : e.args) check_param_expr_refs(arg, source, report);
}

}  // namespace

std::string_view to_string(ParamType type) {
  switch (type) {
    case ParamType::kInt: return "int";
    case ParamType::kFloat: return "float";
    case ParamType::kString: return "string";
    case ParamType::kBool: return "bool";
  }
  return "string";
}

std::optional<ParamType> param_type_from_string(std::string_view text) {
  if (text == "int") return ParamType::kInt;
  if (text == "float") return ParamType::kFloat;
  if (text == "string") return ParamType::kString;
  if (text == "bool") return ParamType::kBool;
  return std::nullopt;
}

ParamType type_of(const ParamValue& value) {
  switch (value.index()) {
    case 0: return ParamType::kInt;
    case 1: return ParamType::kFloat;
    case 2: return ParamType::kString;
    default: return ParamType::kBool;
  }
}

std::string render_value(const ParamValue& value) {
  if (const auto* i = std::get_if<std::int64_t>(&value)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&value)) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), *d);
    if (ec != std::errc()) return "nan";
    return std::string(buf, end);
  }
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  return std::get<bool>(value) ? "true" : "false";
}

std::optional<ParamValue> coerce(const ParamValue& value, ParamType type) {
  const ParamType actual = type_of(value);
  if (actual == type) return value;
  if (type == ParamType::kFloat && actual == ParamType::kInt) {
    return static_cast<double>(std::get<std::int64_t>(value));
  }
  if (type == ParamType::kInt && actual == ParamType::kFloat) {
    const double d = std::get<double>(value);
    if (std::isfinite(d) && std::trunc(d) == d && std::fabs(d) < 9.0e15) {
      return static_cast<std::int64_t>(d);
    }
  }
  return std::nullopt;
}

std::string_view to_string(WorkKind kind) {
  return kind == WorkKind::kProcessing ? "Processing" : "DecisionMaking";
}

std::string_view to_string(Granularity granularity) {
  return granularity == Granularity::kFileLevel ? "FileLevel" : "DatasetLevel";
}

const ParamSlot* WorkTemplate::find_slot(std::string_view slot) const {
  for (const auto& p : parameters) {
    if (p.name == slot) return &p;
  }
  return nullptr;
}

std::string_view to_string(WorkStatus status) {
  switch (status) {
    case WorkStatus::kNew: return "New";
    case WorkStatus::kActivated: return "Activated";
    case WorkStatus::kRunning: return "Running";
    case WorkStatus::kTerminating: return "Terminating";
    case WorkStatus::kFinished: return "Finished";
    case WorkStatus::kSubFinished: return "SubFinished";
    case WorkStatus::kFailed: return "Failed";
  }
  return "New";
}

std::optional<WorkStatus> work_status_from_string(std::string_view text) {
  for (auto s : {WorkStatus::kNew, WorkStatus::kActivated, WorkStatus::kRunning,
                 WorkStatus::kTerminating, WorkStatus::kFinished,
                 WorkStatus::kSubFinished, WorkStatus::kFailed}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

bool is_terminal(WorkStatus status) {
  return status == WorkStatus::kFinished || status == WorkStatus::kSubFinished ||
         status == WorkStatus::kFailed;
}

bool is_legal_transition(WorkStatus from, WorkStatus to) {
  switch (from) {
    case WorkStatus::kNew: return to == WorkStatus::kActivated;
    case WorkStatus::kActivated: return to == WorkStatus::kRunning;
    case WorkStatus::kRunning: return to == WorkStatus::kTerminating;
    case WorkStatus::kTerminating: return is_terminal(to);
    default: return false;
  }
}

PredicateExpr PredicateExpr::always(bool value) {
  PredicateExpr p;
  p.op = Op::kConst;
  p.constant = value;
  return p;
}

PredicateExpr PredicateExpr::compare(Op op, ValueRef ref, ParamValue literal) {
  PredicateExpr p;
  p.op = op;
  p.ref = std::move(ref);
  p.literal = std::move(literal);
  return p;
}

PredicateExpr PredicateExpr::all_of(std::vector<PredicateExpr> terms) {
  PredicateExpr p;
  p.op = Op::kAnd;
  p.args = std::move(terms);
  return p;
}

PredicateExpr PredicateExpr::any_of(std::vector<PredicateExpr> terms) {
  PredicateExpr p;
  p.op = Op::kOr;
  p.args = std::move(terms);
  return p;
}

PredicateExpr PredicateExpr::negate(PredicateExpr term) {
  PredicateExpr p;
  p.op = Op::kNot;
  p.args.push_back(std::move(term));
  return p;
}

ParamExpr ParamExpr::constant(ParamValue value) {
  ParamExpr e;
  e.op = Op::kLiteral;
  e.literal = std::move(value);
  return e;
}

ParamExpr ParamExpr::binding(std::string name) {
  ParamExpr e;
  e.op = Op::kBinding;
  e.name = std::move(name);
  return e;
}

ParamExpr ParamExpr::metric(std::string name, std::optional<ParamValue> fallback) {
  ParamExpr e;
  e.op = Op::kMetric;
  e.name = std::move(name);
  e.fallback = std::move(fallback);
  return e;
}

ParamExpr ParamExpr::arithmetic(Op op, ParamExpr lhs, ParamExpr rhs) {
  ParamExpr e;
  e.op = op;
  e.args.push_back(std::move(lhs));
  e.args.push_back(std::move(rhs));
  return e;
}

const WorkTemplate* Workflow::find_template(std::string_view template_name) const {
  for (const auto& t : templates) {
    if (t.name == template_name) return &t;
  }
  return nullptr;
}

std::size_t ValidationReport::count(std::string_view kind) const {
  return static_cast<std::size_t>(std::count_if(
      violations.begin(), violations.end(),
      [&](const Violation& v) { return v.kind == kind; }));
}

Json ValidationReport::to_json() const {
  Json out = Json::array();
  for (const auto& v : violations) out.push_back({{"kind", v.kind}, {"message", v.message}});
  return out;
}

ValidationReport validate_workflow(const Workflow& wf) {
  ValidationReport report;
  auto add = [&](std::string kind, std::string message) {
    report.violations.push_back({std::move(kind), std::move(message)});
  };

  if (wf.templates.empty()) add("no-templates", "workflow declares no templates");

  std::set<std::string> names;
  std::int64_t entries = 0;
  for (const auto& t : wf.templates) {
    if (t.name.empty()) add("invalid-name", "template with empty name");
    if (!names.insert(t.name).second) {
      add("duplicate-template", "template '" + t.name + "' declared twice");
    }
    if (t.is_entry) ++entries;
    if (t.max_instantiations < 1) {
      add("invalid-cap", "template '" + t.name + "' max_instantiations < 1");
    }
    if (t.delivery.bundle_size < 1) {
      add("invalid-cap", "template '" + t.name + "' bundle_size < 1");
    }
    std::set<std::string> slots;
    for (const auto& slot : t.parameters) {
      if (!slots.insert(slot.name).second) {
        add("duplicate-parameter", "template '" + t.name + "' declares '" + slot.name +
                                       "' twice");
      }
      if (slot.default_value && !coerce(*slot.default_value, slot.type)) {
        add("type-mismatch", "default of '" + t.name + "." + slot.name + "' is not " +
                                 std::string(to_string(slot.type)));
      }
      auto init = wf.initial_bindings.find(slot.name);
      if (init != wf.initial_bindings.end() && !coerce(init->second, slot.type)) {
        add("type-mismatch", "initial binding '" + slot.name + "' does not fit " +
                                 t.name + "." + slot.name);
      }
    }
    check_placeholders(t, "input_spec", t.input_spec.scope, report);
    check_placeholders(t, "input_spec", t.input_spec.name, report);
    check_placeholders(t, "output_spec", t.output_spec.scope, report);
    check_placeholders(t, "output_spec", t.output_spec.name, report);
    check_placeholders(t, "executable_spec", t.executable_spec, report);
  }
  if (!wf.templates.empty() && entries == 0) {
    add("no-entry", "no template is marked as an entry point");
  }
  if (wf.max_total_works < 1 || wf.max_total_works < entries) {
    add("invalid-cap", "max_total_works is smaller than the number of entry templates");
  }

  for (std::size_t b = 0; b < wf.conditions.size(); ++b) {
    const auto& cond = wf.conditions[b];
    const WorkTemplate* source = wf.find_template(cond.source_template);
    if (source == nullptr) {
      add("unknown-template", "condition " + std::to_string(b) + " has unknown source '" +
                                  cond.source_template + "'");
    } else {
      check_predicate_refs(cond.predicate, *source, report);
    }
    for (const auto& dest : cond.destinations) {
      const WorkTemplate* target = wf.find_template(dest.template_name);
      if (target == nullptr) {
        add("unknown-template", "condition " + std::to_string(b) +
                                    " has unknown destination '" + dest.template_name +
                                    "'");
        continue;
      }
      for (const auto& [param, expr] : dest.param_map) {
        const ParamSlot* slot = target->find_slot(param);
        if (slot == nullptr) {
          add("unknown-parameter", "condition " + std::to_string(b) + " maps undeclared '" +
                                       target->name + "." + param + "'");
          continue;
        }
        if (expr.op == ParamExpr::Op::kLiteral && !coerce(expr.literal, slot->type)) {
          add("type-mismatch", "condition " + std::to_string(b) + " literal for '" +
                                   target->name + "." + param + "' is not " +
                                   std::string(to_string(slot->type)));
        }
        if (source != nullptr) check_param_expr_refs(expr, *source, report);
      }
      for (const auto& slot : target->parameters) {
        if (!slot.default_value && dest.param_map.count(slot.name) == 0) {
          add("unbound-parameter", "condition " + std::to_string(b) + " leaves '" +
                                       target->name + "." + slot.name + "' unbound");
        }
      }
    }
  }
  return report;
}

std::vector<Work> instantiate_entry_works(const Workflow& wf, std::string_view id_namespace) {
  std::vector<Work> works;
  for (const auto& t : wf.templates) {
    if (!t.is_entry) continue;
    Work w;
    w.work_id = id_namespace.empty() ? t.name + ".0"
                                     : std::string(id_namespace) + "/" + t.name + ".0";
    w.template_name = t.name;
    w.generation = 0;
    for (const auto& slot : t.parameters) {
      std::optional<ParamValue> value;
      if (auto it = wf.initial_bindings.find(slot.name); it != wf.initial_bindings.end()) {
        value = coerce(it->second, slot.type);
        if (!value) {
          throw Error(ErrorCode::kTypeMismatch,
                      "initial binding '" + slot.name + "' does not fit " + t.name);
        }
      } else if (slot.default_value) {
        value = coerce(*slot.default_value, slot.type);
      }
      if (!value) {
        throw Error(ErrorCode::kMissingBinding,
                    "entry template '" + t.name + "' has no value for '" + slot.name + "'");
      }
      w.bindings.emplace(slot.name, *value);
    }
    works.push_back(std::move(w));
  }
  return works;
}

bool evaluate_predicate(const PredicateExpr& predicate, const Work& source) {
  using Op = PredicateExpr::Op;
  switch (predicate.op) {
    case Op::kConst:
      return predicate.constant;
    case Op::kAnd:
      return std::all_of(predicate.args.begin(), predicate.args.end(),
                         [&](const PredicateExpr& a) { return evaluate_predicate(a, source); });
    case Op::kOr:
      return std::any_of(predicate.args.begin(), predicate.args.end(),
                         [&](const PredicateExpr& a) { return evaluate_predicate(a, source); });
    case Op::kNot:
      return !predicate.args.empty() && !evaluate_predicate(predicate.args.front(), source);
    default: {
      auto value = lookup(predicate.ref, source);
      if (!value) return false;
      return compare_values(predicate.op, *value, predicate.literal);
    }
  }
}

ConditionOutcome evaluate_conditions(
    const Workflow& wf, const Work& terminated,
    const std::map<std::string, std::int64_t>& existing_count_per_template) {
  ConditionOutcome outcome;
  std::map<std::string, std::int64_t> counts = existing_count_per_template;
  std::int64_t total = 0;
  for (const auto& [name, n] : counts) total += n;

  const auto slash = terminated.work_id.rfind('/');
  const std::string ns =
      slash == std::string::npos ? std::string() : terminated.work_id.substr(0, slash + 1);

  for (std::size_t b = 0; b < wf.conditions.size(); ++b) {
    const auto& cond = wf.conditions[b];
    if (cond.source_template != terminated.template_name) continue;
    if (!evaluate_predicate(cond.predicate, terminated)) continue;
    for (std::size_t d = 0; d < cond.destinations.size(); ++d) {
      const auto& dest = cond.destinations[d];
      const WorkTemplate* target = wf.find_template(dest.template_name);
      if (target == nullptr) {
        outcome.suppressed.push_back({b, dest.template_name, "unknown template"});
        continue;
      }
      if (counts[target->name] >= target->max_instantiations) {
        outcome.suppressed.push_back({b, target->name, "max_instantiations"});
        continue;
      }
      if (total >= wf.max_total_works) {
        outcome.suppressed.push_back({b, target->name, "max_total_works"});
        continue;
      }
      Work w;
      w.template_name = target->name;
      w.generation = terminated.generation + 1;
      w.parent_work_id = terminated.work_id;
      w.work_id = ns + target->name + "." +
                  hex64(fnv1a(terminated.work_id + "#" + std::to_string(b) + "." +
                              std::to_string(d)));
      for (const auto& slot : target->parameters) {
        std::optional<ParamValue> value;
        if (auto it = dest.param_map.find(slot.name); it != dest.param_map.end()) {
          value = coerce(evaluate_param(it->second, terminated), slot.type);
          if (!value) {
            throw Error(ErrorCode::kTypeMismatch, "value for '" + target->name + "." +
                                                      slot.name + "' is not " +
                                                      std::string(to_string(slot.type)));
          }
        } else if (slot.default_value) {
          value = coerce(*slot.default_value, slot.type);
        }
        if (!value) {
          throw Error(ErrorCode::kMissingBinding,
                      "no value for '" + target->name + "." + slot.name + "'");
        }
        w.bindings.emplace(slot.name, *value);
      }
      ++counts[target->name];
      ++total;
      outcome.works.push_back(std::move(w));
    }
  }
  return outcome;
}

std::vector<std::string> placeholders(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = text.find("%{", pos)) != std::string_view::npos) {
    const auto close = text.find('}', pos + 2);
    if (close == std::string_view::npos) break;
    out.emplace_back(text.substr(pos + 2, close - pos - 2));
    pos = close + 1;
  }
  return out;
}

std::string substitute_params(std::string_view template_text, const Bindings& bindings) {
  std::string out;
  out.reserve(template_text.size());
  std::size_t pos = 0;
  while (pos < template_text.size()) {
    const auto open = template_text.find("%{", pos);
    if (open == std::string_view::npos) break;
    const auto close = template_text.find('}', open + 2);
    if (close == std::string_view::npos) break;
    out.append(template_text.substr(pos, open - pos));
    const std::string name(template_text.substr(open + 2, close - open - 2));
    auto it = bindings.find(name);
    if (it == bindings.end()) {
      throw Error(ErrorCode::kMissingBinding, "unresolved placeholder %{" + name + "}");
    }
    out += render_value(it->second);
    pos = close + 1;
  }
  out.append(template_text.substr(pos));
  return out;
}

}  // namespace dds
