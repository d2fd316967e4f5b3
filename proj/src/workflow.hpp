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

// Directed-graph workflow programs: templates, parameters, condition
// branches, and the pure evaluation engine that instantiates Work objects.
//
// Everything in this header is immutable data plus side-effect-free
// functions; it is safe to call from any number of daemon threads.

#ifndef DDS_SRC_WORKFLOW_HPP_
#define DDS_SRC_WORKFLOW_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "common.hpp"

namespace dds {

using ParamValue = std::variant<std::int64_t, double, std::string, bool>;
using Bindings = std::map<std::string, ParamValue>;
using Metrics = std::map<std::string, double>;

enum class ParamType { kInt, kFloat, kString, kBool };

std::string_view to_string(ParamType type);
std::optional<ParamType> param_type_from_string(std::string_view text);
ParamType type_of(const ParamValue& value);

// Canonical text rendering used by placeholder substitution: integers in
// decimal, floats in shortest round-trip form, booleans as true/false.
std::string render_value(const ParamValue& value);

// Converts `value` to `type` when the conversion is lossless (int -> float,
// integral float -> int); nullopt otherwise.
std::optional<ParamValue> coerce(const ParamValue& value, ParamType type);

struct ParamSlot {
  std::string name;
  ParamType type = ParamType::kString;
  std::optional<ParamValue> default_value;

  bool operator==(const ParamSlot&) const = default;
};

struct CollectionSpec {
  std::string scope;
  std::string name;

  bool operator==(const CollectionSpec&) const = default;
};

enum class WorkKind { kProcessing, kDecisionMaking };
enum class Granularity { kDatasetLevel, kFileLevel };

std::string_view to_string(WorkKind kind);
std::string_view to_string(Granularity granularity);

// How input contents of a Work are handed to the workload backend.
struct DeliveryPolicy {
  Granularity granularity = Granularity::kFileLevel;
  bool prompt_release = true;
  std::int64_t bundle_size = 1;

  bool operator==(const DeliveryPolicy&) const = default;
};

inline constexpr std::int64_t kDefaultMaxInstantiations = 100;
inline constexpr std::int64_t kDefaultMaxTotalWorks = 10000;

struct WorkTemplate {
  std::string name;
  WorkKind work_kind = WorkKind::kProcessing;
  std::vector<ParamSlot> parameters;
  CollectionSpec input_spec;
  CollectionSpec output_spec;
  std::string executable_spec;
  bool is_entry = false;
  std::int64_t max_instantiations = kDefaultMaxInstantiations;
  DeliveryPolicy delivery;

  const ParamSlot* find_slot(std::string_view slot) const;
  bool operator==(const WorkTemplate&) const = default;
};

enum class WorkStatus {
  kNew,
  kActivated,
  kRunning,
  kTerminating,
  kFinished,
  kSubFinished,
  kFailed,
};

std::string_view to_string(WorkStatus status);
std::optional<WorkStatus> work_status_from_string(std::string_view text);
bool is_terminal(WorkStatus status);
bool is_legal_transition(WorkStatus from, WorkStatus to);

struct Work {
  std::string work_id;
  std::string template_name;
  Bindings bindings;
  WorkStatus status = WorkStatus::kNew;
  Metrics output_metrics;
  std::int64_t generation = 0;
  // Lineage; empty for entry works.
  std::string parent_work_id;

  bool operator==(const Work&) const = default;
};

// A value a predicate can inspect on the terminated source Work.
struct ValueRef {
  enum class Kind { kStatus, kMetric, kBinding };
  Kind kind = Kind::kStatus;
  std::string name;

  bool operator==(const ValueRef&) const = default;
};

struct PredicateExpr {
  enum class Op { kConst, kEq, kNe, kLt, kLe, kGt, kGe, kAnd, kOr, kNot };

  Op op = Op::kConst;
  bool constant = true;
  ValueRef ref;
  ParamValue literal = std::int64_t{0};
  std::vector<PredicateExpr> args;

  static PredicateExpr always(bool value);
  static PredicateExpr compare(Op op, ValueRef ref, ParamValue literal);
  static PredicateExpr all_of(std::vector<PredicateExpr> terms);
  static PredicateExpr any_of(std::vector<PredicateExpr> terms);
  static PredicateExpr negate(PredicateExpr term);

  bool operator==(const PredicateExpr&) const = default;
};

// Computes a destination parameter from the terminated source Work.
struct ParamExpr {
  enum class Op { kLiteral, kBinding, kMetric, kAdd, kSub, kMul };

  Op op = Op::kLiteral;
  std::string name;
  ParamValue literal = std::int64_t{0};
  // Used by kBinding/kMetric when the referenced value is absent.
  std::optional<ParamValue> fallback;
  std::vector<ParamExpr> args;

  static ParamExpr constant(ParamValue value);
  static ParamExpr binding(std::string name);
  static ParamExpr metric(std::string name,
                          std::optional<ParamValue> fallback = std::nullopt);
  static ParamExpr arithmetic(Op op, ParamExpr lhs, ParamExpr rhs);

  bool operator==(const ParamExpr&) const = default;
};

struct Destination {
  std::string template_name;
  std::map<std::string, ParamExpr> param_map;

  bool operator==(const Destination&) const = default;
};

struct ConditionBranch {
  std::string source_template;
  PredicateExpr predicate;
  std::vector<Destination> destinations;

  bool operator==(const ConditionBranch&) const = default;
};

struct Workflow {
  std::string name;
  std::vector<WorkTemplate> templates;
  std::vector<ConditionBranch> conditions;
  Bindings initial_bindings;
  std::int64_t max_total_works = kDefaultMaxTotalWorks;

  const WorkTemplate* find_template(std::string_view template_name) const;
  bool operator==(const Workflow&) const = default;
};

struct Violation {
  std::string kind;
  std::string message;

  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::size_t count(std::string_view kind) const;
  Json to_json() const;
};

struct Suppression {
  std::size_t branch_index = 0;
  std::string destination_template;
  std::string reason;
};

struct ConditionOutcome {
  std::vector<Work> works;
  std::vector<Suppression> suppressed;
};

// Lists every structural problem; never throws.
ValidationReport validate_workflow(const Workflow& wf);

// One New, generation-0 Work per entry template. Work ids are
// "<id_namespace>/<template>.0". Throws Error(kMissingBinding).
std::vector<Work> instantiate_entry_works(const Workflow& wf,
                                          std::string_view id_namespace = {});

// Fires the condition branches of `terminated`. Generated ids are a
// deterministic function of the parent id, branch and destination index, so
// re-evaluating the same Work yields the same ids.
// Throws Error(kTypeMismatch) when a mapped value does not fit its slot.
ConditionOutcome evaluate_conditions(
    const Workflow& wf, const Work& terminated,
    const std::map<std::string, std::int64_t>& existing_count_per_template);

bool evaluate_predicate(const PredicateExpr& predicate, const Work& source);

// Single-pass `%{name}` replacement. Throws Error(kMissingBinding).
std::string substitute_params(std::string_view template_text,
                              const Bindings& bindings);

// Placeholder names appearing in `text`, in order of appearance.
std::vector<std::string> placeholders(std::string_view text);

}  // namespace dds

#endif  // DDS_SRC_WORKFLOW_HPP_
