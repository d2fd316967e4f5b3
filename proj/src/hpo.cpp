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

#include "hpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "json_util.hpp"
#include "wire.hpp"

namespace dds {
namespace {

using namespace json_util;

double param(const HpoTaskSpec& spec, const std::string& name, double fallback) {
  auto it = spec.sampler_params.find(name);
  return it == spec.sampler_params.end() ? fallback : it->second;
}

std::string_view kind_name(Dimension::Kind k) {
  switch (k) {
    case Dimension::Kind::kContinuous: return "continuous";
    case Dimension::Kind::kInteger: return "integer";
    case Dimension::Kind::kCategorical: return "categorical";
  }
  return "?";
}

Json uniform_value(const Dimension& d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (d.kind) {
    case Dimension::Kind::kContinuous:
      return d.lo + u(rng) * (d.hi - d.lo);
    case Dimension::Kind::kInteger: {
      std::uniform_int_distribution<std::int64_t> pick(static_cast<std::int64_t>(d.lo),
                                                       static_cast<std::int64_t>(d.hi));
      return pick(rng);
    }
    case Dimension::Kind::kCategorical: {
      std::uniform_int_distribution<std::size_t> pick(0, d.values.size() - 1);
      return d.values[pick(rng)];
    }
  }
  return nullptr;
}

std::vector<Json> grid_axis(const HpoTaskSpec& spec, const Dimension& d) {
  const auto r = static_cast<std::int64_t>(param(spec, "resolution", 5));
  std::vector<Json> axis;
  switch (d.kind) {
    case Dimension::Kind::kContinuous:
      if (r == 1) {
        axis.emplace_back((d.lo + d.hi) / 2);
      } else {
        for (std::int64_t i = 0; i < r; ++i) {
          axis.emplace_back(i == r - 1 ? d.hi : d.lo + static_cast<double>(i) * (d.hi - d.lo) / static_cast<double>(r - 1));
        }
      }
      break;
    case Dimension::Kind::kInteger: {
      const auto lo = static_cast<std::int64_t>(d.lo);
      const auto hi = static_cast<std::int64_t>(d.hi);
      if (hi - lo + 1 <= r) {
        for (std::int64_t v = lo; v <= hi; ++v) axis.emplace_back(v);
      } else if (r == 1) {
        axis.emplace_back(lo + (hi - lo) / 2);
      } else {
        std::int64_t last = std::numeric_limits<std::int64_t>::min();
        for (std::int64_t i = 0; i < r; ++i) {
          const auto v = static_cast<std::int64_t>(
              std::llround(static_cast<double>(lo) + static_cast<double>(i * (hi - lo)) / static_cast<double>(r - 1)));
          if (v != last) axis.emplace_back(v);
          last = v;
        }
      }
      break;
    }
    case Dimension::Kind::kCategorical:
      axis = d.values;
      break;
  }
  return axis;
}

Json grid_point(const HpoTaskSpec& spec, std::int64_t index) {
  // Row-major: the first dimension varies slowest.
  Json values = Json::object();
  const auto& dims = spec.space.dimensions;
  for (std::size_t k = dims.size(); k-- > 0;) {
    const auto axis = grid_axis(spec, dims[k]);
    const auto n = static_cast<std::int64_t>(axis.size());
    values[dims[k].name] = axis[static_cast<std::size_t>(index % n)];
    index /= n;
  }
  return values;
}

Json mutate(const HpoTaskSpec& spec, const Json& parent, std::mt19937_64& rng) {
  Json child = Json::object();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& d : spec.space.dimensions) {
    const double sigma = param(spec, "sigma", 0.1 * (d.hi - d.lo));
    const Json& pv = parent.at(d.name);
    switch (d.kind) {
      case Dimension::Kind::kContinuous: {
        std::normal_distribution<double> n(0.0, sigma);
        child[d.name] = std::clamp(pv.get<double>() + n(rng), d.lo, d.hi);
        break;
      }
      case Dimension::Kind::kInteger: {
        std::normal_distribution<double> n(0.0, sigma);
        const double x = std::clamp(static_cast<double>(pv.get<std::int64_t>()) + n(rng), d.lo, d.hi);
        child[d.name] = static_cast<std::int64_t>(std::llround(x));
        break;
      }
      case Dimension::Kind::kCategorical: {
        if (u(rng) < param(spec, "p_categorical", 0.2)) {
          child[d.name] = uniform_value(d, rng);
        } else {
          child[d.name] = pv;
        }
        break;
      }
    }
  }
  return child;
}

bool better(const TrialPoint& a, const TrialPoint& b) {
  if (*a.loss != *b.loss) return *a.loss < *b.loss;
  if (a.iteration != b.iteration) return a.iteration < b.iteration;
  return a.point_id < b.point_id;
}

std::int64_t parse_iteration(const std::string& name) {
  const auto dash = name.rfind('-');
  const std::string digits = dash == std::string::npos ? name : name.substr(dash + 1);
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) {
    throw Error(ErrorCode::kNotFound, "not an hpo round: " + name);
  }
  return std::stoll(digits);
}

std::vector<Content> input_contents(const Store& store, const std::string& work_id) {
  Query<Content> q;
  q.owner = input_collection_id(work_id);
  return store.list(q);
}

TrialPoint point_from_content(const Content& c) {
  TrialPoint p;
  p.point_id = c.content_id;
  p.values = c.attributes.value("values", Json::object());
  p.iteration = c.attributes.value("iteration", std::int64_t{0});
  switch (c.status) {
    case ContentStatus::kNew:
    case ContentStatus::kAvailable:
      p.status = PointStatus::kGenerated;
      break;
    case ContentStatus::kDelivered:
      p.status = PointStatus::kDispatched;
      break;
    case ContentStatus::kProcessed:
      p.status = PointStatus::kEvaluated;
      if (auto it = c.attributes.find("loss"); it != c.attributes.end() && it->is_number()) {
        p.loss = it->get<double>();
      }
      break;
    case ContentStatus::kFailed:
      p.status = PointStatus::kLost;
      break;
  }
  return p;
}

Content point_content(const Store& store, const std::string& point_id) {
  auto c = store.find<Content>(point_id);
  if (!c || !c->attributes.contains("values") || !c->attributes.contains("iteration")) {
    throw Error(ErrorCode::kUnknownPoint, "unknown point " + point_id);
  }
  return *c;
}

}  // namespace

std::string_view to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::kRandom: return "random";
    case SamplerKind::kGrid: return "grid";
    case SamplerKind::kEvolutionary: return "evolutionary";
  }
  return "?";
}

std::string_view to_string(PointStatus status) {
  switch (status) {
    case PointStatus::kGenerated: return "Generated";
    case PointStatus::kDispatched: return "Dispatched";
    case PointStatus::kEvaluated: return "Evaluated";
    case PointStatus::kLost: return "Lost";
  }
  return "?";
}

void validate(const HpoTaskSpec& spec) {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::kValidation, m); };
  if (spec.space.dimensions.empty()) bad("search space has no dimensions");
  std::set<std::string> names;
  for (const auto& d : spec.space.dimensions) {
    if (d.name.empty()) bad("dimension without a name");
    if (!names.insert(d.name).second) bad("duplicate dimension " + d.name);
    if (d.kind == Dimension::Kind::kCategorical) {
      if (d.values.empty()) bad(d.name + ": no categorical values");
      for (std::size_t i = 0; i < d.values.size(); ++i) {
        if (!d.values[i].is_primitive() || d.values[i].is_null()) bad(d.name + ": values must be scalars");
        for (std::size_t k = 0; k < i; ++k) {
          if (d.values[k] == d.values[i]) bad(d.name + ": duplicate value " + d.values[i].dump());
        }
      }
    } else {
      if (!std::isfinite(d.lo) || !std::isfinite(d.hi) || !(d.lo < d.hi)) bad(d.name + ": need lo < hi");
      if (d.kind == Dimension::Kind::kInteger &&
          (d.lo != std::floor(d.lo) || d.hi != std::floor(d.hi))) {
        bad(d.name + ": integer bounds must be integral");
      }
    }
  }
  if (spec.points_per_iteration < 1) bad("points_per_iteration must be positive");
  if (spec.max_points < 1) bad("max_points must be positive");
  if (spec.points_per_iteration > spec.max_points) bad("points_per_iteration exceeds max_points");
  if (spec.patience < 0) bad("patience must be non-negative");
  if (param(spec, "resolution", 5) < 1) bad("resolution must be positive");
  if (param(spec, "mu", 1) < 1) bad("mu must be positive");
  if (spec.sampler_params.count("sigma") && !(spec.sampler_params.at("sigma") > 0)) {
    bad("sigma must be positive");
  }
}

Json hpo_spec_to_json(const HpoTaskSpec& spec) {
  Json dims = Json::array();
  for (const auto& d : spec.space.dimensions) {
    Json jd = {{"name", d.name}, {"kind", kind_name(d.kind)}};
    if (d.kind == Dimension::Kind::kCategorical) {
      jd["values"] = d.values;
    } else if (d.kind == Dimension::Kind::kInteger) {
      jd["lo"] = static_cast<std::int64_t>(d.lo);
      jd["hi"] = static_cast<std::int64_t>(d.hi);
    } else {
      jd["lo"] = d.lo;
      jd["hi"] = d.hi;
    }
    dims.push_back(std::move(jd));
  }
  Json params = Json::object();
  for (const auto& [k, v] : spec.sampler_params) params[k] = v;
  return {{"space", dims},
          {"sampler", to_string(spec.sampler)},
          {"sampler_params", params},
          {"points_per_iteration", spec.points_per_iteration},
          {"max_points", spec.max_points},
          {"patience", spec.patience},
          {"seed", spec.seed}};
}

HpoTaskSpec hpo_spec_from_json(const Json& j) {
  const std::string root = "hpo";
  expect_object(j, root,
                {"space", "sampler", "sampler_params", "points_per_iteration", "max_points",
                 "patience", "seed"});
  HpoTaskSpec spec;
  const Json& space = required(j, "space", root);
  if (!space.is_array()) fail(root + ".space", "expected an array");
  for (std::size_t i = 0; i < space.size(); ++i) {
    const std::string path = root + ".space[" + std::to_string(i) + "]";
    const Json& jd = space[i];
    expect_object(jd, path, {"name", "kind", "lo", "hi", "values"});
    Dimension d;
    d.name = get_string(required(jd, "name", path), path + ".name");
    const std::string kind = get_string(required(jd, "kind", path), path + ".kind");
    if (kind == "continuous") {
      d.kind = Dimension::Kind::kContinuous;
    } else if (kind == "integer") {
      d.kind = Dimension::Kind::kInteger;
    } else if (kind == "categorical") {
      d.kind = Dimension::Kind::kCategorical;
    } else {
      fail(path + ".kind", "unknown kind '" + kind + "'");
    }
    if (d.kind == Dimension::Kind::kCategorical) {
      if (field(jd, "lo") || field(jd, "hi")) fail(path, "categorical dimensions take values only");
      const Json& vals = required(jd, "values", path);
      if (!vals.is_array()) fail(path + ".values", "expected an array");
      for (const auto& v : vals) d.values.push_back(v);
      d.lo = 0;
      d.hi = 1;
    } else {
      if (field(jd, "values")) fail(path, "numeric dimensions take lo/hi only");
      d.lo = get_number(required(jd, "lo", path), path + ".lo");
      d.hi = get_number(required(jd, "hi", path), path + ".hi");
    }
    spec.space.dimensions.push_back(std::move(d));
  }
  const std::string sampler = get_string(required(j, "sampler", root), root + ".sampler");
  if (sampler == "random") {
    spec.sampler = SamplerKind::kRandom;
  } else if (sampler == "grid") {
    spec.sampler = SamplerKind::kGrid;
  } else if (sampler == "evolutionary") {
    spec.sampler = SamplerKind::kEvolutionary;
  } else {
    fail(root + ".sampler", "unknown sampler '" + sampler + "'");
  }
  if (const Json* p = field(j, "sampler_params")) {
    if (!p->is_object()) fail(root + ".sampler_params", "expected an object");
    for (const auto& [k, v] : p->items()) {
      spec.sampler_params[k] = get_number(v, root + ".sampler_params." + k);
    }
  }
  spec.points_per_iteration =
      get_int(required(j, "points_per_iteration", root), root + ".points_per_iteration");
  spec.max_points = get_int(required(j, "max_points", root), root + ".max_points");
  if (const Json* p = field(j, "patience")) spec.patience = get_int(*p, root + ".patience");
  if (const Json* p = field(j, "seed")) {
    if (!p->is_number_integer()) fail(root + ".seed", "expected an integer");
    spec.seed = p->is_number_unsigned() ? p->get<std::uint64_t>()
                                        : static_cast<std::uint64_t>(p->get<std::int64_t>());
  }
  return spec;
}

std::int64_t grid_size(const HpoTaskSpec& spec) {
  std::int64_t n = 1;
  for (const auto& d : spec.space.dimensions) {
    n *= static_cast<std::int64_t>(grid_axis(spec, d).size());
  }
  return n;
}

bool point_in_space(const SearchSpace& space, const Json& values) {
  if (!values.is_object() || values.size() != space.dimensions.size()) return false;
  for (const auto& d : space.dimensions) {
    auto it = values.find(d.name);
    if (it == values.end()) return false;
    switch (d.kind) {
      case Dimension::Kind::kContinuous:
        if (!it->is_number() || it->get<double>() < d.lo || it->get<double>() > d.hi) return false;
        break;
      case Dimension::Kind::kInteger:
        if (!it->is_number_integer() || it->get<double>() < d.lo || it->get<double>() > d.hi) {
          return false;
        }
        break;
      case Dimension::Kind::kCategorical:
        if (std::find(d.values.begin(), d.values.end(), *it) == d.values.end()) return false;
        break;
    }
  }
  return true;
}

std::vector<TrialPoint> generate_points(const HpoTaskSpec& spec,
                                        const std::vector<TrialPoint>& history,
                                        std::int64_t iteration) {
  const auto so_far = static_cast<std::int64_t>(history.size());
  std::int64_t n = std::min(spec.points_per_iteration, spec.max_points - so_far);
  if (spec.sampler == SamplerKind::kGrid) {
    const std::int64_t total = grid_size(spec);
    if (so_far >= total) throw Error(ErrorCode::kExhaustedSpace, "grid fully enumerated");
    n = std::min(n, total - so_far);
  }
  std::vector<TrialPoint> out;
  if (n <= 0) return out;

  std::vector<TrialPoint> parents;
  if (spec.sampler == SamplerKind::kEvolutionary) {
    for (const auto& p : history) {
      if (p.status == PointStatus::kEvaluated && p.loss) parents.push_back(p);
    }
    std::sort(parents.begin(), parents.end(), better);
    const auto mu = static_cast<std::size_t>(param(spec, "mu", 1));
    // Too few evaluated points to breed from: fall back to uniform draws.
    if (parents.size() < mu) {
      parents.clear();
    } else {
      parents.resize(mu);
    }
  }

  for (std::int64_t k = 0; k < n; ++k) {
    TrialPoint p;
    char name[48];
    std::snprintf(name, sizeof name, "p%04lld-%04lld", static_cast<long long>(iteration),
                  static_cast<long long>(k));
    p.point_id = name;
    p.iteration = iteration;
    std::mt19937_64 rng(mix_seed(spec.seed, static_cast<std::uint64_t>(so_far + k)));
    if (spec.sampler == SamplerKind::kGrid) {
      p.values = grid_point(spec, so_far + k);
    } else if (!parents.empty()) {
      p.values = mutate(spec, parents[static_cast<std::size_t>(k) % parents.size()].values, rng);
    } else {
      for (const auto& d : spec.space.dimensions) p.values[d.name] = uniform_value(d, rng);
    }
    out.push_back(std::move(p));
  }
  return out;
}

RoundSummary summarize_rounds(const HpoTaskSpec& spec, const std::vector<TrialPoint>& history) {
  RoundSummary s;
  s.points = static_cast<std::int64_t>(history.size());
  std::map<std::int64_t, std::optional<double>> round_best;
  for (const auto& p : history) {
    auto& rb = round_best[p.iteration];
    if (p.status == PointStatus::kEvaluated && p.loss) {
      ++s.evaluated;
      if (!rb || *p.loss < *rb) rb = p.loss;
    } else if (p.status == PointStatus::kLost) {
      ++s.lost;
    }
  }
  for (const auto& [it, rb] : round_best) {
    if (rb && (!s.best_loss || *rb < *s.best_loss)) {
      s.best_loss = rb;
      s.stale_rounds = 0;
    } else {
      ++s.stale_rounds;
    }
  }
  s.exhausted = spec.sampler == SamplerKind::kGrid && s.points >= grid_size(spec);
  s.keep_going = s.points < spec.max_points && s.stale_rounds < spec.patience && !s.exhausted;
  return s;
}

// ---------------------------------------------------------------------------

Workflow build_hpo_workflow(const HpoTaskSpec& spec, const std::string& name) {
  validate(spec);
  const std::int64_t rounds =
      (spec.max_points + spec.points_per_iteration - 1) / spec.points_per_iteration;
  Workflow wf;
  wf.name = name;
  WorkTemplate t;
  t.name = std::string(kHpoTemplate);
  t.parameters.push_back({"iteration", ParamType::kInt, ParamValue{std::int64_t{0}}});
  t.input_spec = {std::string(kHpoScope), "round-%{iteration}"};
  t.output_spec = {std::string(kHpoScope), "losses-%{iteration}"};
  t.executable_spec = hpo_spec_to_json(spec).dump();
  t.is_entry = true;
  t.max_instantiations = rounds;
  wf.templates.push_back(t);
  ConditionBranch next;
  next.source_template = t.name;
  next.predicate = PredicateExpr::compare(PredicateExpr::Op::kEq,
                                          {ValueRef::Kind::kMetric, "continue"},
                                          ParamValue{std::int64_t{1}});
  Destination d;
  d.template_name = t.name;
  d.param_map["iteration"] = ParamExpr::arithmetic(
      ParamExpr::Op::kAdd, ParamExpr::binding("iteration"), ParamExpr::constant(std::int64_t{1}));
  next.destinations.push_back(d);
  wf.conditions.push_back(next);
  wf.max_total_works = rounds;
  return wf;
}

std::vector<TrialPoint> hpo_points(const Store& store, const std::string& task_id) {
  Query<WorkRecord> q;
  q.owner = task_id;
  q.where = [](const WorkRecord& w) { return w.work.template_name == kHpoTemplate; };
  std::vector<TrialPoint> points;
  for (const auto& w : store.list(q)) {
    for (const auto& c : input_contents(store, w.work.work_id)) {
      if (c.attributes.contains("values")) points.push_back(point_from_content(c));
    }
  }
  std::sort(points.begin(), points.end(), [](const TrialPoint& a, const TrialPoint& b) {
    return std::tie(a.iteration, a.point_id) < std::tie(b.iteration, b.point_id);
  });
  return points;
}

std::vector<FileInfo> HpoPointSource::resolve_collection(const CollectionRef& ref) {
  const HpoTaskSpec spec = hpo_spec_from_json(Json::parse(ref.executable));
  const std::int64_t iteration = parse_iteration(ref.name);
  std::vector<TrialPoint> history;
  for (auto& p : hpo_points(store_, ref.request_id)) {
    if (p.iteration < iteration) history.push_back(std::move(p));
  }
  std::vector<TrialPoint> points;
  try {
    points = generate_points(spec, history, iteration);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kExhaustedSpace) throw;
  }
  std::vector<FileInfo> files;
  for (auto& p : points) {
    FileInfo f;
    f.name = p.point_id;
    f.attributes = {{"values", p.values}, {"iteration", p.iteration}};
    files.push_back(std::move(f));
  }
  return files;
}

Metrics HpoPointSource::summarize(const CollectionRef& ref, const std::vector<Content>&) {
  const HpoTaskSpec spec = hpo_spec_from_json(Json::parse(ref.executable));
  const std::int64_t iteration = parse_iteration(ref.name);
  std::vector<TrialPoint> history;
  for (auto& p : hpo_points(store_, ref.request_id)) {
    if (p.iteration <= iteration) history.push_back(std::move(p));
  }
  const RoundSummary s = summarize_rounds(spec, history);
  Metrics m;
  m["continue"] = s.keep_going ? 1 : 0;
  m["points"] = static_cast<double>(s.points);
  m["evaluated"] = static_cast<double>(s.evaluated);
  m["lost"] = static_cast<double>(s.lost);
  m["stale_rounds"] = static_cast<double>(s.stale_rounds);
  if (s.best_loss) m["best_loss"] = *s.best_loss;
  return m;
}

Objective quadratic_objective(double center) {
  return [center](const Json& values) {
    double sum = 0.0;
    for (const auto& [k, v] : values.items()) {
      if (v.is_number()) sum += (v.get<double>() - center) * (v.get<double>() - center);
    }
    return sum;
  };
}

EvaluatorSim::EvaluatorSim(const Clock& clock, EvaluatorSimConfig config, Objective objective)
    : clock_(clock), config_(config), objective_(std::move(objective)) {
  if (config_.min_delay < 0 || config_.max_delay < config_.min_delay) {
    throw Error(ErrorCode::kInvalidArgument, "evaluator delays must satisfy 0 <= min <= max");
  }
  if (!(config_.loss_rate >= 0.0 && config_.loss_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "loss_rate must be within [0, 1]");
  }
}

std::string EvaluatorSim::submit(const JobDescriptor& job) {
  std::lock_guard lock(mu_);
  const std::string id = "ev-" + job.processing_id;
  jobs_.try_emplace(id);
  return id;
}

void EvaluatorSim::add_inputs(const std::string& external_id,
                              const std::vector<DeliveredInput>& inputs) {
  std::lock_guard lock(mu_);
  const Millis now = clock_.now();
  advance(now);
  auto it = jobs_.find(external_id);
  if (it == jobs_.end()) throw Error(ErrorCode::kNotFound, "unknown job " + external_id);
  Job& job = it->second;
  for (const auto& in : inputs) {
    if (!job.seen.insert({in.name, in.attempt}).second) continue;
    const std::uint64_t key = fnv1a(in.name) + static_cast<std::uint64_t>(in.attempt);
    std::mt19937_64 order(mix_seed(config_.order_seed, key));
    std::uniform_int_distribution<Millis> delay(config_.min_delay, config_.max_delay);
    std::mt19937_64 fate(mix_seed(config_.seed, key));
    const bool lost = std::uniform_real_distribution<double>(0.0, 1.0)(fate) < config_.loss_rate;
    Pending p;
    p.at = now + delay(order);
    p.job = external_id;
    p.name = in.name;
    p.event.name = in.name;
    p.event.delivery_attempt = in.attempt;
    p.event.started_at = now;
    p.event.finished_at = p.at;
    if (lost) {
      p.event.state = EventState::kFailed;
    } else {
      p.event.state = EventState::kProcessed;
      p.event.metrics["loss"] = objective_(in.attributes.value("values", Json::object()));
    }
    ++job.pending;
    queue_.push(std::move(p));
  }
}

void EvaluatorSim::advance(Millis now) {
  while (!queue_.empty() && queue_.top().at <= now) {
    Pending p = queue_.top();
    queue_.pop();
    Job& job = jobs_[p.job];
    --job.pending;
    if (!job.killed) job.events.push_back(std::move(p.event));
  }
}

PollResult EvaluatorSim::poll(const std::string& external_id, Millis now, std::uint64_t cursor) {
  std::lock_guard lock(mu_);
  advance(now);
  auto it = jobs_.find(external_id);
  if (it == jobs_.end()) throw Error(ErrorCode::kNotFound, "unknown job " + external_id);
  const Job& job = it->second;
  PollResult r;
  for (std::size_t i = cursor; i < job.events.size(); ++i) r.events.push_back(job.events[i]);
  r.cursor = job.events.size();
  r.terminal = job.killed || (job.closed && job.pending == 0);
  r.failed = job.killed;
  return r;
}

void EvaluatorSim::close(const std::string& external_id) {
  std::lock_guard lock(mu_);
  jobs_[external_id].closed = true;
}

void EvaluatorSim::kill(const std::string& external_id) {
  std::lock_guard lock(mu_);
  jobs_[external_id].killed = true;
}

std::optional<Millis> EvaluatorSim::next_event(Millis now) const {
  std::lock_guard lock(mu_);
  if (queue_.empty()) return std::nullopt;
  return std::max(now, queue_.top().at);
}

std::string PullEvaluator::submit(const JobDescriptor& job) {
  std::lock_guard lock(mu_);
  const std::string id = "pull-" + job.processing_id;
  jobs_.try_emplace(id, false, false);
  return id;
}

PollResult PullEvaluator::poll(const std::string& external_id, Millis, std::uint64_t cursor) {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(external_id);
  if (it == jobs_.end()) throw Error(ErrorCode::kNotFound, "unknown job " + external_id);
  PollResult r;
  r.cursor = cursor;
  r.terminal = it->second.first || it->second.second;
  r.failed = it->second.second;
  return r;
}

void PullEvaluator::close(const std::string& external_id) {
  std::lock_guard lock(mu_);
  jobs_[external_id].first = true;
}

void PullEvaluator::kill(const std::string& external_id) {
  std::lock_guard lock(mu_);
  jobs_[external_id].second = true;
}

std::vector<TrialPoint> fetch_points(Store& store, const std::string& task_id, std::size_t limit) {
  const auto task = store.find<RequestRecord>(task_id);
  if (!task) throw Error(ErrorCode::kNotFound, "unknown task " + task_id);
  Query<WorkRecord> q;
  q.owner = task_id;
  q.statuses = {WorkStatus::kActivated, WorkStatus::kRunning};
  q.where = [](const WorkRecord& w) { return w.work.template_name == kHpoTemplate; };
  std::vector<TrialPoint> out;
  for (const auto& w : store.list(q)) {
    Query<Content> cq;
    cq.owner = input_collection_id(w.work.work_id);
    cq.statuses = {ContentStatus::kAvailable};
    for (const auto& c : store.list(cq)) {
      if (limit != 0 && out.size() >= limit) return out;
      try {
        // The CAS makes dispatch exclusive between concurrent fetchers.
        const Content d = store.transition<Content>(c.content_id, ContentStatus::kAvailable,
                                                    ContentStatus::kDelivered);
        out.push_back(point_from_content(d));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kStaleTransition) throw;
      }
    }
  }
  return out;
}

TrialPoint report_loss(Store& store, const std::string& point_id, double loss) {
  if (!std::isfinite(loss)) throw Error(ErrorCode::kInvalidArgument, "loss must be finite");
  for (int round = 0; round < 2; ++round) {
    const Content c = point_content(store, point_id);
    if (c.status == ContentStatus::kProcessed) {
      const TrialPoint p = point_from_content(c);
      if (p.loss && *p.loss == loss) return p;
      throw Error(ErrorCode::kConflictingLoss, "point " + point_id + " already has loss " +
                                                   (p.loss ? Json(*p.loss).dump() : "none"));
    }
    if (c.status != ContentStatus::kDelivered) {
      throw Error(ErrorCode::kConflict, "point " + point_id + " is not dispatched");
    }
    try {
      const Millis t = store.clock().now();
      const Content done = store.transition<Content>(
          point_id, ContentStatus::kDelivered, ContentStatus::kProcessed, [&](Content& row) {
            row.attributes["loss"] = loss;
            row.finished_at = t;
          });
      return point_from_content(done);
    } catch (const Error& e) {
      // Lost a race with a concurrent report; look again.
      if (e.code() != ErrorCode::kStaleTransition) throw;
    }
  }
  throw Error(ErrorCode::kConflict, "point " + point_id + " changed concurrently");
}

void report_failure(Store& store, const std::string& point_id) {
  const Content c = point_content(store, point_id);
  if (c.status == ContentStatus::kFailed) return;
  if (c.status != ContentStatus::kDelivered) {
    throw Error(ErrorCode::kConflict, "point " + point_id + " is not dispatched");
  }
  try {
    store.transition<Content>(point_id, ContentStatus::kDelivered, ContentStatus::kFailed);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kStaleTransition) throw;
  }
}

HpoResult hpo_result(const std::vector<TrialPoint>& points, std::string request_status) {
  HpoResult r;
  r.points = points;
  bool lost = false;
  for (const auto& p : points) {
    r.iterations = std::max(r.iterations, p.iteration + 1);
    lost = lost || p.status == PointStatus::kLost;
    if (p.status != PointStatus::kEvaluated || !p.loss) continue;
    if (!r.best_loss || *p.loss < *r.best_loss) {
      r.best_loss = p.loss;
      r.best_point = p;
    }
    r.trace.push_back(*r.best_loss);
  }
  r.request_status = request_status;
  r.status = lost ? "SubFinished" : std::move(request_status);
  return r;
}

HpoResult run_hpo(const HpoTaskSpec& spec, const HpoRunOptions& options) {
  RuntimeOptions ro;
  ro.pipeline = options.pipeline;
  Runtime rt(ro);
  rt.backends().bind(std::string(kHpoScope), std::make_shared<HpoPointSource>(rt.store()),
                     std::make_shared<EvaluatorSim>(rt.clock(), options.evaluator, options.objective));
  const std::string id = rt.submit({build_hpo_workflow(spec), "hpo"});
  rt.run_until_terminal(id, options.deadline);
  return hpo_result(hpo_points(rt.store(), id),
                    std::string(to_string(rt.store().get<RequestRecord>(id).status)));
}

}  // namespace dds
