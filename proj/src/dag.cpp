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

#include "dag.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <unordered_map>

#include "json_util.hpp"

namespace dds {
namespace {

using namespace json_util;

bool valid_job_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' ||
           c == ':';
  });
}

std::string entry_work_id(const std::string& request_id, const std::string& tmpl) {
  return request_id + "/" + tmpl + ".0";
}

}  // namespace

JobGraph job_graph_from_json(const Json& j) {
  const std::string root = "graph";
  expect_object(j, root, {"version", "jobs"});
  const std::int64_t version = get_int(required(j, "version", root), root + ".version");
  if (version != kJobGraphVersion) fail(root + ".version", "unsupported version " + std::to_string(version));
  const Json& jobs = required(j, "jobs", root);
  if (!jobs.is_array()) fail(root + ".jobs", "expected an array");
  JobGraph g;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const std::string path = root + ".jobs[" + std::to_string(i) + "]";
    expect_object(jobs[i], path, {"id", "payload", "depends_on"});
    Job job;
    job.id = get_string(required(jobs[i], "id", path), path + ".id");
    if (const Json* p = field(jobs[i], "payload")) job.payload = *p;
    if (const Json* d = field(jobs[i], "depends_on")) {
      if (!d->is_array()) fail(path + ".depends_on", "expected an array");
      for (std::size_t k = 0; k < d->size(); ++k) {
        job.depends_on.push_back(get_string((*d)[k], path + ".depends_on[" + std::to_string(k) + "]"));
      }
    }
    g.jobs.push_back(std::move(job));
  }
  return g;
}

Json job_graph_to_json(const JobGraph& graph) {
  Json jobs = Json::array();
  for (const auto& job : graph.jobs) {
    jobs.push_back({{"id", job.id}, {"payload", job.payload}, {"depends_on", job.depends_on}});
  }
  return {{"version", kJobGraphVersion}, {"jobs", jobs}};
}

std::vector<std::vector<std::string>> layer_jobs(const JobGraph& graph) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < graph.jobs.size(); ++i) {
    const auto& id = graph.jobs[i].id;
    if (!valid_job_id(id)) throw Error(ErrorCode::kValidation, "malformed job id '" + id + "'");
    if (!index.emplace(id, i).second) throw Error(ErrorCode::kValidation, "duplicate job id " + id);
  }
  const std::size_t n = graph.jobs.size();
  std::vector<std::vector<std::size_t>> children(n);
  std::vector<std::size_t> pending(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::set<std::string> seen;
    for (const auto& dep : graph.jobs[i].depends_on) {
      auto it = index.find(dep);
      if (it == index.end()) {
        throw Error(ErrorCode::kDanglingDependency,
                    "job " + graph.jobs[i].id + " depends on unknown job " + dep);
      }
      if (!seen.insert(dep).second) continue;
      children[it->second].push_back(i);
      ++pending[i];
    }
  }
  // Kahn's algorithm; depth = longest path from a root.
  std::vector<std::size_t> depth(n, 0);
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (pending[i] == 0) ready.push_back(i);
  }
  std::size_t done = 0;
  std::size_t max_depth = 0;
  while (!ready.empty()) {
    const std::size_t i = ready.back();
    ready.pop_back();
    ++done;
    max_depth = std::max(max_depth, depth[i]);
    for (std::size_t c : children[i]) {
      depth[c] = std::max(depth[c], depth[i] + 1);
      if (--pending[c] == 0) ready.push_back(c);
    }
  }
  if (done != n) {
    for (std::size_t i = 0; i < n; ++i) {
      if (pending[i] != 0) {
        throw Error(ErrorCode::kCyclicJobGraph, "dependency cycle through job " + graph.jobs[i].id);
      }
    }
  }
  std::vector<std::vector<std::string>> layers(n == 0 ? 0 : max_depth + 1);
  for (std::size_t i = 0; i < n; ++i) layers[depth[i]].push_back(graph.jobs[i].id);
  return layers;
}

std::string layer_name(std::size_t index, std::size_t layer_count) {
  int width = 2;
  for (std::size_t m = layer_count > 0 ? layer_count - 1 : 0; m >= 100; m /= 10) ++width;
  char buf[48];
  std::snprintf(buf, sizeof buf, "layer-%0*zu", width, index);
  return buf;
}

Workflow ingest_job_graph(const JobGraph& graph, const std::string& name) {
  const auto layers = layer_jobs(graph);
  std::unordered_map<std::string, std::size_t> layer_of;
  std::unordered_map<std::string, const Job*> by_id;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (const auto& id : layers[l]) layer_of[id] = l;
  }
  for (const auto& job : graph.jobs) {
    by_id[job.id] = &job;
    if (job.payload.dump().find("%{") != std::string::npos) {
      throw Error(ErrorCode::kValidation, "payload of job " + job.id + " contains '%{'");
    }
  }
  std::unordered_map<std::string, std::vector<std::string>> dependents;
  for (const auto& job : graph.jobs) {
    std::set<std::string> seen;
    for (const auto& d : job.depends_on) {
      if (seen.insert(d).second) dependents[d].push_back(job.id);
    }
  }
  auto ref = [&](const std::string& id) {
    return Json::array({layer_name(layer_of.at(id), layers.size()), id});
  };

  Workflow wf;
  wf.name = name;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string lname = layer_name(l, layers.size());
    Json jobs = Json::array();
    for (const auto& id : layers[l]) {
      const Job& job = *by_id.at(id);
      Json deps = Json::array();
      std::set<std::string> seen;
      for (const auto& d : job.depends_on) {
        if (seen.insert(d).second) deps.push_back(ref(d));
      }
      Json after = Json::array();
      for (const auto& c : dependents[id]) after.push_back(ref(c));
      jobs.push_back({{"id", id}, {"payload", job.payload}, {"deps", deps}, {"dependents", after}});
    }
    WorkTemplate t;
    t.name = lname;
    t.input_spec = {std::string(kDagScope), name + "." + lname};
    t.output_spec = {std::string(kDagScope), name + "." + lname + ".out"};
    t.executable_spec = Json{{"layer", lname}, {"jobs", jobs}}.dump();
    t.is_entry = true;
    t.max_instantiations = 1;
    wf.templates.push_back(std::move(t));
  }
  wf.max_total_works = std::max<std::int64_t>(1, static_cast<std::int64_t>(layers.size()));
  return wf;
}

std::vector<FileInfo> DagCatalog::resolve_collection(const CollectionRef& ref) {
  const Json spec = Json::parse(ref.executable, nullptr, false);
  if (spec.is_discarded() || !spec.is_object() || !spec.contains("jobs")) {
    throw Error(ErrorCode::kNotFound, "not a job layer: " + ref.name);
  }
  auto cid = [&](const Json& r) {
    const std::string layer = r.at(0).get<std::string>();
    return content_id(input_collection_id(entry_work_id(ref.request_id, layer)),
                      r.at(1).get<std::string>());
  };
  std::vector<FileInfo> files;
  for (const auto& job : spec.at("jobs")) {
    FileInfo f;
    f.name = job.at("id").get<std::string>();
    f.attributes["payload"] = job.at("payload");
    if (!job.at("deps").empty()) {
      Json deps = Json::array();
      for (const auto& d : job.at("deps")) deps.push_back(cid(d));
      f.attributes["deps"] = deps;
    }
    if (!job.at("dependents").empty()) {
      Json after = Json::array();
      for (const auto& d : job.at("dependents")) after.push_back(cid(d));
      f.attributes["dependents"] = after;
    }
    files.push_back(std::move(f));
  }
  return files;
}

JobGraph random_job_graph(std::size_t jobs, std::size_t depth, std::size_t max_deps,
                          std::uint64_t seed) {
  if (depth == 0 || max_deps == 0) {
    throw Error(ErrorCode::kInvalidArgument, "depth and max_deps must be positive");
  }
  std::mt19937_64 rng(mix_seed(seed, 0xda6));
  JobGraph g;
  std::vector<std::size_t> level_start;
  for (std::size_t i = 0; i < jobs; ++i) {
    const std::size_t level = i * depth / jobs;
    if (level == level_start.size()) level_start.push_back(i);
    char id[32];
    std::snprintf(id, sizeof id, "j%06zu", i);
    Job job;
    job.id = id;
    job.payload = {{"level", level}};
    if (level > 0) {
      const std::size_t lo = level_start[level - 1];
      const std::size_t hi = level_start[level];
      std::set<std::size_t> deps{std::uniform_int_distribution<std::size_t>(lo, hi - 1)(rng)};
      const std::size_t extra = std::uniform_int_distribution<std::size_t>(0, max_deps - 1)(rng);
      for (std::size_t k = 0; k < extra; ++k) {
        deps.insert(std::uniform_int_distribution<std::size_t>(0, hi - 1)(rng));
      }
      for (std::size_t d : deps) job.depends_on.push_back(g.jobs[d].id);
    }
    g.jobs.push_back(std::move(job));
  }
  return g;
}

DagRun run_dag(const JobGraph& graph, const DagRunOptions& options) {
  RuntimeOptions ro;
  ro.pipeline = options.pipeline;
  Runtime rt(ro);
  ComputeSimConfig cc;
  cc.workers = options.workers;
  cc.per_file_processing_time = options.per_job_time;
  auto compute = std::make_shared<ComputeSim>(rt.clock(), cc);
  rt.backends().bind(std::string(kDagScope), std::make_shared<DagCatalog>(), compute);

  DagRun run;
  run.request_id = rt.submit({ingest_job_graph(graph), "dag"});
  if (options.fault_hook) rt.store().set_fault_hook(options.fault_hook);
  run.completed = rt.run_until_terminal(run.request_id, options.deadline);
  rt.store().set_fault_hook({});
  const Store& store = rt.store();
  run.status = std::string(to_string(store.get<RequestRecord>(run.request_id).status));
  Query<Collection> cq;
  cq.where = [&](const Collection& c) {
    return c.request_id == run.request_id && c.kind == CollectionKind::kInput;
  };
  for (const auto& coll : store.list(cq)) {
    Query<Content> q;
    q.owner = coll.collection_id;
    for (auto& c : store.list(q)) {
      run.executions[c.name] = compute->executions(c.name);
      run.makespan = std::max(run.makespan, c.finished_at);
      run.jobs.push_back(std::move(c));
    }
  }
  run.cycles = rt.cycles();
  run.step_errors = rt.stats().step_errors.load();
  run.crashes = rt.pipeline().crashes();
  run.messages = store.count<Message>();
  return run;
}

// ---------------------------------------------------------------------------

void validate(const ActiveLearningSpec& spec) {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::kValidation, m); };
  if (spec.processing_template.empty() || spec.decision_template.empty()) bad("template names must be set");
  if (spec.processing_template == spec.decision_template) bad("templates must differ");
  if (spec.continue_metric.empty()) bad("continue_metric must be set");
  if (spec.max_loops < 1) bad("max_loops must be positive");
  std::set<std::string> hints;
  for (const auto& h : spec.hint_metrics) {
    if (h.empty() || h == "loop" || !hints.insert(h).second) bad("bad hint metric '" + h + "'");
  }
}

Workflow build_active_learning(const ActiveLearningSpec& spec, const std::string& name) {
  validate(spec);
  const std::string scope(kActiveLearningScope);
  Workflow wf;
  wf.name = name;
  WorkTemplate p;
  p.name = spec.processing_template;
  p.work_kind = WorkKind::kProcessing;
  p.parameters.push_back({"loop", ParamType::kInt, ParamValue{std::int64_t{0}}});
  for (const auto& h : spec.hint_metrics) p.parameters.push_back({h, ParamType::kFloat, ParamValue{0.0}});
  p.input_spec = {scope, p.name + "-in-%{loop}"};
  p.output_spec = {scope, p.name + "-out-%{loop}"};
  p.executable_spec = "train --loop %{loop}";
  p.is_entry = true;
  p.max_instantiations = spec.max_loops;

  WorkTemplate d;
  d.name = spec.decision_template;
  d.work_kind = WorkKind::kDecisionMaking;
  d.parameters.push_back({"loop", ParamType::kInt, ParamValue{std::int64_t{0}}});
  d.input_spec = {scope, p.name + "-out-%{loop}"};
  d.output_spec = {scope, d.name + "-out-%{loop}"};
  d.executable_spec = "decide --loop %{loop}";
  d.max_instantiations = spec.max_loops;
  wf.templates = {p, d};

  ConditionBranch to_decision;
  to_decision.source_template = p.name;
  to_decision.predicate = PredicateExpr::always(true);
  to_decision.destinations.push_back({d.name, {{"loop", ParamExpr::binding("loop")}}});
  ConditionBranch again;
  again.source_template = d.name;
  again.predicate = PredicateExpr::compare(PredicateExpr::Op::kEq,
                                           {ValueRef::Kind::kMetric, spec.continue_metric},
                                           ParamValue{std::int64_t{1}});
  Destination next{p.name, {}};
  next.param_map["loop"] = ParamExpr::arithmetic(ParamExpr::Op::kAdd, ParamExpr::binding("loop"),
                                                 ParamExpr::constant(std::int64_t{1}));
  for (const auto& h : spec.hint_metrics) next.param_map[h] = ParamExpr::metric(h, ParamValue{0.0});
  again.destinations.push_back(next);
  wf.conditions = {to_decision, again};
  wf.max_total_works = 2 * spec.max_loops;
  return wf;
}

ActiveLearningRun run_active_learning(const ActiveLearningSpec& spec,
                                      const std::vector<int>& decisions) {
  Runtime rt;
  MetricsProvider provider = [&](const JobDescriptor& job) {
    Metrics m;
    if (job.template_name != spec.decision_template) return m;
    const auto loop = std::get<std::int64_t>(job.bindings.at("loop"));
    m[spec.continue_metric] =
        loop < static_cast<std::int64_t>(decisions.size()) ? decisions[static_cast<std::size_t>(loop)] : 0;
    for (const auto& h : spec.hint_metrics) m[h] = static_cast<double>(loop + 1);
    return m;
  };
  rt.backends().bind(std::string(kActiveLearningScope), std::make_shared<InstantDdm>(),
                     std::make_shared<InstantWfm>(rt.clock(), provider));
  ActiveLearningRun run;
  run.request_id = rt.submit({build_active_learning(spec), "active-learning"});
  rt.run_until_terminal(run.request_id, 24 * 3600 * 1000LL);
  const Store& store = rt.store();
  run.status = std::string(to_string(store.get<RequestRecord>(run.request_id).status));
  Query<WorkRecord> q;
  q.owner = run.request_id;
  for (const auto& w : store.list(q)) run.works.push_back(w.work);
  std::sort(run.works.begin(), run.works.end(), [](const Work& a, const Work& b) {
    return std::tie(a.generation, a.work_id) < std::tie(b.generation, b.work_id);
  });
  for (const auto& w : run.works) {
    run.sequence.push_back(w.template_name);
    if (w.status != WorkStatus::kFinished) continue;
    if (w.template_name == spec.processing_template) ++run.processing_runs;
    if (w.template_name == spec.decision_template) ++run.decision_runs;
  }
  return run;
}

}  // namespace dds
