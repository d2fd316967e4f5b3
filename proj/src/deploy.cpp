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

#include "deploy.hpp"

#include <cmath>

#include "carousel.hpp"
#include "dag.hpp"
#include "json_util.hpp"

namespace dds {
namespace {

using namespace json_util;

Millis seconds(const Json& j, const std::string& path) {
  const double s = get_number(j, path);
  if (!std::isfinite(s) || s < 0) fail(path, "must be a non-negative number of seconds");
  return std::llround(s * 1000.0);
}

}  // namespace

DeploymentConfig deployment_from_json(const Json& j) {
  const std::string root = "deployment";
  expect_object(j, root, {"clock", "journal", "tokens_file", "scenario", "hpo", "dag", "active_learning"});
  DeploymentConfig c;
  if (const Json* clock = field(j, "clock")) {
    const std::string p = root + ".clock";
    expect_object(*clock, p, {"mode", "tick", "wall_tick"});
    const std::string mode = optional_string(*clock, "mode", p, "virtual");
    if (mode != "virtual" && mode != "real") fail(p + ".mode", "expected virtual|real");
    c.virtual_time = mode == "virtual";
    if (const Json* t = field(*clock, "tick")) c.poll_interval = seconds(*t, p + ".tick");
    if (c.poll_interval <= 0) fail(p + ".tick", "must be > 0");
    if (const Json* t = field(*clock, "wall_tick")) c.wall_tick = seconds(*t, p + ".wall_tick");
  }
  c.journal_path = optional_string(j, "journal", root);
  c.tokens_file = optional_string(j, "tokens_file", root);
  if (const Json* s = field(j, "scenario")) c.scenario = scenario_from_json(*s);
  if (const Json* h = field(j, "hpo")) {
    const std::string p = root + ".hpo";
    expect_object(*h, p, {"mode", "center", "min_delay", "max_delay", "loss_rate", "seed"});
    const std::string mode = optional_string(*h, "mode", p, "push");
    if (mode != "push" && mode != "pull") fail(p + ".mode", "expected push|pull");
    c.hpo_pull = mode == "pull";
    if (const Json* v = field(*h, "center")) c.hpo_center = get_number(*v, p + ".center");
    if (const Json* v = field(*h, "min_delay")) c.evaluator.min_delay = seconds(*v, p + ".min_delay");
    if (const Json* v = field(*h, "max_delay")) c.evaluator.max_delay = seconds(*v, p + ".max_delay");
    if (const Json* v = field(*h, "loss_rate")) c.evaluator.loss_rate = get_number(*v, p + ".loss_rate");
    if (const Json* v = field(*h, "seed")) {
      c.evaluator.seed = static_cast<std::uint64_t>(get_int(*v, p + ".seed"));
      c.evaluator.order_seed = c.evaluator.seed;
    }
  }
  if (const Json* d = field(j, "dag")) {
    const std::string p = root + ".dag";
    expect_object(*d, p, {"workers", "per_job_time"});
    if (const Json* v = field(*d, "workers")) c.dag_workers = get_int(*v, p + ".workers");
    if (c.dag_workers < 1) fail(p + ".workers", "must be positive");
    if (const Json* v = field(*d, "per_job_time")) c.dag_job_time = seconds(*v, p + ".per_job_time");
  }
  if (const Json* a = field(j, "active_learning")) {
    const std::string p = root + ".active_learning";
    expect_object(*a, p, {"stop_after"});
    if (const Json* v = field(*a, "stop_after")) c.al_stop_after = get_int(*v, p + ".stop_after");
  }
  return c;
}

std::unique_ptr<Runtime> make_runtime(const DeploymentConfig& config) {
  RuntimeOptions ro;
  ro.virtual_time = config.virtual_time;
  ro.store.journal_path = config.journal_path;
  ro.pipeline.base.poll_interval = config.poll_interval;
  ro.wall_tick = config.wall_tick;
  auto rt = std::make_unique<Runtime>(ro);
  Clock& clock = rt->clock();
  BackendRegistry& reg = rt->backends();

  reg.set_default(std::make_shared<InstantDdm>(), std::make_shared<InstantWfm>(clock));

  TapeSimConfig tape = config.scenario.tape;
  if (!config.virtual_time) tape.origin = clock.now();
  auto tape_sim = std::make_shared<TapeSim>(tape);
  reg.bind(std::string(kCarouselScope), tape_sim,
           std::make_shared<ComputeSim>(clock, config.scenario.compute, tape_sim.get()));

  std::shared_ptr<WfmBackend> evaluator;
  if (config.hpo_pull) {
    evaluator = std::make_shared<PullEvaluator>();
  } else {
    evaluator = std::make_shared<EvaluatorSim>(clock, config.evaluator,
                                               quadratic_objective(config.hpo_center));
  }
  reg.bind(std::string(kHpoScope), std::make_shared<HpoPointSource>(rt->store()), evaluator);

  ComputeSimConfig dag_compute;
  dag_compute.workers = config.dag_workers;
  dag_compute.per_file_processing_time = config.dag_job_time;
  reg.bind(std::string(kDagScope), std::make_shared<DagCatalog>(),
           std::make_shared<ComputeSim>(clock, dag_compute));

  const std::int64_t stop_after = config.al_stop_after;
  MetricsProvider decisions = [stop_after](const JobDescriptor& job) {
    Metrics m;
    if (job.work_kind != WorkKind::kDecisionMaking) return m;
    std::int64_t loop = 0;
    if (auto it = job.bindings.find("loop"); it != job.bindings.end()) {
      if (const auto* v = std::get_if<std::int64_t>(&it->second)) loop = *v;
    }
    m["continue"] = loop + 1 < stop_after ? 1 : 0;
    m["hint"] = static_cast<double>(loop + 1);
    return m;
  };
  reg.bind(std::string(kActiveLearningScope), std::make_shared<InstantDdm>(),
           std::make_shared<InstantWfm>(clock, decisions));
  return rt;
}

}  // namespace dds
