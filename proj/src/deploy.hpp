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

// A served deployment: which backends answer which collection scope, the
// clock, the journal and the token file.
//
//   tape  TapeSim + ComputeSim (carousel scenario)
//   hpo   HpoPointSource + EvaluatorSim (push) or PullEvaluator (pull)
//   dag   DagCatalog + ComputeSim
//   al    InstantDdm + InstantWfm with a scripted decision metric
//   *     InstantDdm + InstantWfm

#ifndef DDS_SRC_DEPLOY_HPP_
#define DDS_SRC_DEPLOY_HPP_

#include <memory>
#include <string>

#include "backends.hpp"
#include "hpo.hpp"
#include "service.hpp"

namespace dds {

struct DeploymentConfig {
  bool virtual_time = true;
  Millis poll_interval = 1000;
  Millis wall_tick = 20;
  std::string journal_path;
  std::string tokens_file;
  ScenarioConfig scenario;
  bool hpo_pull = false;
  double hpo_center = 0.0;
  EvaluatorSimConfig evaluator;
  std::int64_t dag_workers = 64;
  Millis dag_job_time = 1000;
  // Decision rounds answer continue = 1 before this many loops.
  std::int64_t al_stop_after = 3;
};

// {"clock": {"mode", "tick", "wall_tick"}, "journal", "tokens_file",
//  "scenario": {...}, "hpo": {"mode", "center", "min_delay", "max_delay",
//  "loss_rate", "seed"}, "dag": {"workers", "per_job_time"},
//  "active_learning": {"stop_after"}}; times in seconds. Strict.
DeploymentConfig deployment_from_json(const Json& j);

// Builds the runtime and registers every backend. Does not start it.
std::unique_ptr<Runtime> make_runtime(const DeploymentConfig& config);

}  // namespace dds

#endif  // DDS_SRC_DEPLOY_HPP_
