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

// Job-graph workflows (per-job dependencies with incremental release) and
// the cyclic processing/decision loop used for active learning.

#ifndef DDS_SRC_DAG_HPP_
#define DDS_SRC_DAG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "backends.hpp"
#include "service.hpp"

namespace dds {

inline constexpr std::string_view kDagScope = "dag";
inline constexpr int kJobGraphVersion = 1;

struct Job {
  std::string id;
  Json payload = Json::object();
  std::vector<std::string> depends_on;

  bool operator==(const Job&) const = default;
};

struct JobGraph {
  std::vector<Job> jobs;

  bool operator==(const JobGraph&) const = default;
};

// {"version": 1, "jobs": [{"id", "payload", "depends_on": []}]}; strict.
JobGraph job_graph_from_json(const Json& j);
Json job_graph_to_json(const JobGraph& graph);

// Jobs grouped by longest-path depth; layer order within a layer follows
// the graph file. Throws Error(kDanglingDependency), Error(kCyclicJobGraph)
// or Error(kValidation) (duplicate or malformed ids).
std::vector<std::vector<std::string>> layer_jobs(const JobGraph& graph);

// One entry Work per layer, named layer-00, layer-01, ...; each job is a
// Content of its layer's input collection and carries the content ids of
// its dependencies and dependents, so it is released as soon as its own
// inputs are Processed rather than when the previous layer ends.
Workflow ingest_job_graph(const JobGraph& graph, const std::string& name = "dag");

std::string layer_name(std::size_t index, std::size_t layer_count);

// DDM for scope "dag": a layer's collection is the job list carried in the
// template's executable.
class DagCatalog final : public DdmBackend {
 public:
  std::vector<FileInfo> resolve_collection(const CollectionRef& ref) override;
  StageReport stage_status(std::string_view, Millis) override { return {StageState::kOnDisk, 0}; }
};

// Seeded random DAG: jobs spread over `depth` levels, each non-root job
// depends on one job of the level above plus up to max_deps - 1 others
// from any earlier level.
JobGraph random_job_graph(std::size_t jobs, std::size_t depth, std::size_t max_deps,
                          std::uint64_t seed);

struct DagRunOptions {
  std::int64_t workers = 64;
  Millis per_job_time = 1000;
  PipelineConfig pipeline;
  Millis deadline = 30 * 24 * 3600 * 1000LL;
  FaultHook fault_hook;
};

struct DagRun {
  std::string request_id;
  std::string status;
  bool completed = false;
  // job id -> executions started by the compute backend
  std::map<std::string, std::int64_t> executions;
  // Job contents at the end of the run.
  std::vector<Content> jobs;
  Millis makespan = 0;
  std::int64_t cycles = 0;
  std::int64_t step_errors = 0;
  std::int64_t crashes = 0;
  std::size_t messages = 0;
};

DagRun run_dag(const JobGraph& graph, const DagRunOptions& options = {});

// ---------------------------------------------------------------------------

inline constexpr std::string_view kActiveLearningScope = "al";

struct ActiveLearningSpec {
  std::string processing_template = "P";
  std::string decision_template = "D";
  std::string continue_metric = "continue";
  // Decision metrics copied into the next processing round's bindings.
  std::vector<std::string> hint_metrics = {"hint"};
  std::int64_t max_loops = 5;
};

// Throws Error(kValidation).
void validate(const ActiveLearningSpec& spec);

// P -(always)-> D, D -(continue_metric == 1)-> P; each template may run at
// most max_loops times.
Workflow build_active_learning(const ActiveLearningSpec& spec,
                               const std::string& name = "active-learning");

struct ActiveLearningRun {
  std::string request_id;
  std::string status;
  std::int64_t processing_runs = 0;
  std::int64_t decision_runs = 0;
  // Template names in lineage order.
  std::vector<std::string> sequence;
  std::vector<Work> works;
};

// Decision round k reports continue = decisions[k] (0 once the script runs
// out) and hint = k + 1.
ActiveLearningRun run_active_learning(const ActiveLearningSpec& spec,
                                      const std::vector<int>& decisions);

}  // namespace dds

#endif  // DDS_SRC_DAG_HPP_
