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

// Hyperparameter optimization on top of the pipeline.
//
// Each optimization round is one Work of template "hpo_iter"; its input
// collection is the set of points generated for that round, produced on
// demand by HpoPointSource (acting as the DDM for scope "hpo"). Losses come
// back either from a push-mode evaluator backend or from remote workers via
// fetch_points/report_loss. The decision to run another round is the
// "continue" metric of the finished round.

#ifndef DDS_SRC_HPO_HPP_
#define DDS_SRC_HPO_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <mutex>
#include <string>
#include <vector>

#include "backends.hpp"
#include "service.hpp"
#include "store.hpp"

namespace dds {

struct Dimension {
  enum class Kind { kContinuous, kInteger, kCategorical };
  std::string name;
  Kind kind = Kind::kContinuous;
  double lo = 0.0;
  double hi = 1.0;
  // Categorical choices (JSON scalars).
  std::vector<Json> values;

  bool operator==(const Dimension&) const = default;
};

struct SearchSpace {
  std::vector<Dimension> dimensions;

  bool operator==(const SearchSpace&) const = default;
};

enum class SamplerKind { kRandom, kGrid, kEvolutionary };

std::string_view to_string(SamplerKind kind);

struct HpoTaskSpec {
  SearchSpace space;
  SamplerKind sampler = SamplerKind::kRandom;
  // resolution (grid); mu, sigma, p_categorical (evolutionary).
  std::map<std::string, double> sampler_params;
  std::int64_t points_per_iteration = 1;
  std::int64_t max_points = 1;
  std::int64_t patience = 0;
  std::uint64_t seed = 0;

  bool operator==(const HpoTaskSpec&) const = default;
};

// Throws Error(kValidation) listing the first broken invariant.
void validate(const HpoTaskSpec& spec);
Json hpo_spec_to_json(const HpoTaskSpec& spec);
// Strict; throws Error(kParse).
HpoTaskSpec hpo_spec_from_json(const Json& j);

enum class PointStatus { kGenerated, kDispatched, kEvaluated, kLost };

std::string_view to_string(PointStatus status);

struct TrialPoint {
  std::string point_id;
  // dimension name -> value
  Json values = Json::object();
  PointStatus status = PointStatus::kGenerated;
  std::optional<double> loss;
  std::int64_t iteration = 0;

  bool operator==(const TrialPoint&) const = default;
};

// Number of grid points for `spec` (product of per-dimension counts).
std::int64_t grid_size(const HpoTaskSpec& spec);

// The next round: min(points_per_iteration, max_points - history.size())
// points. Pure: equal arguments give equal points. Throws
// Error(kExhaustedSpace) for a fully enumerated grid.
std::vector<TrialPoint> generate_points(const HpoTaskSpec& spec,
                                        const std::vector<TrialPoint>& history,
                                        std::int64_t iteration);

bool point_in_space(const SearchSpace& space, const Json& values);

// Stopping rule over everything generated so far.
struct RoundSummary {
  std::int64_t points = 0;
  std::int64_t evaluated = 0;
  std::int64_t lost = 0;
  std::optional<double> best_loss;
  std::int64_t stale_rounds = 0;
  bool exhausted = false;
  bool keep_going = false;
};
RoundSummary summarize_rounds(const HpoTaskSpec& spec, const std::vector<TrialPoint>& history);

// ---------------------------------------------------------------------------
// Pipeline wiring

inline constexpr std::string_view kHpoScope = "hpo";
inline constexpr std::string_view kHpoTemplate = "hpo_iter";

Workflow build_hpo_workflow(const HpoTaskSpec& spec, const std::string& name = "hpo");

// Every point of an HPO request, ordered by (iteration, point_id).
std::vector<TrialPoint> hpo_points(const Store& store, const std::string& task_id);

// DDM for scope "hpo": a round's collection is generated from the task
// spec (carried in the executable) and the history already in the store.
class HpoPointSource final : public DdmBackend {
 public:
  explicit HpoPointSource(const Store& store) : store_(store) {}

  std::vector<FileInfo> resolve_collection(const CollectionRef& ref) override;
  StageReport stage_status(std::string_view, Millis) override { return {StageState::kOnDisk, 0}; }
  Metrics summarize(const CollectionRef& ref, const std::vector<Content>& inputs) override;

 private:
  const Store& store_;
};

using Objective = std::function<double(const Json& values)>;

// sum over numeric dimensions of (x - center)^2
Objective quadratic_objective(double center);

struct EvaluatorSimConfig {
  Millis min_delay = 1000;
  Millis max_delay = 10'000;
  // Probability that an evaluation is lost (reported Failed).
  double loss_rate = 0.0;
  std::uint64_t seed = 0;
  // Drives evaluation delays only, i.e. the order losses arrive in.
  std::uint64_t order_seed = 0;
};

// Push-mode remote evaluators: every delivered point is evaluated after a
// seeded random delay, so results arrive out of order.
class EvaluatorSim final : public WfmBackend {
 public:
  EvaluatorSim(const Clock& clock, EvaluatorSimConfig config, Objective objective);

  std::string submit(const JobDescriptor& job) override;
  void add_inputs(const std::string& external_id,
                  const std::vector<DeliveredInput>& inputs) override;
  PollResult poll(const std::string& external_id, Millis now, std::uint64_t cursor) override;
  void close(const std::string& external_id) override;
  void kill(const std::string& external_id) override;
  std::optional<Millis> next_event(Millis now) const override;

 private:
  struct Pending {
    Millis at;
    std::string job;
    std::string name;
    ContentEvent event;
    bool operator>(const Pending& o) const { return std::tie(at, job, name) > std::tie(o.at, o.job, o.name); }
  };
  struct Job {
    bool closed = false;
    bool killed = false;
    std::size_t pending = 0;
    std::vector<ContentEvent> events;
    std::set<std::pair<std::string, std::int64_t>> seen;
  };
  void advance(Millis now);

  const Clock& clock_;
  EvaluatorSimConfig config_;
  Objective objective_;
  std::map<std::string, Job> jobs_;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue_;
  mutable std::mutex mu_;
};

// Pull-mode: workers fetch points and report losses through the store.
class PullEvaluator final : public WfmBackend {
 public:
  std::string submit(const JobDescriptor& job) override;
  void add_inputs(const std::string&, const std::vector<DeliveredInput>&) override {}
  PollResult poll(const std::string& external_id, Millis now, std::uint64_t cursor) override;
  void close(const std::string& external_id) override;
  void kill(const std::string& external_id) override;
  bool pull_mode() const override { return true; }

 private:
  std::map<std::string, std::pair<bool, bool>> jobs_;  // closed, killed
  std::mutex mu_;
};

// Evaluator protocol. fetch marks the returned points Dispatched (the
// content moves Available -> Delivered); a repeated report of the same loss
// is a no-op, a different one throws Error(kConflictingLoss). Unknown ids
// throw Error(kUnknownPoint).
std::vector<TrialPoint> fetch_points(Store& store, const std::string& task_id,
                                     std::size_t limit = 0);
TrialPoint report_loss(Store& store, const std::string& point_id, double loss);
// The worker gave up on a point; it is retried or eventually Lost.
void report_failure(Store& store, const std::string& point_id);

struct HpoResult {
  std::optional<TrialPoint> best_point;
  std::optional<double> best_loss;
  // Best loss after each evaluation, in (iteration, point_id) order.
  std::vector<double> trace;
  std::vector<TrialPoint> points;
  std::int64_t iterations = 0;
  // SubFinished when any point was lost.
  std::string status;
  std::string request_status;
};

HpoResult hpo_result(const std::vector<TrialPoint>& points, std::string request_status);

struct HpoRunOptions {
  EvaluatorSimConfig evaluator;
  Objective objective = quadratic_objective(0.0);
  PipelineConfig pipeline;
  Millis deadline = 30 * 24 * 3600 * 1000LL;
};

// Runs the task through the pipeline on virtual time with a simulated
// push-mode evaluator.
HpoResult run_hpo(const HpoTaskSpec& spec, const HpoRunOptions& options = {});

}  // namespace dds

#endif  // DDS_SRC_HPO_HPP_
