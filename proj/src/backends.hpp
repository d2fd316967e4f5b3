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

// Data-management (DDM) and workload-management (WFM) backend interfaces,
// and the simulated implementations used to run every scenario on a single
// desk: a tape stage-in model, a queueing compute model, and "instant"
// backends where everything is on disk and every job completes on delivery.
//
// Simulators are single-threaded; callers serialize access per instance.

#ifndef DDS_SRC_BACKENDS_HPP_
#define DDS_SRC_BACKENDS_HPP_

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <deque>
#include <queue>
#include <set>
#include <tuple>
#include <string>
#include <string_view>
#include <vector>

#include "clock.hpp"
#include "entities.hpp"

namespace dds {

enum class StageState { kOnTape, kStaging, kOnDisk };

std::string_view to_string(StageState state);

struct FileInfo {
  std::string name;
  std::int64_t size_bytes = 0;
  Json attributes = Json::object();

  bool operator==(const FileInfo&) const = default;
};

// What the Transformer knows about a Work when it talks to the DDM.
struct CollectionRef {
  std::string scope;
  std::string name;
  std::string request_id;
  std::string work_id;
  std::string executable;
};

struct StageReport {
  StageState state = StageState::kOnDisk;
  // When the file reached its current state; kNoTime if unknown.
  Millis since = kNoTime;
};

class DdmBackend {
 public:
  virtual ~DdmBackend() = default;

  // Stable across calls. Throws Error(kBackendUnavailable) when down and
  // Error(kNotFound) for an unknown collection.
  virtual std::vector<FileInfo> resolve_collection(const CollectionRef& ref) = 0;
  virtual StageReport stage_status(std::string_view file, Millis now) = 0;
  // Frees the disk copy; repeated calls are no-ops.
  virtual void release(std::string_view /*file*/, Millis /*now*/) {}
  // Work-level metrics from the final state of its input contents.
  virtual Metrics summarize(const CollectionRef& /*ref*/, const std::vector<Content>& /*inputs*/) {
    return {};
  }
  // Tape-backed: contents start New and need a stage pass.
  virtual bool tape_backed() const { return false; }
  // Earliest time after `now` at which stage_status can change.
  virtual std::optional<Millis> next_event(Millis /*now*/) const { return std::nullopt; }
};

struct JobDescriptor {
  std::string processing_id;
  std::string work_id;
  std::string request_id;
  std::string template_name;
  std::string scope;
  std::string executable;
  WorkKind work_kind = WorkKind::kProcessing;
  Bindings bindings;
  DeliveryPolicy delivery;
};

struct DeliveredInput {
  std::string name;
  // Delivery attempt, starting at 1.
  std::int64_t attempt = 1;
  std::int64_t size_bytes = 0;
  Json attributes = Json::object();
};

enum class EventState { kProcessed, kFailed };

struct ContentEvent {
  std::string name;
  std::int64_t delivery_attempt = 1;
  EventState state = EventState::kProcessed;
  // Backend-side attempts spent on this delivery (broker resubmissions).
  std::int64_t attempts = 1;
  Millis started_at = kNoTime;
  Millis finished_at = kNoTime;
  Metrics metrics;
};

struct PollResult {
  std::vector<ContentEvent> events;
  // Pass back on the next poll to receive only newer events.
  std::uint64_t cursor = 0;
  bool terminal = false;
  bool failed = false;
  Metrics metrics;
};

class WfmBackend {
 public:
  virtual ~WfmBackend() = default;

  // Idempotent per processing_id. Throws Error(kBackendUnavailable).
  virtual std::string submit(const JobDescriptor& job) = 0;
  // Each call is one job. Idempotent per (name, attempt).
  virtual void add_inputs(const std::string& external_id,
                          const std::vector<DeliveredInput>& inputs) = 0;
  // Throws Error(kBackendUnavailable). Stable once terminal.
  virtual PollResult poll(const std::string& external_id, Millis now, std::uint64_t cursor) = 0;
  // No more inputs will follow; the job turns terminal once they are done.
  virtual void close(const std::string& external_id) = 0;
  virtual void kill(const std::string& external_id) = 0;
  virtual std::optional<Millis> next_event(Millis /*now*/) const { return std::nullopt; }
  // Workers fetch inputs themselves; the Carrier does not deliver.
  virtual bool pull_mode() const { return false; }
};

// Job-level metrics reported when a job turns terminal (e.g. a decision
// Work's "continue" flag).
using MetricsProvider = std::function<Metrics(const JobDescriptor&)>;

// ---------------------------------------------------------------------------

struct TapeSimConfig {
  std::string dataset = "data";
  std::vector<FileInfo> files;
  // Explicit stage-completion times in milliseconds from t0.
  std::map<std::string, Millis> stage_schedule;
  // Rate model, used for files absent from stage_schedule: slot i of a
  // seeded permutation completes at (i + 1) / files_per_second.
  double files_per_second = 0.0;
  std::uint64_t seed = 0;
  // Added to every stage time (real-time runs start at the wall clock).
  Millis origin = 0;
};

// Generates `n` files with seeded sizes in [min_bytes, max_bytes].
std::vector<FileInfo> generate_files(std::size_t n, std::int64_t min_bytes,
                                     std::int64_t max_bytes, std::uint64_t seed,
                                     std::string_view prefix = "file");

struct DiskFootprint {
  std::int64_t peak_bytes = 0;
  // Occupancy integral in byte-seconds, rounded down.
  std::int64_t byte_seconds = 0;
  // (time, occupancy after all changes at that time)
  std::vector<std::pair<Millis, std::int64_t>> series;
};

class TapeSim final : public DdmBackend {
 public:
  explicit TapeSim(TapeSimConfig config);

  std::vector<FileInfo> resolve_collection(const CollectionRef& ref) override;
  StageReport stage_status(std::string_view file, Millis now) override;
  void release(std::string_view file, Millis now) override;
  bool tape_backed() const override { return true; }
  std::optional<Millis> next_event(Millis now) const override;

  Millis stage_time(std::string_view file) const;
  std::optional<Millis> released_at(std::string_view file) const;
  // Disk occupancy from t0 to `end`; files never released stay resident.
  DiskFootprint footprint(Millis end) const;
  std::int64_t total_bytes() const;
  const TapeSimConfig& config() const { return config_; }

 private:
  TapeSimConfig config_;
  std::map<std::string, std::int64_t, std::less<>> sizes_;
  std::map<std::string, Millis, std::less<>> stage_at_;
  std::map<std::string, Millis, std::less<>> released_;
  std::vector<Millis> times_;
  mutable std::mutex mu_;
};

struct InstantDdmConfig {
  std::int64_t files_per_collection = 1;
  std::int64_t file_size = 1;
};

// Everything exists and is on disk from t0.
class InstantDdm final : public DdmBackend {
 public:
  explicit InstantDdm(InstantDdmConfig config = {}) : config_(config) {}

  std::vector<FileInfo> resolve_collection(const CollectionRef& ref) override;
  StageReport stage_status(std::string_view, Millis) override {
    return {StageState::kOnDisk, 0};
  }

  void set_down(bool down) { down_ = down; }
  // Per-collection file count override.
  void set_files(const std::string& name, std::int64_t n) {
    std::lock_guard lock(mu_);
    overrides_[name] = n;
  }
  std::int64_t resolve_calls() const { return resolve_calls_; }

 private:
  InstantDdmConfig config_;
  std::atomic<bool> down_{false};
  std::map<std::string, std::int64_t> overrides_;
  std::atomic<std::int64_t> resolve_calls_{0};
  std::mutex mu_;
};

struct ComputeSimConfig {
  std::int64_t workers = 1;
  Millis per_file_processing_time = 1000;
  // Coarse-policy job abort when the input is not on disk.
  Millis input_wait_timeout = 30'000;
  // The broker resubmits aborted jobs on this period.
  Millis resubmit_interval = 1000;
  double failure_rate = 0.0;
  std::uint64_t seed = 0;
};

// Discrete-event compute farm: FIFO queue in front of `workers` identical
// slots. A delivered job whose inputs are not on disk is aborted after
// input_wait_timeout without holding a slot and resubmitted by the broker.
class ComputeSim final : public WfmBackend {
 public:
  // `stage` decides whether inputs are on disk; null means always.
  ComputeSim(const Clock& clock, ComputeSimConfig config, DdmBackend* stage = nullptr,
             MetricsProvider metrics = {});

  std::string submit(const JobDescriptor& job) override;
  void add_inputs(const std::string& external_id,
                  const std::vector<DeliveredInput>& inputs) override;
  PollResult poll(const std::string& external_id, Millis now, std::uint64_t cursor) override;
  void close(const std::string& external_id) override;
  void kill(const std::string& external_id) override;
  std::optional<Millis> next_event(Millis now) const override;

  void set_down(bool down) { down_ = down; }
  // Number of job executions started (for exactly-once audits).
  std::int64_t executions(std::string_view name) const;
  std::int64_t submit_calls() const { return submit_calls_; }

 private:
  struct Unit {
    std::size_t job = 0;
    std::vector<DeliveredInput> inputs;
    std::int64_t attempts = 0;
    Millis started_at = kNoTime;
  };
  struct Job {
    std::string external_id;
    JobDescriptor descriptor;
    bool closed = false;
    bool killed = false;
    std::size_t pending = 0;
    std::vector<ContentEvent> events;
    std::set<std::pair<std::string, std::int64_t>> seen;
  };
  enum EventKind { kComplete = 0, kAbort = 1, kSubmit = 2 };
  struct Event {
    Millis at = 0;
    int kind = kSubmit;
    std::uint64_t seq = 0;
    std::size_t unit = 0;
    bool operator>(const Event& o) const {
      return std::tie(at, kind, seq) > std::tie(o.at, o.kind, o.seq);
    }
  };

  void advance(Millis now);
  void start_units(Millis now);
  void finish_unit(std::size_t unit, Millis now);
  void schedule(Millis at, int kind, std::size_t unit);
  bool on_disk(const Unit& unit, Millis now) const;

  const Clock& clock_;
  ComputeSimConfig config_;
  DdmBackend* stage_;
  MetricsProvider metrics_;
  std::atomic<bool> down_{false};
  std::atomic<std::int64_t> submit_calls_{0};
  std::vector<Job> jobs_;
  std::map<std::string, std::size_t> by_processing_;
  std::map<std::string, std::size_t> by_external_;
  std::vector<Unit> units_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::deque<std::size_t> queue_;
  std::int64_t busy_ = 0;
  std::uint64_t seq_ = 0;
  Millis now_ = 0;
  std::map<std::string, std::int64_t, std::less<>> executions_;
  mutable std::mutex mu_;
};

// Every delivered input completes immediately on its first attempt.
class InstantWfm final : public WfmBackend {
 public:
  explicit InstantWfm(const Clock& clock, MetricsProvider metrics = {})
      : clock_(clock), metrics_(std::move(metrics)) {}

  std::string submit(const JobDescriptor& job) override;
  void add_inputs(const std::string& external_id,
                  const std::vector<DeliveredInput>& inputs) override;
  PollResult poll(const std::string& external_id, Millis now, std::uint64_t cursor) override;
  void close(const std::string& external_id) override;
  void kill(const std::string& external_id) override;

  void set_down(bool down) { down_ = down; }

 private:
  struct Job {
    JobDescriptor descriptor;
    bool closed = false;
    bool killed = false;
    std::vector<ContentEvent> events;
    std::set<std::pair<std::string, std::int64_t>> seen;
  };
  Job& job(const std::string& external_id);

  const Clock& clock_;
  MetricsProvider metrics_;
  std::atomic<bool> down_{false};
  std::map<std::string, Job> jobs_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------

struct BackendPair {
  DdmBackend* ddm = nullptr;
  WfmBackend* wfm = nullptr;
};

// Routes a collection scope to its DDM/WFM pair.
class BackendRegistry {
 public:
  void set_default(std::shared_ptr<DdmBackend> ddm, std::shared_ptr<WfmBackend> wfm);
  void bind(const std::string& scope, std::shared_ptr<DdmBackend> ddm,
            std::shared_ptr<WfmBackend> wfm);
  // Throws Error(kNotFound) when no pair and no default exist.
  BackendPair for_scope(std::string_view scope) const;
  // Earliest pending event over all distinct backends.
  std::optional<Millis> next_event(Millis now) const;

 private:
  struct Entry {
    std::shared_ptr<DdmBackend> ddm;
    std::shared_ptr<WfmBackend> wfm;
  };
  std::optional<Entry> default_;
  std::map<std::string, Entry, std::less<>> scopes_;
};

// Scenario file: {tape, compute, clock: {mode: virtual|real, tick}}.
struct ClockConfig {
  bool virtual_time = true;
  Millis tick = 1000;
};

struct ScenarioConfig {
  TapeSimConfig tape;
  ComputeSimConfig compute;
  ClockConfig clock;
};

// Strict: unknown fields are rejected with Error(kParse). Times in the file
// are seconds (fractional allowed).
ScenarioConfig scenario_from_json(const Json& j);
Json scenario_to_json(const ScenarioConfig& scenario);

}  // namespace dds

#endif  // DDS_SRC_BACKENDS_HPP_
