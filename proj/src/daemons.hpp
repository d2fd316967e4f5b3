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

// The five daemons of the pipeline and the loops that drive them.
//
// Each daemon claims entities from the store, advances them one lifecycle
// step and writes the result back. Daemons never share memory: everything
// one daemon hands to another goes through the store (or, for consumers,
// the message transport). Every write is keyed by a deterministic id, so a
// step that is repeated after a crash converges to the same state.

#ifndef DDS_SRC_DAEMONS_HPP_
#define DDS_SRC_DAEMONS_HPP_

#include <array>
#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "backends.hpp"
#include "clock.hpp"
#include "store.hpp"
#include "transport.hpp"
#include "workflow.hpp"

namespace dds {

struct DaemonConfig {
  Millis poll_interval = 1000;
  std::size_t batch_size = 50;
  std::string worker_id;
  std::int64_t max_retries = 3;
  Millis lease = kDefaultLeaseMillis;
};

// Throws Error(kInvalidArgument).
void validate(const DaemonConfig& config);

// Cumulative counters; never decrease.
struct PipelineStats {
  enum Daemon { kClerk, kMarshaller, kTransformer, kCarrier, kConductor, kDaemonCount };

  std::array<std::atomic<std::int64_t>, kDaemonCount> steps{};
  std::array<std::atomic<std::int64_t>, kDaemonCount> advanced{};
  std::atomic<std::int64_t> step_errors{0};
  std::atomic<std::int64_t> works_created{0};
  std::atomic<std::int64_t> requests_finished{0};
  std::atomic<std::int64_t> requests_subfinished{0};
  std::atomic<std::int64_t> requests_failed{0};
  std::atomic<std::int64_t> messages_emitted{0};
  std::atomic<std::int64_t> messages_delivered{0};
  std::atomic<std::int64_t> messages_acked{0};
};

std::string_view daemon_name(PipelineStats::Daemon d);

// One structured record per advanced entity:
// {daemon, worker, entity, transition, duration_ms}.
using LogSink = std::function<void(const Json&)>;

struct PipelineContext {
  Store* store = nullptr;
  BackendRegistry* backends = nullptr;
  Transport* transport = nullptr;
  PipelineStats* stats = nullptr;
  LogSink log;
};

class Daemon {
 public:
  Daemon(PipelineContext ctx, DaemonConfig config);
  virtual ~Daemon() = default;

  virtual PipelineStats::Daemon kind() const = 0;
  // Advances up to batch_size entities per phase; returns how many moved.
  std::size_t step();

  const DaemonConfig& config() const { return config_; }

 protected:
  virtual std::size_t run_step() = 0;

  Store& store() { return *ctx_.store; }
  Millis now() const { return ctx_.store->clock().now(); }
  void log(std::string_view entity, std::string_view transition, Millis started);
  // Parsed workflow of a request (immutable, so caching is safe).
  std::shared_ptr<const Workflow> workflow_of(const std::string& request_id);

  PipelineContext ctx_;
  DaemonConfig config_;

 private:
  std::map<std::string, std::shared_ptr<const Workflow>> workflows_;
};

class Clerk final : public Daemon {
 public:
  using Daemon::Daemon;
  PipelineStats::Daemon kind() const override { return PipelineStats::kClerk; }

 private:
  std::size_t run_step() override;
  void fail_request(const RequestRecord& r, const Json& report);
};

class Marshaller final : public Daemon {
 public:
  using Daemon::Daemon;
  PipelineStats::Daemon kind() const override { return PipelineStats::kMarshaller; }

 private:
  std::size_t run_step() override;
  // Moves the request to its terminal status once nothing is pending.
  bool finalize(const std::string& request_id);

  bool first_step_ = true;
};

class Transformer final : public Daemon {
 public:
  using Daemon::Daemon;
  PipelineStats::Daemon kind() const override { return PipelineStats::kTransformer; }

 private:
  std::size_t run_step() override;
  bool activate(const WorkRecord& record);
  std::size_t stage_pass();
  bool finalize(const WorkRecord& record);
  // New -> ... -> status in one step, for works that never reach a backend.
  void walk_to(const WorkRecord& record, WorkStatus status, const Metrics& metrics,
               const std::string& error);
};

class Carrier final : public Daemon {
 public:
  using Daemon::Daemon;
  PipelineStats::Daemon kind() const override { return PipelineStats::kCarrier; }

 private:
  std::size_t run_step() override;
  bool submit(const Processing& p);
  std::size_t drive(const Processing& p);
  std::size_t apply(const Processing& p, const WorkRecord& work, const PollResult& result);
  std::size_t sweep_works();

  std::map<std::string, std::uint64_t> cursors_;
};

class Conductor final : public Daemon {
 public:
  using Daemon::Daemon;
  PipelineStats::Daemon kind() const override { return PipelineStats::kConductor; }

 private:
  std::size_t run_step() override;
  void emit(MessageType type, const std::string& entity, std::string_view qualifier,
            const std::string& request_id, Json payload);
  std::size_t release_dependents(const Content& content);
  const std::string& consumer_of(const std::string& request_id);

  // Change-feed position; starts from 0 after every restart so nothing that
  // happened while the Conductor was down is missed.
  std::uint64_t cursor_ = 0;
  std::map<std::string, std::string> consumers_;
};

// True once every dependency listed in the content's "deps" attribute is
// Processed.
bool dependencies_met(const Store& store, const Content& content);

// ---------------------------------------------------------------------------

struct PipelineConfig {
  DaemonConfig base;
  // Replicas per daemon kind (Clerk, Marshaller, Transformer, Carrier,
  // Conductor order).
  std::array<int, PipelineStats::kDaemonCount> replicas{1, 1, 1, 1, 1};
};

// The daemon set of one process. Steps are taken in pipeline order.
class Pipeline {
 public:
  Pipeline(PipelineContext ctx, PipelineConfig config);

  // One step of every daemon; returns the total advanced. An injected crash
  // kills the affected daemon, which is recreated under a new worker id.
  std::size_t step_all();
  // Steps until nothing moves (bounded by max_rounds).
  std::size_t run_until_quiescent(std::size_t max_rounds = 1'000'000);

  void restart(std::size_t index);
  std::size_t size() const { return daemons_.size(); }
  Daemon& daemon(std::size_t index) { return *daemons_[index]; }
  std::int64_t crashes() const { return crashes_; }
  const PipelineConfig& config() const { return config_; }

 private:
  struct Slot {
    PipelineStats::Daemon kind;
    int replica = 0;
    int generation = 0;
  };
  std::unique_ptr<Daemon> make(const Slot& slot);

  PipelineContext ctx_;
  PipelineConfig config_;
  std::vector<Slot> slots_;
  std::vector<std::unique_ptr<Daemon>> daemons_;
  std::int64_t crashes_ = 0;
};

// Event-driven virtual time: run to quiescence, then jump the clock to the
// next backend event, but never further than one poll interval.
class VirtualRunner {
 public:
  VirtualRunner(Pipeline& pipeline, VirtualClock& clock, BackendRegistry& backends)
      : pipeline_(pipeline), clock_(clock), backends_(backends) {}

  // Returns true when `done` became true before `deadline` (virtual).
  bool run_until(const std::function<bool()>& done, Millis deadline);
  // Fixed ticks: one step per daemon, then advance by poll_interval.
  bool run_ticks(const std::function<bool()>& done, Millis deadline);

  std::int64_t cycles() const { return cycles_; }

 private:
  Pipeline& pipeline_;
  VirtualClock& clock_;
  BackendRegistry& backends_;
  std::int64_t cycles_ = 0;
};

// One thread per daemon until `stop` is requested; releases the daemons'
// leases on the way out.
void run_pipeline(PipelineContext ctx, const PipelineConfig& config, std::stop_token stop);

}  // namespace dds

#endif  // DDS_SRC_DAEMONS_HPP_
