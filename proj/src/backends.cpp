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


#include "backends.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json_util.hpp"

namespace dds {

namespace {

// Uniform in [0, 1) from a 64-bit hash.
double unit_interval(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

Millis seconds_to_millis(double seconds) { return std::llround(seconds * 1000.0); }

}  // namespace

std::string_view to_string(StageState state) {
  switch (state) {
    case StageState::kOnTape: return "OnTape";
    case StageState::kStaging: return "Staging";
    case StageState::kOnDisk: return "OnDisk";
  }
  return "OnTape";
}

std::vector<FileInfo> generate_files(std::size_t n, std::int64_t min_bytes,
                                     std::int64_t max_bytes, std::uint64_t seed,
                                     std::string_view prefix) {
  if (min_bytes < 0 || max_bytes < min_bytes) {
    throw Error(ErrorCode::kInvalidArgument, "bad file size range");
  }
  const auto span = static_cast<std::uint64_t>(max_bytes - min_bytes) + 1;
  std::vector<FileInfo> files;
  files.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%.*s_%05zu", static_cast<int>(prefix.size()),
                  prefix.data(), i);
    const std::uint64_t h = mix_seed(mix_seed(seed, 0x5172e5), i);
    files.push_back({name, min_bytes + static_cast<std::int64_t>(h % span), Json::object()});
  }
  return files;
}

// ---------------------------------------------------------------------------
// TapeSim

TapeSim::TapeSim(TapeSimConfig config) : config_(std::move(config)) {
  std::vector<std::string> unscheduled;
  for (const auto& f : config_.files) {
    if (f.size_bytes < 0) throw Error(ErrorCode::kInvalidArgument, "negative file size");
    if (!sizes_.emplace(f.name, f.size_bytes).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate file " + f.name);
    }
    auto it = config_.stage_schedule.find(f.name);
    if (it != config_.stage_schedule.end()) {
      if (it->second < 0) throw Error(ErrorCode::kInvalidArgument, "negative stage time");
      stage_at_[f.name] = it->second;
    } else {
      unscheduled.push_back(f.name);
    }
  }
  for (const auto& [name, t] : config_.stage_schedule) {
    if (sizes_.count(name) == 0) {
      throw Error(ErrorCode::kInvalidArgument, "schedule names unknown file " + name);
    }
  }
  if (config_.files_per_second < 0) {
    throw Error(ErrorCode::kInvalidArgument, "files_per_second must be >= 0");
  }
  // Seeded Fisher-Yates over the files without an explicit time.
  for (std::size_t i = unscheduled.size(); i > 1; --i) {
    const std::uint64_t h = mix_seed(mix_seed(config_.seed, 0x7a9e), i);
    std::swap(unscheduled[i - 1], unscheduled[h % i]);
  }
  for (std::size_t slot = 0; slot < unscheduled.size(); ++slot) {
    Millis t = 0;
    if (config_.files_per_second > 0) {
      t = std::llround(static_cast<double>(slot + 1) * 1000.0 / config_.files_per_second);
    }
    stage_at_[unscheduled[slot]] = t;
  }
  for (auto& [name, t] : stage_at_) {
    t += config_.origin;
    times_.push_back(t);
  }
  std::sort(times_.begin(), times_.end());
}

std::vector<FileInfo> TapeSim::resolve_collection(const CollectionRef& ref) {
  if (ref.name != config_.dataset) {
    throw Error(ErrorCode::kNotFound, "unknown dataset " + ref.scope + ":" + ref.name);
  }
  return config_.files;
}

StageReport TapeSim::stage_status(std::string_view file, Millis now) {
  std::lock_guard lock(mu_);
  const Millis t = stage_time(file);
  if (now >= t) return {StageState::kOnDisk, t};
  // Staging is never reported: the schedule only fixes completion times.
  return {StageState::kOnTape, 0};
}

void TapeSim::release(std::string_view file, Millis now) {
  std::lock_guard lock(mu_);
  stage_time(file);
  released_.emplace(std::string(file), now);
}

std::optional<Millis> TapeSim::next_event(Millis now) const {
  std::lock_guard lock(mu_);
  auto it = std::upper_bound(times_.begin(), times_.end(), now);
  if (it == times_.end()) return std::nullopt;
  return *it;
}

Millis TapeSim::stage_time(std::string_view file) const {
  auto it = stage_at_.find(file);
  if (it == stage_at_.end()) {
    throw Error(ErrorCode::kNotFound, "unknown file " + std::string(file));
  }
  return it->second;
}

std::optional<Millis> TapeSim::released_at(std::string_view file) const {
  std::lock_guard lock(mu_);
  auto it = released_.find(file);
  if (it == released_.end()) return std::nullopt;
  return it->second;
}

DiskFootprint TapeSim::footprint(Millis end) const {
  std::lock_guard lock(mu_);
  std::vector<std::pair<Millis, std::int64_t>> deltas;
  for (const auto& [name, t] : stage_at_) {
    if (t > end) continue;
    const std::int64_t size = sizes_.find(name)->second;
    deltas.emplace_back(t, size);
    auto r = released_.find(name);
    // Released before it landed: never occupied disk.
    if (r != released_.end() && r->second <= end) deltas.emplace_back(std::max(r->second, t), -size);
  }
  std::sort(deltas.begin(), deltas.end());
  DiskFootprint fp;
  std::int64_t occupancy = 0;
  __int128 byte_millis = 0;
  Millis last = 0;
  for (std::size_t i = 0; i < deltas.size();) {
    const Millis t = deltas[i].first;
    byte_millis += static_cast<__int128>(occupancy) * (t - last);
    // All changes at one instant apply together, so a release and a
    // stage-in at the same time never overlap.
    for (; i < deltas.size() && deltas[i].first == t; ++i) occupancy += deltas[i].second;
    fp.peak_bytes = std::max(fp.peak_bytes, occupancy);
    fp.series.emplace_back(t, occupancy);
    last = t;
  }
  if (end > last) byte_millis += static_cast<__int128>(occupancy) * (end - last);
  fp.byte_seconds = static_cast<std::int64_t>(byte_millis / 1000);
  return fp;
}

std::int64_t TapeSim::total_bytes() const {
  std::int64_t total = 0;
  for (const auto& f : config_.files) total += f.size_bytes;
  return total;
}

// ---------------------------------------------------------------------------
// InstantDdm

std::vector<FileInfo> InstantDdm::resolve_collection(const CollectionRef& ref) {
  std::lock_guard lock(mu_);
  ++resolve_calls_;
  if (down_) throw Error(ErrorCode::kBackendUnavailable, "ddm unreachable");
  std::int64_t n = config_.files_per_collection;
  if (auto it = overrides_.find(ref.name); it != overrides_.end()) n = it->second;
  std::vector<FileInfo> files;
  for (std::int64_t i = 0; i < n; ++i) {
    files.push_back({ref.name + "." + std::to_string(i), config_.file_size, Json::object()});
  }
  return files;
}

// ---------------------------------------------------------------------------
// ComputeSim

ComputeSim::ComputeSim(const Clock& clock, ComputeSimConfig config, DdmBackend* stage,
                       MetricsProvider metrics)
    : clock_(clock), config_(config), stage_(stage), metrics_(std::move(metrics)) {
  if (config_.workers < 1) throw Error(ErrorCode::kInvalidArgument, "workers must be >= 1");
  if (config_.per_file_processing_time < 0) {
    throw Error(ErrorCode::kInvalidArgument, "negative processing time");
  }
  // A zero wait would abort and resubmit at the same instant forever.
  if (config_.input_wait_timeout <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "input_wait_timeout must be > 0");
  }
  if (config_.resubmit_interval <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "resubmit_interval must be > 0");
  }
  if (!(config_.failure_rate >= 0.0 && config_.failure_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "failure_rate must be in [0,1]");
  }
  now_ = clock_.now();
}

std::string ComputeSim::submit(const JobDescriptor& job) {
  std::lock_guard lock(mu_);
  ++submit_calls_;
  if (down_) throw Error(ErrorCode::kBackendUnavailable, "wfm unreachable");
  if (auto it = by_processing_.find(job.processing_id); it != by_processing_.end()) {
    return jobs_[it->second].external_id;
  }
  Job j;
  j.external_id = "cs-" + std::to_string(jobs_.size() + 1);
  j.descriptor = job;
  by_processing_[job.processing_id] = jobs_.size();
  by_external_[j.external_id] = jobs_.size();
  jobs_.push_back(std::move(j));
  return jobs_.back().external_id;
}

void ComputeSim::add_inputs(const std::string& external_id,
                            const std::vector<DeliveredInput>& inputs) {
  std::lock_guard lock(mu_);
  if (down_) throw Error(ErrorCode::kBackendUnavailable, "wfm unreachable");
  auto it = by_external_.find(external_id);
  if (it == by_external_.end()) throw Error(ErrorCode::kNotFound, "unknown job " + external_id);
  const Millis now = clock_.now();
  advance(now);
  Job& job = jobs_[it->second];
  if (job.killed) return;
  Unit unit;
  unit.job = it->second;
  for (const auto& in : inputs) {
    if (job.seen.insert({in.name, in.attempt}).second) unit.inputs.push_back(in);
  }
  if (unit.inputs.empty()) return;
  ++job.pending;
  units_.push_back(std::move(unit));
  schedule(now, kSubmit, units_.size() - 1);
  advance(now);
}

PollResult ComputeSim::poll(const std::string& external_id, Millis now, std::uint64_t cursor) {
  std::lock_guard lock(mu_);
  if (down_) throw Error(ErrorCode::kBackendUnavailable, "wfm unreachable");
  auto it = by_external_.find(external_id);
  if (it == by_external_.end()) throw Error(ErrorCode::kNotFound, "unknown job " + external_id);
  advance(now);
  const Job& job = jobs_[it->second];
  PollResult result;
  for (std::size_t i = cursor; i < job.events.size(); ++i) result.events.push_back(job.events[i]);
  result.cursor = job.events.size();
  result.terminal = job.killed || (job.closed && job.pending == 0);
  result.failed = job.killed;
  if (result.terminal && metrics_) result.metrics = metrics_(job.descriptor);
  return result;
}

void ComputeSim::close(const std::string& external_id) {
  std::lock_guard lock(mu_);
  auto it = by_external_.find(external_id);
  if (it == by_external_.end()) throw Error(ErrorCode::kNotFound, "unknown job " + external_id);
  jobs_[it->second].closed = true;
}

void ComputeSim::kill(const std::string& external_id) {
  std::lock_guard lock(mu_);
  auto it = by_external_.find(external_id);
  if (it == by_external_.end()) throw Error(ErrorCode::kNotFound, "unknown job " + external_id);
  jobs_[it->second].killed = true;
}

std::optional<Millis> ComputeSim::next_event(Millis) const {
  std::lock_guard lock(mu_);
  if (events_.empty()) return std::nullopt;
  return events_.top().at;
}

std::int64_t ComputeSim::executions(std::string_view name) const {
  std::lock_guard lock(mu_);
  auto it = executions_.find(name);
  return it == executions_.end() ? 0 : it->second;
}

void ComputeSim::schedule(Millis at, int kind, std::size_t unit) {
  events_.push({at, kind, ++seq_, unit});
}

bool ComputeSim::on_disk(const Unit& unit, Millis now) const {
  if (stage_ == nullptr) return true;
  return std::all_of(unit.inputs.begin(), unit.inputs.end(), [&](const DeliveredInput& in) {
    return stage_->stage_status(in.name, now).state == StageState::kOnDisk;
  });
}

void ComputeSim::advance(Millis now) {
  while (!events_.empty() && events_.top().at <= now) {
    const Event e = events_.top();
    events_.pop();
    now_ = e.at;
    Unit& unit = units_[e.unit];
    switch (e.kind) {
      case kSubmit:
        ++unit.attempts;
        if (on_disk(unit, e.at)) {
          queue_.push_back(e.unit);
        } else {
          schedule(e.at + config_.input_wait_timeout, kAbort, e.unit);
        }
        break;
      case kAbort: {
        const Millis ri = config_.resubmit_interval;
        schedule((e.at + ri - 1) / ri * ri, kSubmit, e.unit);
        break;
      }
      case kComplete:
        finish_unit(e.unit, e.at);
        break;
    }
    start_units(e.at);
  }
  now_ = std::max(now_, now);
}

void ComputeSim::start_units(Millis now) {
  while (busy_ < config_.workers && !queue_.empty()) {
    const std::size_t u = queue_.front();
    queue_.pop_front();
    Unit& unit = units_[u];
    Job& job = jobs_[unit.job];
    if (job.killed) {
      --job.pending;
      continue;
    }
    ++busy_;
    unit.started_at = now;
    for (const auto& in : unit.inputs) ++executions_[in.name];
    const auto n = static_cast<Millis>(unit.inputs.size());
    schedule(now + n * config_.per_file_processing_time, kComplete, u);
  }
}

void ComputeSim::finish_unit(std::size_t u, Millis now) {
  --busy_;
  Unit& unit = units_[u];
  Job& job = jobs_[unit.job];
  --job.pending;
  if (job.killed) return;
  for (const auto& in : unit.inputs) {
    ContentEvent ev;
    ev.name = in.name;
    ev.delivery_attempt = in.attempt;
    ev.attempts = unit.attempts;
    ev.started_at = unit.started_at;
    ev.finished_at = now;
    const double draw =
        unit_interval(mix_seed(fnv1a(in.name, config_.seed), static_cast<std::uint64_t>(in.attempt)));
    ev.state = draw < config_.failure_rate ? EventState::kFailed : EventState::kProcessed;
    job.events.push_back(std::move(ev));
  }
}

// ---------------------------------------------------------------------------
// InstantWfm

std::string InstantWfm::submit(const JobDescriptor& job) {
  std::lock_guard lock(mu_);
  if (down_) throw Error(ErrorCode::kBackendUnavailable, "wfm unreachable");
  const std::string ext = "iw-" + job.processing_id;
  jobs_.try_emplace(ext, Job{job, false, false, {}, {}});
  return ext;
}

InstantWfm::Job& InstantWfm::job(const std::string& external_id) {
  auto it = jobs_.find(external_id);
  if (it == jobs_.end()) throw Error(ErrorCode::kNotFound, "unknown job " + external_id);
  return it->second;
}

void InstantWfm::add_inputs(const std::string& external_id,
                            const std::vector<DeliveredInput>& inputs) {
  std::lock_guard lock(mu_);
  if (down_) throw Error(ErrorCode::kBackendUnavailable, "wfm unreachable");
  Job& j = job(external_id);
  const Millis now = clock_.now();
  for (const auto& in : inputs) {
    if (!j.seen.insert({in.name, in.attempt}).second) continue;
    ContentEvent ev;
    ev.name = in.name;
    ev.delivery_attempt = in.attempt;
    ev.started_at = now;
    ev.finished_at = now;
    j.events.push_back(std::move(ev));
  }
}

PollResult InstantWfm::poll(const std::string& external_id, Millis, std::uint64_t cursor) {
  std::lock_guard lock(mu_);
  if (down_) throw Error(ErrorCode::kBackendUnavailable, "wfm unreachable");
  Job& j = job(external_id);
  PollResult result;
  for (std::size_t i = cursor; i < j.events.size(); ++i) result.events.push_back(j.events[i]);
  result.cursor = j.events.size();
  result.terminal = j.closed || j.killed;
  result.failed = j.killed;
  if (result.terminal && metrics_) result.metrics = metrics_(j.descriptor);
  return result;
}

void InstantWfm::close(const std::string& external_id) {
  std::lock_guard lock(mu_);
  job(external_id).closed = true;
}

void InstantWfm::kill(const std::string& external_id) {
  std::lock_guard lock(mu_);
  job(external_id).killed = true;
}

// ---------------------------------------------------------------------------
// BackendRegistry

void BackendRegistry::set_default(std::shared_ptr<DdmBackend> ddm,
                                  std::shared_ptr<WfmBackend> wfm) {
  default_ = Entry{std::move(ddm), std::move(wfm)};
}

void BackendRegistry::bind(const std::string& scope, std::shared_ptr<DdmBackend> ddm,
                           std::shared_ptr<WfmBackend> wfm) {
  scopes_[scope] = Entry{std::move(ddm), std::move(wfm)};
}

BackendPair BackendRegistry::for_scope(std::string_view scope) const {
  if (auto it = scopes_.find(scope); it != scopes_.end()) {
    return {it->second.ddm.get(), it->second.wfm.get()};
  }
  if (default_) return {default_->ddm.get(), default_->wfm.get()};
  throw Error(ErrorCode::kNotFound, "no backend for scope " + std::string(scope));
}

std::optional<Millis> BackendRegistry::next_event(Millis now) const {
  std::optional<Millis> best;
  auto consider = [&](std::optional<Millis> t) {
    if (t && (!best || *t < *best)) best = t;
  };
  auto visit = [&](const Entry& e) {
    if (e.ddm) consider(e.ddm->next_event(now));
    if (e.wfm) consider(e.wfm->next_event(now));
  };
  if (default_) visit(*default_);
  for (const auto& [scope, e] : scopes_) visit(e);
  return best;
}

// ---------------------------------------------------------------------------
// Scenario files

namespace {

using namespace json_util;

double seconds_field(const Json& j, std::string_view key, const std::string& path,
                     double fallback) {
  const Json* f = field(j, key);
  if (f == nullptr) return fallback;
  const double v = get_number(*f, path + "." + std::string(key));
  if (v < 0) fail(path + "." + std::string(key), "must be >= 0");
  return v;
}

TapeSimConfig tape_from_json(const Json& j, const std::string& path) {
  expect_object(j, path,
                {"dataset", "files", "generate", "stage_schedule", "files_per_second", "seed"});
  TapeSimConfig tape;
  tape.dataset = optional_string(j, "dataset", path, tape.dataset);
  if (const Json* f = field(j, "seed")) tape.seed = static_cast<std::uint64_t>(get_int(*f, path + ".seed"));
  tape.files_per_second = seconds_field(j, "files_per_second", path, 0.0);
  if (const Json* files = field(j, "files")) {
    if (!files->is_array()) fail(path + ".files", "expected an array");
    for (std::size_t i = 0; i < files->size(); ++i) {
      const std::string p = path + ".files[" + std::to_string(i) + "]";
      expect_object((*files)[i], p, {"name", "size_bytes"});
      FileInfo info;
      info.name = get_string(required((*files)[i], "name", p), p + ".name");
      info.size_bytes = get_int(required((*files)[i], "size_bytes", p), p + ".size_bytes");
      tape.files.push_back(std::move(info));
    }
  }
  if (const Json* gen = field(j, "generate")) {
    const std::string p = path + ".generate";
    expect_object(*gen, p, {"count", "min_bytes", "max_bytes", "seed"});
    const auto count = get_int(required(*gen, "count", p), p + ".count");
    if (count < 0) fail(p + ".count", "must be >= 0");
    const auto lo = get_int(required(*gen, "min_bytes", p), p + ".min_bytes");
    const auto hi = get_int(required(*gen, "max_bytes", p), p + ".max_bytes");
    std::uint64_t seed = tape.seed;
    if (const Json* s = field(*gen, "seed")) seed = static_cast<std::uint64_t>(get_int(*s, p + ".seed"));
    auto files = generate_files(static_cast<std::size_t>(count), lo, hi, seed);
    tape.files.insert(tape.files.end(), files.begin(), files.end());
  }
  if (const Json* sched = field(j, "stage_schedule")) {
    if (!sched->is_object()) fail(path + ".stage_schedule", "expected an object");
    for (const auto& [name, t] : sched->items()) {
      const std::string p = path + ".stage_schedule." + name;
      const double v = get_number(t, p);
      if (v < 0) fail(p, "must be >= 0");
      tape.stage_schedule[name] = seconds_to_millis(v);
    }
  }
  return tape;
}

ComputeSimConfig compute_from_json(const Json& j, const std::string& path) {
  expect_object(j, path,
                {"workers", "per_file_processing_time", "input_wait_timeout", "resubmit_interval",
                 "failure_rate", "seed"});
  ComputeSimConfig c;
  if (const Json* f = field(j, "workers")) c.workers = get_int(*f, path + ".workers");
  c.per_file_processing_time = seconds_to_millis(
      seconds_field(j, "per_file_processing_time", path, c.per_file_processing_time / 1000.0));
  c.input_wait_timeout = seconds_to_millis(
      seconds_field(j, "input_wait_timeout", path, c.input_wait_timeout / 1000.0));
  c.resubmit_interval = seconds_to_millis(
      seconds_field(j, "resubmit_interval", path, c.resubmit_interval / 1000.0));
  if (const Json* f = field(j, "failure_rate")) c.failure_rate = get_number(*f, path + ".failure_rate");
  if (const Json* f = field(j, "seed")) c.seed = static_cast<std::uint64_t>(get_int(*f, path + ".seed"));
  if (c.workers < 1) fail(path + ".workers", "must be >= 1");
  if (c.failure_rate < 0 || c.failure_rate > 1) fail(path + ".failure_rate", "must be in [0,1]");
  if (c.resubmit_interval <= 0) fail(path + ".resubmit_interval", "must be > 0");
  if (c.input_wait_timeout <= 0) fail(path + ".input_wait_timeout", "must be > 0");
  if (c.per_file_processing_time < 0) fail(path + ".per_file_processing_time", "must be >= 0");
  return c;
}

}  // namespace

ScenarioConfig scenario_from_json(const Json& j) {
  expect_object(j, "scenario", {"tape", "compute", "clock"});
  ScenarioConfig s;
  if (const Json* t = field(j, "tape")) s.tape = tape_from_json(*t, "scenario.tape");
  if (const Json* c = field(j, "compute")) s.compute = compute_from_json(*c, "scenario.compute");
  if (const Json* c = field(j, "clock")) {
    expect_object(*c, "scenario.clock", {"mode", "tick"});
    const std::string mode = optional_string(*c, "mode", "scenario.clock", "virtual");
    if (mode != "virtual" && mode != "real") fail("scenario.clock.mode", "expected virtual|real");
    s.clock.virtual_time = mode == "virtual";
    s.clock.tick = seconds_to_millis(seconds_field(*c, "tick", "scenario.clock", 1.0));
    if (s.clock.tick <= 0) fail("scenario.clock.tick", "must be > 0");
  }
  return s;
}

Json scenario_to_json(const ScenarioConfig& s) {
  Json files = Json::array();
  for (const auto& f : s.tape.files) files.push_back({{"name", f.name}, {"size_bytes", f.size_bytes}});
  Json schedule = Json::object();
  for (const auto& [name, t] : s.tape.stage_schedule) schedule[name] = t / 1000.0;
  return {
      {"tape",
       {{"dataset", s.tape.dataset},
        {"files", files},
        {"stage_schedule", schedule},
        {"files_per_second", s.tape.files_per_second},
        {"seed", s.tape.seed}}},
      {"compute",
       {{"workers", s.compute.workers},
        {"per_file_processing_time", s.compute.per_file_processing_time / 1000.0},
        {"input_wait_timeout", s.compute.input_wait_timeout / 1000.0},
        {"resubmit_interval", s.compute.resubmit_interval / 1000.0},
        {"failure_rate", s.compute.failure_rate},
        {"seed", s.compute.seed}}},
      {"clock", {{"mode", s.clock.virtual_time ? "virtual" : "real"}, {"tick", s.clock.tick / 1000.0}}},
  };
}

}  // namespace dds
