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

#include "carousel.hpp"

#include <cmath>
#include <limits>

#include "csv.hpp"

namespace dds {
namespace {

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return Json(v).dump();
}

std::string seconds(Millis ms) { return num(static_cast<double>(ms) / 1000.0); }

double ratio(double a, double b) {
  if (b == 0) return a == 0 ? 1.0 : std::numeric_limits<double>::infinity();
  return a / b;
}

}  // namespace

std::string CarouselPolicy::label() const {
  std::string s = granularity == Granularity::kFileLevel ? "file-level" : "dataset-level";
  if (granularity == Granularity::kFileLevel && !prompt_release) s += "-noprompt";
  if (granularity == Granularity::kFileLevel && bundle_size > 1) s += "-b" + std::to_string(bundle_size);
  return s;
}

CarouselPolicy parse_policy(std::string_view name) {
  CarouselPolicy p;
  if (name == "file-level") {
    p.granularity = Granularity::kFileLevel;
  } else if (name == "dataset-level") {
    p.granularity = Granularity::kDatasetLevel;
    p.prompt_release = false;
  } else {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown policy '" + std::string(name) + "' (file-level|dataset-level)");
  }
  return p;
}

Workflow build_carousel_workflow(const std::string& dataset, const CarouselPolicy& policy) {
  if (policy.bundle_size < 1) throw Error(ErrorCode::kInvalidArgument, "bundle_size must be positive");
  Workflow wf;
  wf.name = "carousel";
  WorkTemplate t;
  t.name = "process";
  t.input_spec = {std::string(kCarouselScope), dataset};
  t.output_spec = {std::string(kCarouselScope), dataset + ".out"};
  t.executable_spec = "process " + dataset;
  t.is_entry = true;
  t.max_instantiations = 1;
  t.delivery.granularity = policy.granularity;
  t.delivery.prompt_release =
      policy.granularity == Granularity::kFileLevel && policy.prompt_release;
  t.delivery.bundle_size = policy.granularity == Granularity::kFileLevel ? policy.bundle_size : 1;
  wf.templates.push_back(t);
  wf.max_total_works = 1;
  return wf;
}

CarouselRun run_carousel(const ScenarioConfig& scenario, const CarouselPolicy& policy,
                         const CarouselOptions& options) {
  RuntimeOptions ro;
  ro.virtual_time = true;
  ro.pipeline = options.pipeline;
  Runtime rt(ro);
  auto tape = std::make_shared<TapeSim>(scenario.tape);
  auto compute = std::make_shared<ComputeSim>(rt.clock(), scenario.compute, tape.get());
  rt.backends().bind(std::string(kCarouselScope), tape, compute);

  CarouselRun run;
  run.request_id = rt.submit({build_carousel_workflow(scenario.tape.dataset, policy), "carousel"});
  if (options.fault_hook) rt.store().set_fault_hook(options.fault_hook);
  auto done = [&] { return is_terminal(rt.store().get<RequestRecord>(run.request_id).status); };
  if (options.ticks) {
    VirtualRunner ticks(rt.pipeline(), *rt.virtual_clock(), rt.backends());
    run.completed = ticks.run_ticks(done, options.deadline);
    run.cycles = ticks.cycles();
  } else {
    run.completed = rt.run_until(done, options.deadline);
    run.cycles = rt.cycles();
  }
  rt.store().set_fault_hook({});
  run.crashes = rt.pipeline().crashes();
  run.step_errors = rt.stats().step_errors.load();

  const Store& store = rt.store();
  CarouselMetrics& m = run.metrics;
  m.policy = policy.label();
  m.request_status = std::string(to_string(store.get<RequestRecord>(run.request_id).status));
  Query<Collection> cq;
  cq.where = [&](const Collection& c) {
    return c.request_id == run.request_id && c.kind == CollectionKind::kInput;
  };
  for (const auto& coll : store.list(cq)) {
    Query<Content> q;
    q.owner = coll.collection_id;
    for (auto& c : store.list(q)) run.inputs.push_back(std::move(c));
  }
  std::int64_t attempts = 0;
  Millis first = std::numeric_limits<Millis>::max();
  for (const auto& c : run.inputs) {
    ++m.attempts_histogram[c.attempt_count];
    ++m.jobs;
    attempts += c.attempt_count;
    if (c.started_at != kNoTime) first = std::min(first, c.started_at);
    if (c.finished_at != kNoTime) m.makespan = std::max(m.makespan, c.finished_at);
    if (c.status == ContentStatus::kProcessed) m.bytes_processed += c.size_bytes;
    if (c.status == ContentStatus::kFailed) m.bytes_failed += c.size_bytes;
    run.executions[c.name] = compute->executions(c.name);
  }
  m.mean_attempts = m.jobs ? static_cast<double>(attempts) / static_cast<double>(m.jobs) : 0.0;
  m.time_to_first_processing = first == std::numeric_limits<Millis>::max() ? 0 : first;

  const Millis end = rt.clock().now();
  const DiskFootprint fp = tape->footprint(end);
  m.peak_disk_bytes = fp.peak_bytes;
  m.disk_byte_seconds = fp.byte_seconds;
  m.disk_series = fp.series;
  m.bytes_total = tape->total_bytes();
  for (const auto& f : scenario.tape.files) {
    if (tape->stage_time(f.name) <= end) m.bytes_staged += f.size_bytes;
  }
  run.audit = store.audit();
  return run;
}

PolicyComparison compare_policies(const ScenarioConfig& scenario,
                                  const std::vector<CarouselPolicy>& policies,
                                  const CarouselOptions& options) {
  if (policies.size() < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two policies");
  PolicyComparison out;
  for (const auto& p : policies) out.rows.push_back(run_carousel(scenario, p, options).metrics);
  const CarouselMetrics& base = out.rows.front();
  for (const auto& r : out.rows) {
    out.peak_ratio.push_back(ratio(static_cast<double>(r.peak_disk_bytes),
                                   static_cast<double>(base.peak_disk_bytes)));
    out.byte_seconds_ratio.push_back(ratio(static_cast<double>(r.disk_byte_seconds),
                                           static_cast<double>(base.disk_byte_seconds)));
    out.mean_attempts_ratio.push_back(ratio(r.mean_attempts, base.mean_attempts));
  }
  return out;
}

std::string comparison_csv(const PolicyComparison& c) {
  std::string out = csv_row({"policy", "jobs", "mean_attempts", "peak_disk_bytes",
                             "disk_byte_seconds", "makespan_s", "time_to_first_processing_s",
                             "peak_ratio", "byte_seconds_ratio", "mean_attempts_ratio", "status"});
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    const auto& r = c.rows[i];
    out += csv_row({r.policy, std::to_string(r.jobs), num(r.mean_attempts),
                    std::to_string(r.peak_disk_bytes), std::to_string(r.disk_byte_seconds),
                    seconds(r.makespan), seconds(r.time_to_first_processing), num(c.peak_ratio[i]),
                    num(c.byte_seconds_ratio[i]), num(c.mean_attempts_ratio[i]), r.request_status});
  }
  return out;
}

std::string histogram_csv(const std::vector<CarouselMetrics>& rows) {
  std::string out = csv_row({"policy", "attempts", "jobs"});
  for (const auto& r : rows) {
    for (const auto& [a, n] : r.attempts_histogram) {
      out += csv_row({r.policy, std::to_string(a), std::to_string(n)});
    }
  }
  return out;
}

std::string disk_series_csv(const std::vector<CarouselMetrics>& rows) {
  std::string out = csv_row({"policy", "time_s", "bytes"});
  for (const auto& r : rows) {
    for (const auto& [t, b] : r.disk_series) out += csv_row({r.policy, seconds(t), std::to_string(b)});
  }
  return out;
}

}  // namespace dds
