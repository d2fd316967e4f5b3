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


#include "daemons.hpp"

#include <algorithm>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "wire.hpp"

namespace dds {

namespace {

bool is_crash(const Error& e) { return e.code() == ErrorCode::kInjectedCrash; }

// Swallows a lost race; anything else propagates.
template <class F>
bool try_transition(F&& f) {
  try {
    f();
    return true;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kStaleTransition) return false;
    throw;
  }
}

bool has_deps(const Content& c) {
  auto it = c.attributes.find("deps");
  return it != c.attributes.end() && it->is_array() && !it->empty();
}

const WorkTemplate& template_of(const Workflow& wf, const Work& work) {
  const WorkTemplate* t = wf.find_template(work.template_name);
  if (t == nullptr) {
    throw Error(ErrorCode::kNotFound, "work " + work.work_id + " names unknown template " +
                                          work.template_name);
  }
  return *t;
}

CollectionRef collection_ref(const Workflow& wf, const WorkRecord& rec) {
  const WorkTemplate& t = template_of(wf, rec.work);
  CollectionRef ref;
  ref.scope = substitute_params(t.input_spec.scope, rec.work.bindings);
  ref.name = substitute_params(t.input_spec.name, rec.work.bindings);
  ref.executable = substitute_params(t.executable_spec, rec.work.bindings);
  ref.request_id = rec.request_id;
  ref.work_id = rec.work.work_id;
  return ref;
}

}  // namespace

void validate(const DaemonConfig& config) {
  if (config.poll_interval <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "poll_interval must be > 0");
  }
  if (config.batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  if (config.max_retries < 0) {
    throw Error(ErrorCode::kInvalidArgument, "max_retries must be >= 0");
  }
  if (config.lease <= 0) throw Error(ErrorCode::kInvalidArgument, "lease must be > 0");
}

std::string_view daemon_name(PipelineStats::Daemon d) {
  switch (d) {
    case PipelineStats::kClerk: return "clerk";
    case PipelineStats::kMarshaller: return "marshaller";
    case PipelineStats::kTransformer: return "transformer";
    case PipelineStats::kCarrier: return "carrier";
    case PipelineStats::kConductor: return "conductor";
    default: return "unknown";
  }
}

bool dependencies_met(const Store& store, const Content& content) {
  auto it = content.attributes.find("deps");
  if (it == content.attributes.end()) return true;
  for (const auto& dep : *it) {
    auto d = store.find<Content>(dep.get<std::string>());
    if (!d || d->status != ContentStatus::kProcessed) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

Daemon::Daemon(PipelineContext ctx, DaemonConfig config)
    : ctx_(std::move(ctx)), config_(std::move(config)) {
  validate(config_);
  if (ctx_.store == nullptr || ctx_.backends == nullptr || ctx_.transport == nullptr ||
      ctx_.stats == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "incomplete pipeline context");
  }
}

std::size_t Daemon::step() {
  const std::size_t n = run_step();
  ctx_.stats->steps[kind()].fetch_add(1);
  ctx_.stats->advanced[kind()].fetch_add(static_cast<std::int64_t>(n));
  return n;
}

void Daemon::log(std::string_view entity, std::string_view transition, Millis started) {
  if (!ctx_.log) return;
  ctx_.log({{"daemon", daemon_name(kind())},
            {"worker", config_.worker_id},
            {"entity", entity},
            {"transition", transition},
            {"duration_ms", now() - started}});
}

std::shared_ptr<const Workflow> Daemon::workflow_of(const std::string& request_id) {
  if (auto it = workflows_.find(request_id); it != workflows_.end()) return it->second;
  if (workflows_.size() >= 4096) workflows_.clear();
  const auto r = store().get<RequestRecord>(request_id);
  auto wf = std::make_shared<const Workflow>(parse_workflow(r.workflow));
  workflows_.emplace(request_id, wf);
  return wf;
}

// ---------------------------------------------------------------------------
// Clerk

void Clerk::fail_request(const RequestRecord& r, const Json& report) {
  // The report rides on the first edge so a crash before the second one
  // still leaves the failure on record (the Marshaller finishes the walk).
  store().transition<RequestRecord>(r.request_id, RequestStatus::kNew,
                                    RequestStatus::kTransforming,
                                    [&](RequestRecord& row) { row.report = report.dump(); });
  store().transition<RequestRecord>(r.request_id, RequestStatus::kTransforming,
                                    RequestStatus::kFailed);
  ctx_.stats->requests_failed.fetch_add(1);
}

std::size_t Clerk::run_step() {
  Query<RequestRecord> q;
  q.statuses = {RequestStatus::kNew};
  const auto claimed =
      store().claim(q, config_.worker_id, config_.lease, config_.batch_size);
  std::size_t advanced = 0;
  for (const auto& r : claimed) {
    const Millis started = now();
    try {
      Workflow wf;
      try {
        wf = parse_workflow(r.workflow);
      } catch (const Error& e) {
        if (is_crash(e)) throw;
        fail_request(r, Json::array({{{"kind", "parse"}, {"message", e.what()}}}));
        log(r.request_id, "New->Failed", started);
        ++advanced;
        continue;
      }
      const ValidationReport report = validate_workflow(wf);
      if (!report.ok()) {
        fail_request(r, report.to_json());
        log(r.request_id, "New->Failed", started);
        ++advanced;
        continue;
      }
      std::vector<Work> works;
      try {
        works = instantiate_entry_works(wf, r.request_id);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kMissingBinding) throw;
        fail_request(r, Json::array({{{"kind", "missing-binding"}, {"message", e.what()}}}));
        log(r.request_id, "New->Failed", started);
        ++advanced;
        continue;
      }
      for (auto& w : works) {
        WorkRecord rec;
        rec.work = std::move(w);
        rec.request_id = r.request_id;
        rec.created_at = now();
        if (store().insert_if_absent(rec)) ctx_.stats->works_created.fetch_add(1);
      }
      store().transition<RequestRecord>(r.request_id, RequestStatus::kNew,
                                        RequestStatus::kTransforming);
      log(r.request_id, "New->Transforming", started);
      ++advanced;
    } catch (const Error& e) {
      if (is_crash(e)) throw;
      if (e.code() != ErrorCode::kStaleTransition) ctx_.stats->step_errors.fetch_add(1);
      store().release_lease<RequestRecord>(r.request_id, config_.worker_id);
    }
  }
  return advanced;
}

// ---------------------------------------------------------------------------
// Marshaller

bool Marshaller::finalize(const std::string& request_id) {
  const auto r = store().find<RequestRecord>(request_id);
  if (!r || r->status != RequestStatus::kTransforming) return false;
  Query<WorkRecord> q;
  q.owner = request_id;
  const auto works = store().list(q);
  RequestStatus status;
  if (works.empty()) {
    // Rejected by the Clerk, which crashed halfway through the walk.
    if (r->report.empty()) return false;
    status = RequestStatus::kFailed;
  } else {
    std::size_t finished = 0;
    for (const auto& w : works) {
      if (!is_terminal(w.work.status) || !w.evaluated) return false;
      if (w.work.status == WorkStatus::kFinished) ++finished;
    }
    if (finished == works.size() && !r->degraded) {
      status = RequestStatus::kFinished;
    } else if (finished > 0) {
      status = RequestStatus::kSubFinished;
    } else {
      status = RequestStatus::kFailed;
    }
  }
  if (!try_transition([&] {
        store().transition<RequestRecord>(request_id, RequestStatus::kTransforming, status);
      })) {
    return false;
  }
  switch (status) {
    case RequestStatus::kFinished: ctx_.stats->requests_finished.fetch_add(1); break;
    case RequestStatus::kSubFinished: ctx_.stats->requests_subfinished.fetch_add(1); break;
    default: ctx_.stats->requests_failed.fetch_add(1); break;
  }
  return true;
}

std::size_t Marshaller::run_step() {
  std::set<std::string> touched;
  if (first_step_) {
    // Recovery: a previous incarnation may have died between marking the
    // last work evaluated and finalizing its request.
    Query<RequestRecord> rq;
    rq.statuses = {RequestStatus::kTransforming};
    for (const auto& r : store().list(rq)) touched.insert(r.request_id);
    first_step_ = false;
  }
  Query<WorkRecord> q;
  q.statuses = {WorkStatus::kFinished, WorkStatus::kSubFinished, WorkStatus::kFailed};
  q.where = [](const WorkRecord& w) { return !w.evaluated; };
  const auto claimed = store().claim(q, config_.worker_id, config_.lease, config_.batch_size);
  std::size_t advanced = 0;
  for (const auto& rec : claimed) {
    const Millis started = now();
    const std::string& id = rec.work.work_id;
    try {
      const auto wf = workflow_of(rec.request_id);
      std::map<std::string, std::int64_t> counts;
      Query<WorkRecord> siblings;
      siblings.owner = rec.request_id;
      for (const auto& w : store().list(siblings)) ++counts[w.work.template_name];
      ConditionOutcome outcome;
      bool degraded = false;
      try {
        outcome = evaluate_conditions(*wf, rec.work, counts);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kTypeMismatch) throw;
        degraded = true;
        log(id, std::string("type-mismatch: ") + e.what(), started);
      }
      for (const auto& s : outcome.suppressed) {
        degraded = true;
        log(id, "suppressed " + s.destination_template + ": " + s.reason, started);
      }
      if (degraded) {
        store().update<RequestRecord>(rec.request_id, [](RequestRecord& r) { r.degraded = true; });
      }
      for (const auto& w : outcome.works) {
        WorkRecord child;
        child.work = w;
        child.request_id = rec.request_id;
        child.created_at = now();
        if (store().insert_if_absent(child)) {
          ctx_.stats->works_created.fetch_add(1);
          ++advanced;
          log(w.work_id, "created", started);
        }
      }
      store().update<WorkRecord>(id, [](WorkRecord& w) { w.evaluated = true; });
      store().release_lease<WorkRecord>(id, config_.worker_id);
      touched.insert(rec.request_id);
      ++advanced;
    } catch (const Error& e) {
      if (is_crash(e)) throw;
      ctx_.stats->step_errors.fetch_add(1);
      log(id, std::string("error: ") + e.what(), started);
      store().release_lease<WorkRecord>(id, config_.worker_id);
    }
  }
  for (const auto& request_id : touched) {
    if (finalize(request_id)) ++advanced;
  }
  return advanced;
}

// ---------------------------------------------------------------------------
// Transformer

void Transformer::walk_to(const WorkRecord& record, WorkStatus status, const Metrics& metrics,
                          const std::string& error) {
  const std::string& id = record.work.work_id;
  WorkStatus at = record.work.status;
  if (!record.walk_target) {
    store().update<WorkRecord>(id, [&](WorkRecord& w) {
      w.walk_target = status;
      if (!error.empty()) w.error = error;
    });
  }
  static constexpr WorkStatus kChain[] = {WorkStatus::kNew, WorkStatus::kActivated,
                                          WorkStatus::kRunning, WorkStatus::kTerminating};
  for (std::size_t i = 0; i + 1 < std::size(kChain); ++i) {
    if (at != kChain[i]) continue;
    store().transition<WorkRecord>(id, kChain[i], kChain[i + 1]);
    at = kChain[i + 1];
  }
  store().transition<WorkRecord>(id, WorkStatus::kTerminating, status,
                                 [&](WorkRecord& w) { w.work.output_metrics = metrics; });
}

bool Transformer::activate(const WorkRecord& rec) {
  const Millis started = now();
  const std::string& id = rec.work.work_id;
  const auto wf = workflow_of(rec.request_id);
  if (rec.walk_target) {
    finalize(rec);
    return true;
  }
  CollectionRef ref;
  BackendPair be;
  try {
    ref = collection_ref(*wf, rec);
    be = ctx_.backends->for_scope(ref.scope);
  } catch (const Error& e) {
    if (is_crash(e)) throw;
    WorkRecord r = rec;
    r.error = e.what();
    walk_to(r, WorkStatus::kFailed, {}, e.what());
    log(id, "New->Failed", started);
    return true;
  }
  std::vector<FileInfo> files;
  try {
    files = be.ddm->resolve_collection(ref);
  } catch (const Error& e) {
    if (is_crash(e)) throw;
    if (e.code() == ErrorCode::kBackendUnavailable && rec.ddm_retries < config_.max_retries) {
      store().update<WorkRecord>(id, [&](WorkRecord& w) {
        ++w.ddm_retries;
        w.next_retry_at = now() + config_.poll_interval;
        w.error = e.what();
      });
      store().release_lease<WorkRecord>(id, config_.worker_id);
      log(id, "ddm-retry", started);
      return false;
    }
    walk_to(rec, WorkStatus::kFailed, {}, e.what());
    log(id, "New->Failed", started);
    return true;
  }
  if (files.empty()) {
    walk_to(rec, WorkStatus::kFinished,
            [&] {
              Metrics m = be.ddm->summarize(ref, {});
              m["contents_total"] = 0;
              m["contents_processed"] = 0;
              m["contents_failed"] = 0;
              return m;
            }(),
            "");
    log(id, "New->Finished", started);
    return true;
  }

  const WorkTemplate& tmpl = template_of(*wf, rec.work);
  const Millis t = now();
  Collection in;
  in.collection_id = input_collection_id(id);
  in.request_id = rec.request_id;
  in.work_id = id;
  in.scope = ref.scope;
  in.name = ref.name;
  in.kind = CollectionKind::kInput;
  in.created_at = t;
  store().insert_if_absent(in);
  Collection out = in;
  out.collection_id = output_collection_id(id);
  out.scope = substitute_params(tmpl.output_spec.scope, rec.work.bindings);
  out.name = substitute_params(tmpl.output_spec.name, rec.work.bindings);
  out.kind = CollectionKind::kOutput;
  store().insert_if_absent(out);

  const bool dataset_level = tmpl.delivery.granularity == Granularity::kDatasetLevel;
  std::vector<std::string> gated;
  for (const auto& f : files) {
    Content c;
    c.content_id = content_id(in.collection_id, f.name);
    c.collection_id = in.collection_id;
    c.request_id = rec.request_id;
    c.work_id = id;
    c.name = f.name;
    c.size_bytes = f.size_bytes;
    c.attributes = f.attributes;
    if (has_deps(c)) {
      gated.push_back(c.content_id);
    } else if (dataset_level) {
      // Coarse policy: the whole dataset is released up front and the
      // backend's broker copes with files that are not on disk yet.
      c.status = ContentStatus::kAvailable;
      c.attempt_count = 1;
    } else {
      const StageReport rep = be.ddm->stage_status(f.name, t);
      if (rep.state == StageState::kOnDisk) {
        c.status = ContentStatus::kAvailable;
        c.attempt_count = 1;
        c.staged_at = rep.since;
      }
    }
    store().insert_if_absent(c);
    Content o;
    o.content_id = content_id(out.collection_id, f.name);
    o.collection_id = out.collection_id;
    o.request_id = rec.request_id;
    o.work_id = id;
    o.name = f.name;
    o.size_bytes = f.size_bytes;
    store().insert_if_absent(o);
  }
  for (const auto& cid : gated) {
    const auto c = store().find<Content>(cid);
    if (c && c->status == ContentStatus::kNew && dependencies_met(store(), *c)) {
      try_transition([&] {
        store().transition<Content>(cid, ContentStatus::kNew, ContentStatus::kAvailable);
      });
    }
  }
  Processing p;
  p.processing_id = processing_id(id);
  p.work_id = id;
  p.request_id = rec.request_id;
  p.created_at = t;
  store().insert_if_absent(p);
  store().transition<WorkRecord>(id, WorkStatus::kNew, WorkStatus::kActivated);
  log(id, "New->Activated", started);
  return true;
}

std::size_t Transformer::stage_pass() {
  std::size_t advanced = 0;
  Query<WorkRecord> q;
  q.statuses = {WorkStatus::kActivated, WorkStatus::kRunning};
  for (const auto& w : store().list(q)) {
    if (w.walk_target) {
      // Resume a walk interrupted by a crash.
      walk_to(w, *w.walk_target, {}, "");
      finalize(store().get<WorkRecord>(w.work.work_id));
      ++advanced;
      continue;
    }
    const auto col = store().find<Collection>(input_collection_id(w.work.work_id));
    if (!col) continue;
    DdmBackend* ddm = ctx_.backends->for_scope(col->scope).ddm;
    if (!ddm->tape_backed()) continue;
    const Millis t = now();
    Query<Content> cq;
    cq.owner = col->collection_id;
    cq.statuses = {ContentStatus::kNew};
    cq.where = [&](const Content& c) {
      return !has_deps(c) && ddm->stage_status(c.name, t).state == StageState::kOnDisk;
    };
    for (const auto& c : store().list(cq)) {
      const Millis since = ddm->stage_status(c.name, t).since;
      if (try_transition([&] {
            store().transition<Content>(c.content_id, ContentStatus::kNew,
                                        ContentStatus::kAvailable,
                                        [&](Content& row) { row.staged_at = since; });
          })) {
        log(c.content_id, "New->Available", t);
        ++advanced;
      }
    }
  }
  return advanced;
}

bool Transformer::finalize(const WorkRecord& rec) {
  const Millis started = now();
  const std::string& id = rec.work.work_id;
  const auto wf = workflow_of(rec.request_id);
  const CollectionRef ref = collection_ref(*wf, rec);
  BackendPair be = ctx_.backends->for_scope(ref.scope);

  Query<Content> q;
  q.owner = input_collection_id(id);
  const auto inputs = store().list(q);
  std::int64_t processed = 0;
  std::int64_t failed = 0;
  for (const auto& c : inputs) {
    processed += c.status == ContentStatus::kProcessed;
    failed += c.status == ContentStatus::kFailed;
  }
  Metrics metrics;
  const auto p = store().find<Processing>(processing_id(id));
  if (p) metrics = p->metrics;
  for (const auto& [k, v] : be.ddm->summarize(ref, inputs)) metrics[k] = v;
  metrics["contents_total"] = static_cast<double>(inputs.size());
  metrics["contents_processed"] = static_cast<double>(processed);
  metrics["contents_failed"] = static_cast<double>(failed);

  WorkStatus status;
  if (rec.walk_target) {
    status = *rec.walk_target;
  } else if (inputs.empty()) {
    status = p && p->status == ProcessingStatus::kFailed ? WorkStatus::kFailed
                                                          : WorkStatus::kFinished;
  } else if (processed == static_cast<std::int64_t>(inputs.size())) {
    status = WorkStatus::kFinished;
  } else if (processed > 0) {
    status = WorkStatus::kSubFinished;
  } else {
    status = WorkStatus::kFailed;
  }

  // Whatever is still cached goes now: everything for coarse or
  // non-prompt policies, leftovers (failed files, crash gaps) otherwise.
  if (be.ddm->tape_backed()) {
    const Millis t = now();
    for (const auto& c : inputs) {
      if (c.released_at != kNoTime) continue;
      be.ddm->release(c.name, t);
      store().update<Content>(c.content_id, [&](Content& row) { row.released_at = t; });
    }
  }
  WorkRecord current = store().get<WorkRecord>(id);
  if (current.work.status != WorkStatus::kTerminating) {
    if (is_terminal(current.work.status)) return false;
    walk_to(current, status, metrics, "");
  } else {
    if (!try_transition([&] {
          store().transition<WorkRecord>(id, WorkStatus::kTerminating, status,
                                         [&](WorkRecord& w) { w.work.output_metrics = metrics; });
        })) {
      return false;
    }
  }
  log(id, std::string("Terminating->") + std::string(to_string(status)), started);
  return true;
}

std::size_t Transformer::run_step() {
  std::size_t advanced = 0;
  const Millis t = now();
  Query<WorkRecord> fresh;
  fresh.statuses = {WorkStatus::kNew};
  fresh.where = [t](const WorkRecord& w) { return w.next_retry_at <= t; };
  for (const auto& w : store().claim(fresh, config_.worker_id, config_.lease, config_.batch_size)) {
    try {
      if (activate(w)) ++advanced;
    } catch (const Error& e) {
      if (is_crash(e)) throw;
      if (e.code() != ErrorCode::kStaleTransition) ctx_.stats->step_errors.fetch_add(1);
      log(w.work.work_id, std::string("error: ") + e.what(), t);
      store().release_lease<WorkRecord>(w.work.work_id, config_.worker_id);
    }
  }
  advanced += stage_pass();
  Query<WorkRecord> ending;
  ending.statuses = {WorkStatus::kTerminating};
  for (const auto& w :
       store().claim(ending, config_.worker_id, config_.lease, config_.batch_size)) {
    try {
      if (finalize(w)) ++advanced;
    } catch (const Error& e) {
      if (is_crash(e)) throw;
      if (e.code() != ErrorCode::kStaleTransition) ctx_.stats->step_errors.fetch_add(1);
      log(w.work.work_id, std::string("error: ") + e.what(), t);
      store().release_lease<WorkRecord>(w.work.work_id, config_.worker_id);
    }
  }
  return advanced;
}

// ---------------------------------------------------------------------------
// Carrier

bool Carrier::submit(const Processing& p) {
  const Millis started = now();
  const auto work = store().get<WorkRecord>(p.work_id);
  const auto wf = workflow_of(p.request_id);
  const WorkTemplate& tmpl = template_of(*wf, work.work);
  const CollectionRef ref = collection_ref(*wf, work);
  BackendPair be = ctx_.backends->for_scope(ref.scope);

  JobDescriptor job;
  job.processing_id = p.processing_id;
  job.work_id = p.work_id;
  job.request_id = p.request_id;
  job.template_name = work.work.template_name;
  job.scope = ref.scope;
  job.executable = ref.executable;
  job.work_kind = tmpl.work_kind;
  job.bindings = work.work.bindings;
  job.delivery = tmpl.delivery;

  std::string external_id;
  try {
    external_id = be.wfm->submit(job);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kBackendUnavailable) throw;
    if (p.submit_retries < config_.max_retries) {
      store().update<Processing>(p.processing_id, [&](Processing& row) {
        ++row.submit_retries;
        row.next_retry_at = now() + config_.poll_interval;
        row.error = e.what();
      });
      store().release_lease<Processing>(p.processing_id, config_.worker_id);
      log(p.processing_id, "submit-retry", started);
      return false;
    }
    store().transition<Processing>(p.processing_id, ProcessingStatus::kNew,
                                   ProcessingStatus::kFailed, [&](Processing& row) {
                                     row.external_id = "-";
                                     row.error = e.what();
                                   });
    log(p.processing_id, "New->Failed", started);
    return true;
  }
  store().transition<Processing>(p.processing_id, ProcessingStatus::kNew,
                                 ProcessingStatus::kSubmitted, [&](Processing& row) {
                                   row.external_id = external_id;
                                   row.submitted_at = now();
                                 });
  try_transition([&] {
    store().transition<WorkRecord>(p.work_id, WorkStatus::kActivated, WorkStatus::kRunning);
  });
  log(p.processing_id, "New->Submitted", started);
  return true;
}

std::size_t Carrier::apply(const Processing& p, const WorkRecord& work, const PollResult& result) {
  std::size_t advanced = 0;
  const std::string in_id = input_collection_id(p.work_id);
  const std::string out_id = output_collection_id(p.work_id);
  const auto wf = workflow_of(p.request_id);
  const DeliveryPolicy policy = template_of(*wf, work.work).delivery;
  const auto in = store().get<Collection>(in_id);
  DdmBackend* ddm = ctx_.backends->for_scope(in.scope).ddm;
  const bool prompt = policy.granularity == Granularity::kFileLevel && policy.prompt_release &&
                      ddm->tape_backed();
  for (const auto& ev : result.events) {
    const std::string cid = content_id(in_id, ev.name);
    auto c = store().find<Content>(cid);
    if (!c || c->attempt_count != ev.delivery_attempt) continue;
    // Handed to the backend, but the step died before marking it Delivered.
    if (c->status == ContentStatus::kAvailable) {
      try_transition([&] {
        store().transition<Content>(cid, ContentStatus::kAvailable, ContentStatus::kDelivered);
      });
      c = store().find<Content>(cid);
    }
    // Replayed or stale event (cursor reset, earlier attempt).
    if (!c || c->status != ContentStatus::kDelivered || c->attempt_count != ev.delivery_attempt) {
      continue;
    }
    const Millis t = now();
    const std::int64_t attempts = c->attempt_count + std::max<std::int64_t>(ev.attempts, 1) - 1;
    if (ev.state == EventState::kProcessed) {
      store().transition<Content>(cid, ContentStatus::kDelivered, ContentStatus::kProcessed,
                                  [&](Content& row) {
                                    row.attempt_count = attempts;
                                    row.started_at = ev.started_at;
                                    row.finished_at = ev.finished_at;
                                    for (const auto& [k, v] : ev.metrics) row.attributes[k] = v;
                                  });
      try_transition([&] {
        store().transition<Content>(content_id(out_id, ev.name), ContentStatus::kNew,
                                    ContentStatus::kAvailable);
      });
      if (prompt) {
        ddm->release(ev.name, t);
        store().update<Content>(cid, [&](Content& row) { row.released_at = t; });
      }
      log(cid, "Delivered->Processed", t);
    } else {
      store().transition<Content>(cid, ContentStatus::kDelivered, ContentStatus::kFailed,
                                  [&](Content& row) {
                                    row.attempt_count = attempts;
                                    row.started_at = ev.started_at;
                                    row.finished_at = ev.finished_at;
                                  });
      log(cid, "Delivered->Failed", t);
    }
    ++advanced;
  }
  return advanced;
}

std::size_t Carrier::drive(const Processing& p) {
  std::size_t advanced = 0;
  const Millis started = now();
  const auto work = store().get<WorkRecord>(p.work_id);
  const auto wf = workflow_of(p.request_id);
  const DeliveryPolicy policy = template_of(*wf, work.work).delivery;
  const std::string in_id = input_collection_id(p.work_id);
  const auto in = store().get<Collection>(in_id);
  WfmBackend* wfm = ctx_.backends->for_scope(in.scope).wfm;

  auto count = [&](ContentStatus s, std::function<bool(const Content&)> where = {}) {
    Query<Content> q;
    q.owner = in_id;
    q.statuses = {s};
    q.where = std::move(where);
    return store().count(q);
  };
  const std::int64_t max_attempts = 1 + config_.max_retries;
  auto retriable = [max_attempts](const Content& c) { return c.attempt_count < max_attempts; };

  // Failed inputs with attempts left go back to Available.
  {
    Query<Content> q;
    q.owner = in_id;
    q.statuses = {ContentStatus::kFailed};
    q.where = retriable;
    for (const auto& c : store().list(q)) {
      if (try_transition([&] {
            store().transition<Content>(c.content_id, ContentStatus::kFailed,
                                        ContentStatus::kAvailable);
          })) {
        log(c.content_id, "Failed->Available", started);
        ++advanced;
      }
    }
  }

  if (!wfm->pull_mode()) {
    Query<Content> q;
    q.owner = in_id;
    q.statuses = {ContentStatus::kAvailable};
    const auto avail = store().list(q);
    if (!avail.empty()) {
      const bool more_coming = count(ContentStatus::kNew) > 0;
      const auto bundle = static_cast<std::size_t>(std::max<std::int64_t>(policy.bundle_size, 1));
      for (std::size_t i = 0; i < avail.size(); i += bundle) {
        const std::size_t end = std::min(avail.size(), i + bundle);
        if (end - i < bundle && more_coming) break;
        std::vector<DeliveredInput> inputs;
        for (std::size_t k = i; k < end; ++k) {
          inputs.push_back({avail[k].name, avail[k].attempt_count, avail[k].size_bytes,
                            avail[k].attributes});
        }
        try {
          wfm->add_inputs(p.external_id, inputs);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kBackendUnavailable) throw;
          break;
        }
        for (std::size_t k = i; k < end; ++k) {
          if (try_transition([&] {
                store().transition<Content>(avail[k].content_id, ContentStatus::kAvailable,
                                            ContentStatus::kDelivered);
              })) {
            ++advanced;
          }
        }
      }
    }
  }

  Processing current = p;
  auto poll = [&]() -> std::optional<PollResult> {
    try {
      PollResult r = wfm->poll(current.external_id, now(), cursors_[current.processing_id]);
      cursors_[current.processing_id] = r.cursor;
      return r;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kBackendUnavailable) throw;
      return std::nullopt;
    }
  };
  auto result = poll();
  if (!result) return advanced;
  if (current.status == ProcessingStatus::kSubmitted) {
    current = store().transition<Processing>(current.processing_id, ProcessingStatus::kSubmitted,
                                             ProcessingStatus::kRunning,
                                             [&](Processing& row) { row.polled_at = now(); });
    ++advanced;
  }
  advanced += apply(current, work, *result);

  // Outputs of processed inputs become available (catches up after crashes
  // and covers pull-mode workers that report straight to the store).
  {
    const auto out = store().get<Collection>(output_collection_id(p.work_id));
    const auto now_in = store().get<Collection>(in_id);
    if (out.available_contents < now_in.processed_contents) {
      Query<Content> q;
      q.owner = in_id;
      q.statuses = {ContentStatus::kProcessed};
      for (const auto& c : store().list(q)) {
        if (try_transition([&] {
              store().transition<Content>(content_id(out.collection_id, c.name),
                                          ContentStatus::kNew, ContentStatus::kAvailable);
            })) {
          ++advanced;
        }
      }
    }
  }

  if (!current.closed) {
    const bool settled = count(ContentStatus::kNew) == 0 && count(ContentStatus::kAvailable) == 0 &&
                         count(ContentStatus::kDelivered) == 0 &&
                         count(ContentStatus::kFailed, retriable) == 0;
    if (settled) {
      wfm->close(current.external_id);
      current = store().update<Processing>(current.processing_id,
                                           [](Processing& row) { row.closed = true; });
      ++advanced;
      result = poll();
      if (!result) return advanced;
      advanced += apply(current, work, *result);
    }
  }

  if (result->terminal) {
    const ProcessingStatus final_status =
        result->failed ? ProcessingStatus::kFailed : ProcessingStatus::kFinished;
    store().transition<Processing>(current.processing_id, ProcessingStatus::kRunning, final_status,
                                   [&](Processing& row) {
                                     row.metrics = result->metrics;
                                     row.polled_at = now();
                                   });
    cursors_.erase(current.processing_id);
    log(current.processing_id, std::string("Running->") + std::string(to_string(final_status)),
        started);
    ++advanced;
    return advanced;
  }
  store().release_lease<Processing>(current.processing_id, config_.worker_id);
  return advanced;
}

std::size_t Carrier::sweep_works() {
  std::size_t advanced = 0;
  Query<WorkRecord> q;
  q.statuses = {WorkStatus::kActivated, WorkStatus::kRunning};
  q.where = [](const WorkRecord& w) { return !w.walk_target; };
  for (const auto& w : store().list(q)) {
    const auto p = store().find<Processing>(processing_id(w.work.work_id));
    if (!p || !is_terminal(p->status)) continue;
    const std::string& id = w.work.work_id;
    if (w.work.status == WorkStatus::kActivated) {
      try_transition([&] {
        store().transition<WorkRecord>(id, WorkStatus::kActivated, WorkStatus::kRunning);
      });
    }
    if (try_transition([&] {
          store().transition<WorkRecord>(id, WorkStatus::kRunning, WorkStatus::kTerminating);
        })) {
      log(id, "Running->Terminating", now());
      ++advanced;
    }
  }
  return advanced;
}

std::size_t Carrier::run_step() {
  std::size_t advanced = 0;
  const Millis t = now();
  Query<Processing> fresh;
  fresh.statuses = {ProcessingStatus::kNew};
  fresh.where = [t](const Processing& p) { return p.next_retry_at <= t; };
  for (const auto& p : store().claim(fresh, config_.worker_id, config_.lease, config_.batch_size)) {
    try {
      if (submit(p)) ++advanced;
    } catch (const Error& e) {
      if (is_crash(e)) throw;
      if (e.code() != ErrorCode::kStaleTransition) ctx_.stats->step_errors.fetch_add(1);
      log(p.processing_id, std::string("error: ") + e.what(), t);
      store().release_lease<Processing>(p.processing_id, config_.worker_id);
    }
  }
  Query<Processing> active;
  active.statuses = {ProcessingStatus::kSubmitted, ProcessingStatus::kRunning};
  for (const auto& p :
       store().claim(active, config_.worker_id, config_.lease, config_.batch_size)) {
    try {
      advanced += drive(p);
    } catch (const Error& e) {
      if (is_crash(e)) throw;
      if (e.code() != ErrorCode::kStaleTransition) ctx_.stats->step_errors.fetch_add(1);
      log(p.processing_id, std::string("error: ") + e.what(), t);
      store().release_lease<Processing>(p.processing_id, config_.worker_id);
    }
  }
  advanced += sweep_works();
  return advanced;
}

// ---------------------------------------------------------------------------
// Conductor

const std::string& Conductor::consumer_of(const std::string& request_id) {
  auto it = consumers_.find(request_id);
  if (it != consumers_.end()) return it->second;
  if (consumers_.size() >= 4096) consumers_.clear();
  const auto r = store().find<RequestRecord>(request_id);
  return consumers_.emplace(request_id, r ? r->consumer : std::string()).first->second;
}

void Conductor::emit(MessageType type, const std::string& entity, std::string_view qualifier,
                     const std::string& request_id, Json payload) {
  Message m;
  m.message_id = message_id(type, entity, qualifier);
  m.msg_type = type;
  m.destination = consumer_of(request_id);
  m.request_id = request_id;
  m.payload = payload.dump();
  m.created_at = now();
  if (store().insert_if_absent(m)) ctx_.stats->messages_emitted.fetch_add(1);
}

std::size_t Conductor::release_dependents(const Content& content) {
  auto it = content.attributes.find("dependents");
  if (it == content.attributes.end()) return 0;
  std::size_t released = 0;
  for (const auto& dep : *it) {
    const std::string id = dep.get<std::string>();
    const auto d = store().find<Content>(id);
    if (!d || d->status != ContentStatus::kNew || !dependencies_met(store(), *d)) continue;
    if (try_transition([&] {
          store().transition<Content>(id, ContentStatus::kNew, ContentStatus::kAvailable);
        })) {
      log(id, "New->Available", now());
      ++released;
    }
  }
  return released;
}

std::size_t Conductor::run_step() {
  std::size_t advanced = 0;
  for (const auto& ch : store().changes_since(cursor_)) {
    cursor_ = ch.seq;
    if (ch.kind == RowTraits<Content>::kKind) {
      const auto c = store().find<Content>(ch.id);
      if (!c || c->status == ContentStatus::kNew) continue;
      Json payload = {{"content_id", c->content_id},
                      {"collection_id", c->collection_id},
                      {"work_id", c->work_id},
                      {"name", c->name}};
      // Every content past New has been Available at some point, even if
      // this change is only observed after it moved on.
      payload["status"] = "Available";
      emit(MessageType::kContentAvailable, c->content_id, "Available", c->request_id, payload);
      if (c->status == ContentStatus::kProcessed) {
        payload["status"] = "Processed";
        emit(MessageType::kContentAvailable, c->content_id, "Processed", c->request_id, payload);
        advanced += release_dependents(*c);
      }
    } else if (ch.kind == RowTraits<WorkRecord>::kKind) {
      const auto w = store().find<WorkRecord>(ch.id);
      if (!w || !is_terminal(w->work.status)) continue;
      emit(MessageType::kWorkTerminated, w->work.work_id, "", w->request_id,
           {{"work_id", w->work.work_id},
            {"template", w->work.template_name},
            {"status", to_string(w->work.status)}});
    } else if (ch.kind == RowTraits<RequestRecord>::kKind) {
      const auto r = store().find<RequestRecord>(ch.id);
      if (!r || !is_terminal(r->status)) continue;
      emit(MessageType::kRequestDone, r->request_id, "", r->request_id,
           {{"request_id", r->request_id}, {"status", to_string(r->status)}});
    }
  }

  Query<Message> pending;
  pending.statuses = {DeliveryStatus::kPending};
  const auto batch = store().claim(pending, config_.worker_id, config_.lease, 0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Message& m = batch[i];
    if (!ctx_.transport->publish(m)) {
      for (std::size_t k = i; k < batch.size(); ++k) {
        store().release_lease<Message>(batch[k].message_id, config_.worker_id);
      }
      break;
    }
    if (try_transition([&] {
          store().transition<Message>(m.message_id, DeliveryStatus::kPending,
                                      DeliveryStatus::kDelivered,
                                      [&](Message& row) { row.delivered_at = now(); });
        })) {
      ctx_.stats->messages_delivered.fetch_add(1);
      ++advanced;
    }
  }
  for (const auto& id : ctx_.transport->take_acks()) {
    try {
      store().transition<Message>(id, DeliveryStatus::kDelivered, DeliveryStatus::kAcked,
                                  [&](Message& row) { row.acked_at = now(); });
      ctx_.stats->messages_acked.fetch_add(1);
    } catch (const Error& e) {
      if (is_crash(e)) throw;
    }
  }
  return advanced;
}

// ---------------------------------------------------------------------------
// Pipeline and runners

Pipeline::Pipeline(PipelineContext ctx, PipelineConfig config)
    : ctx_(std::move(ctx)), config_(std::move(config)) {
  validate(config_.base);
  for (int k = 0; k < PipelineStats::kDaemonCount; ++k) {
    for (int r = 0; r < config_.replicas[k]; ++r) {
      slots_.push_back({static_cast<PipelineStats::Daemon>(k), r, 0});
      daemons_.push_back(make(slots_.back()));
    }
  }
}

std::unique_ptr<Daemon> Pipeline::make(const Slot& slot) {
  DaemonConfig cfg = config_.base;
  cfg.worker_id = std::string(daemon_name(slot.kind)) + "-" + std::to_string(slot.replica) +
                  "." + std::to_string(slot.generation);
  switch (slot.kind) {
    case PipelineStats::kClerk: return std::make_unique<Clerk>(ctx_, cfg);
    case PipelineStats::kMarshaller: return std::make_unique<Marshaller>(ctx_, cfg);
    case PipelineStats::kTransformer: return std::make_unique<Transformer>(ctx_, cfg);
    case PipelineStats::kCarrier: return std::make_unique<Carrier>(ctx_, cfg);
    case PipelineStats::kConductor: return std::make_unique<Conductor>(ctx_, cfg);
    default: throw Error(ErrorCode::kInternal, "bad daemon kind");
  }
}

void Pipeline::restart(std::size_t index) {
  if (index >= slots_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "no daemon at index " + std::to_string(index));
  }
  ++slots_[index].generation;
  daemons_[index] = make(slots_[index]);
  ++crashes_;
}

std::size_t Pipeline::step_all() {
  std::size_t advanced = 0;
  for (std::size_t i = 0; i < daemons_.size(); ++i) {
    try {
      advanced += daemons_[i]->step();
    } catch (const Error& e) {
      if (!is_crash(e)) {
        ctx_.stats->step_errors.fetch_add(1);
        if (ctx_.log) ctx_.log({{"daemon", daemon_name(daemons_[i]->kind())}, {"error", e.what()}});
        continue;
      }
      // The process died mid-step: in-memory state is gone, leases stay in
      // the store until they expire.
      restart(i);
      ++advanced;
    } catch (const std::exception& e) {
      ctx_.stats->step_errors.fetch_add(1);
      if (ctx_.log) ctx_.log({{"daemon", daemon_name(daemons_[i]->kind())}, {"error", e.what()}});
    }
  }
  return advanced;
}

std::size_t Pipeline::run_until_quiescent(std::size_t max_rounds) {
  std::size_t total = 0;
  for (std::size_t round = 0; round < max_rounds; ++round) {
    const std::size_t n = step_all();
    total += n;
    if (n == 0) break;
  }
  return total;
}

bool VirtualRunner::run_until(const std::function<bool()>& done, Millis deadline) {
  const Millis poll = pipeline_.config().base.poll_interval;
  while (true) {
    pipeline_.run_until_quiescent();
    ++cycles_;
    if (done()) return true;
    const Millis now = clock_.now();
    if (now >= deadline) return false;
    Millis next = now + poll;
    if (auto t = backends_.next_event(now); t && *t > now && *t < next) next = *t;
    clock_.advance_to(std::min(next, deadline));
  }
}

bool VirtualRunner::run_ticks(const std::function<bool()>& done, Millis deadline) {
  const Millis poll = pipeline_.config().base.poll_interval;
  while (!done()) {
    if (clock_.now() >= deadline) return false;
    pipeline_.step_all();
    ++cycles_;
    clock_.advance(poll);
  }
  return true;
}

void run_pipeline(PipelineContext ctx, const PipelineConfig& config, std::stop_token stop) {
  Pipeline pipeline(ctx, config);
  std::vector<std::jthread> threads;
  for (std::size_t i = 0; i < pipeline.size(); ++i) {
    Daemon* d = &pipeline.daemon(i);
    threads.emplace_back([d, &ctx, stop] {
      std::mutex mu;
      std::condition_variable_any cv;
      while (!stop.stop_requested()) {
        try {
          if (d->step() > 0) continue;
        } catch (const std::exception& e) {
          ctx.stats->step_errors.fetch_add(1);
          if (ctx.log) ctx.log({{"daemon", daemon_name(d->kind())}, {"error", e.what()}});
        }
        std::unique_lock lock(mu);
        cv.wait_for(lock, stop, std::chrono::milliseconds(d->config().poll_interval),
                    [] { return false; });
      }
      ctx.store->release_all_leases(d->config().worker_id);
    });
  }
  threads.clear();
}

}  // namespace dds
