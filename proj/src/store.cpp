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

#include "store.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <utility>

namespace dds {

namespace {

template <class Row>
struct Table {
  using Traits = RowTraits<Row>;
  using Status = typename Traits::Status;

  struct Slot {
    Row row;
    std::string lease_owner;
    Millis lease_expiry = 0;
  };

  std::unordered_map<std::string, Slot> rows;
  std::set<std::string> ids;
  std::map<Status, std::set<std::string>> by_status;
  std::unordered_map<std::string, std::set<std::string>> by_owner;
  std::map<std::pair<std::string, Status>, std::set<std::string>> by_owner_status;

  void index(const Row& row) {
    const std::string& id = Traits::id(row);
    const std::string owner = Traits::owner(row);
    const Status status = Traits::status(row);
    ids.insert(id);
    by_status[status].insert(id);
    by_owner[owner].insert(id);
    by_owner_status[{owner, status}].insert(id);
  }

  void unindex(const Row& row) {
    const std::string& id = Traits::id(row);
    const std::string owner = Traits::owner(row);
    const Status status = Traits::status(row);
    ids.erase(id);
    by_status[status].erase(id);
    by_owner[owner].erase(id);
    by_owner_status[{owner, status}].erase(id);
  }

  // Matching slots in id order.
  std::vector<const std::string*> candidates(const Query<Row>& q) const {
    std::vector<const std::set<std::string>*> sources;
    if (q.owner && !q.statuses.empty()) {
      for (Status s : q.statuses) {
        auto it = by_owner_status.find({*q.owner, s});
        if (it != by_owner_status.end()) sources.push_back(&it->second);
      }
    } else if (q.owner) {
      auto it = by_owner.find(*q.owner);
      if (it != by_owner.end()) sources.push_back(&it->second);
    } else if (!q.statuses.empty()) {
      for (Status s : q.statuses) {
        auto it = by_status.find(s);
        if (it != by_status.end()) sources.push_back(&it->second);
      }
    } else {
      sources.push_back(&ids);
    }
    std::vector<const std::string*> out;
    for (const auto* set : sources) {
      auto it = q.after_id.empty() ? set->begin() : set->upper_bound(q.after_id);
      for (; it != set->end(); ++it) out.push_back(&*it);
    }
    if (sources.size() > 1) {
      std::sort(out.begin(), out.end(),
                [](const std::string* a, const std::string* b) { return *a < *b; });
    }
    return out;
  }
};

}  // namespace

struct Store::Impl {
  explicit Impl(const Clock& c, StoreOptions o) : clock(c), options(std::move(o)) {}

  const Clock& clock;
  StoreOptions options;
  mutable std::mutex mu;
  std::tuple<Table<RequestRecord>, Table<WorkRecord>, Table<Processing>, Table<Collection>,
             Table<Content>, Table<Message>>
      tables;
  std::vector<Change> changes;
  std::uint64_t seq = 0;
  std::FILE* journal = nullptr;
  FaultHook fault_hook;

  template <class Row>
  Table<Row>& table() {
    return std::get<Table<Row>>(tables);
  }
  template <class Row>
  const Table<Row>& table() const {
    return std::get<Table<Row>>(tables);
  }

  void fault(std::string_view op) {
    if (fault_hook) fault_hook(op);
  }

  template <class Row>
  void record(const typename Table<Row>::Slot& slot) {
    changes.push_back({++seq, RowTraits<Row>::kKind, RowTraits<Row>::id(slot.row)});
    journal_write<Row>(slot);
  }

  template <class Row>
  void journal_write(const typename Table<Row>::Slot& slot) {
    if (journal == nullptr) return;
    Json line = {{"k", RowTraits<Row>::kKind},
                 {"r", slot.row},
                 {"lo", slot.lease_owner},
                 {"le", slot.lease_expiry}};
    const std::string text = line.dump() + "\n";
    if (std::fwrite(text.data(), 1, text.size(), journal) != text.size() ||
        std::fflush(journal) != 0) {
      throw Error(ErrorCode::kInternal, "journal write failed");
    }
    if (options.sync) ::fsync(::fileno(journal));
  }

  template <class Row>
  void upsert_from_journal(const Json& line) {
    auto& t = table<Row>();
    typename Table<Row>::Slot slot{line.at("r").get<Row>(), line.at("lo").get<std::string>(),
                                   line.at("le").get<Millis>()};
    const std::string id = RowTraits<Row>::id(slot.row);
    auto it = t.rows.find(id);
    if (it != t.rows.end()) {
      t.unindex(it->second.row);
      it->second = std::move(slot);
      t.index(it->second.row);
    } else {
      auto [pos, ok] = t.rows.emplace(id, std::move(slot));
      t.index(pos->second.row);
      changes.push_back({++seq, RowTraits<Row>::kKind, id});
    }
  }

  void replay(const std::string& path) {
    std::ifstream in(path);
    if (!in) return;
    std::string text;
    while (std::getline(in, text)) {
      if (text.empty()) continue;
      Json line = Json::parse(text, nullptr, false);
      // A torn final line is the unacknowledged write in flight at the crash.
      if (line.is_discarded()) continue;
      const auto kind = line.at("k").get<std::string>();
      if (kind == RowTraits<RequestRecord>::kKind) upsert_from_journal<RequestRecord>(line);
      else if (kind == RowTraits<WorkRecord>::kKind) upsert_from_journal<WorkRecord>(line);
      else if (kind == RowTraits<Processing>::kKind) upsert_from_journal<Processing>(line);
      else if (kind == RowTraits<Collection>::kKind) upsert_from_journal<Collection>(line);
      else if (kind == RowTraits<Content>::kKind) upsert_from_journal<Content>(line);
      else if (kind == RowTraits<Message>::kKind) upsert_from_journal<Message>(line);
    }
    recount_collections();
  }

  // A crash between a content line and its collection line leaves stale
  // counters in the journal; the content rows are authoritative.
  void recount_collections() {
    auto& collections = table<Collection>();
    for (auto& [id, slot] : collections.rows) {
      slot.row.total_contents = 0;
      slot.row.available_contents = 0;
      slot.row.processed_contents = 0;
    }
    for (const auto& [id, slot] : table<Content>().rows) {
      auto it = collections.rows.find(slot.row.collection_id);
      if (it == collections.rows.end()) continue;
      const ContentStatus s = slot.row.status;
      ++it->second.row.total_contents;
      if (s == ContentStatus::kAvailable || s == ContentStatus::kDelivered) ++it->second.row.available_contents;
      if (s == ContentStatus::kProcessed) ++it->second.row.processed_contents;
    }
  }

  // Adjusts the parent collection's counters for a content moving between
  // statuses (nullopt = absent).
  void adjust_counters(const Content& c, std::optional<ContentStatus> from,
                       std::optional<ContentStatus> to) {
    auto& collections = table<Collection>();
    auto it = collections.rows.find(c.collection_id);
    if (it == collections.rows.end()) {
      throw Error(ErrorCode::kNotFound, "collection " + c.collection_id + " for content " +
                                            c.content_id);
    }
    auto is_available = [](std::optional<ContentStatus> s) {
      return s && (*s == ContentStatus::kAvailable || *s == ContentStatus::kDelivered);
    };
    auto is_processed = [](std::optional<ContentStatus> s) {
      return s && *s == ContentStatus::kProcessed;
    };
    Collection& col = it->second.row;
    if (!from && to) ++col.total_contents;
    col.available_contents += static_cast<int>(is_available(to)) - static_cast<int>(is_available(from));
    col.processed_contents += static_cast<int>(is_processed(to)) - static_cast<int>(is_processed(from));
    col.updated_at = clock.now();
    journal_write<Collection>(it->second);
  }

  template <class Row>
  void after_insert(const Row&) {}

  template <class Row>
  bool do_insert(const Row& row) {
    auto& t = table<Row>();
    const std::string& id = RowTraits<Row>::id(row);
    if (id.empty()) throw Error(ErrorCode::kInvalidArgument, "empty id");
    if (t.rows.count(id) != 0) return false;
    typename Table<Row>::Slot slot{row, {}, 0};
    RowTraits<Row>::touch(slot.row, clock.now());
    if constexpr (std::is_same_v<Row, Content>) {
      adjust_counters(slot.row, std::nullopt, slot.row.status);
    }
    auto [pos, ok] = t.rows.emplace(id, std::move(slot));
    t.index(pos->second.row);
    record<Row>(pos->second);
    return true;
  }
};

Store::Store(const Clock& clock, StoreOptions options)
    : impl_(std::make_unique<Impl>(clock, std::move(options))) {
  if (!impl_->options.journal_path.empty()) {
    impl_->replay(impl_->options.journal_path);
    impl_->journal = std::fopen(impl_->options.journal_path.c_str(), "ab");
    if (impl_->journal == nullptr) {
      throw Error(ErrorCode::kInternal, "cannot open journal " + impl_->options.journal_path);
    }
  }
}

Store::~Store() {
  if (impl_ && impl_->journal) std::fclose(impl_->journal);
}

const Clock& Store::clock() const { return impl_->clock; }

template <class Row>
void Store::insert(const Row& row) {
  if (!insert_if_absent(row)) {
    throw Error(ErrorCode::kConflict,
                std::string(RowTraits<Row>::kKind) + " " + RowTraits<Row>::id(row) + " exists");
  }
}

template <class Row>
bool Store::insert_if_absent(const Row& row) {
  {
    // A no-op writes nothing, so it is not a crash point.
    std::lock_guard lock(impl_->mu);
    if (impl_->table<Row>().rows.count(RowTraits<Row>::id(row)) != 0) return false;
  }
  impl_->fault(std::string("insert ") + std::string(RowTraits<Row>::kKind));
  std::lock_guard lock(impl_->mu);
  return impl_->do_insert(row);
}

template <class Row>
Row Store::get(std::string_view id) const {
  auto row = find<Row>(id);
  if (!row) {
    throw Error(ErrorCode::kNotFound,
                std::string(RowTraits<Row>::kKind) + " " + std::string(id) + " not found");
  }
  return std::move(*row);
}

template <class Row>
std::optional<Row> Store::find(std::string_view id) const {
  std::lock_guard lock(impl_->mu);
  const auto& t = impl_->table<Row>();
  auto it = t.rows.find(std::string(id));
  if (it == t.rows.end()) return std::nullopt;
  return it->second.row;
}

template <class Row>
std::vector<Row> Store::list(const Query<Row>& query) const {
  std::lock_guard lock(impl_->mu);
  const auto& t = impl_->table<Row>();
  std::vector<Row> out;
  for (const std::string* id : t.candidates(query)) {
    const Row& row = t.rows.at(*id).row;
    if (query.where && !query.where(row)) continue;
    out.push_back(row);
    if (query.limit != 0 && out.size() >= query.limit) break;
  }
  return out;
}

template <class Row>
std::size_t Store::count(const Query<Row>& query) const {
  std::lock_guard lock(impl_->mu);
  const auto& t = impl_->table<Row>();
  std::size_t n = 0;
  for (const std::string* id : t.candidates(query)) {
    if (query.where && !query.where(t.rows.at(*id).row)) continue;
    ++n;
  }
  return n;
}

template <class Row>
std::vector<Row> Store::claim(const Query<Row>& query, std::string_view worker,
                              Millis lease_duration, std::size_t limit) {
  if (lease_duration <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "lease duration must be positive");
  }
  impl_->fault(std::string("claim ") + std::string(RowTraits<Row>::kKind));
  std::lock_guard lock(impl_->mu);
  auto& t = impl_->table<Row>();
  const Millis now = impl_->clock.now();
  std::vector<Row> out;
  for (const std::string* id : t.candidates(query)) {
    auto& slot = t.rows.at(*id);
    const bool free = slot.lease_owner.empty() || slot.lease_expiry <= now ||
                      slot.lease_owner == worker;
    if (!free) continue;
    if (query.where && !query.where(slot.row)) continue;
    slot.lease_owner = std::string(worker);
    slot.lease_expiry = now + lease_duration;
    impl_->journal_write<Row>(slot);
    out.push_back(slot.row);
    if (limit != 0 && out.size() >= limit) break;
  }
  return out;
}

template <class Row>
Row Store::transition(std::string_view id, typename RowTraits<Row>::Status from,
                      typename RowTraits<Row>::Status to,
                      const std::function<void(Row&)>& mutate) {
  using Traits = RowTraits<Row>;
  impl_->fault(std::string("transition ") + std::string(Traits::kKind));
  std::lock_guard lock(impl_->mu);
  auto& t = impl_->table<Row>();
  auto it = t.rows.find(std::string(id));
  if (it == t.rows.end()) {
    throw Error(ErrorCode::kNotFound, std::string(Traits::kKind) + " " + std::string(id) +
                                          " not found");
  }
  auto& slot = it->second;
  if (Traits::status(slot.row) != from) {
    throw Error(ErrorCode::kStaleTransition,
                std::string(Traits::kKind) + " " + std::string(id) + " is no longer " +
                    std::string(to_string(from)));
  }
  if (!Traits::legal(from, to)) {
    throw Error(ErrorCode::kIllegalTransition, std::string(Traits::kKind) + " " +
                                                   std::string(to_string(from)) + " -> " +
                                                   std::string(to_string(to)));
  }
  Row updated = slot.row;
  if (mutate) mutate(updated);
  Traits::set_status(updated, to);
  Traits::touch(updated, impl_->clock.now());
  if constexpr (std::is_same_v<Row, Content>) {
    if (from == ContentStatus::kNew && to == ContentStatus::kAvailable) {
      updated.attempt_count = std::max<std::int64_t>(updated.attempt_count, 1);
    } else if (from == ContentStatus::kFailed && to == ContentStatus::kAvailable) {
      updated.attempt_count = slot.row.attempt_count + 1;
    }
    impl_->adjust_counters(updated, from, to);
  }
  t.unindex(slot.row);
  slot.row = std::move(updated);
  slot.lease_owner.clear();
  slot.lease_expiry = 0;
  t.index(slot.row);
  impl_->record<Row>(slot);
  return slot.row;
}

template <class Row>
Row Store::update(std::string_view id, const std::function<void(Row&)>& mutate) {
  using Traits = RowTraits<Row>;
  impl_->fault(std::string("update ") + std::string(Traits::kKind));
  std::lock_guard lock(impl_->mu);
  auto& t = impl_->table<Row>();
  auto it = t.rows.find(std::string(id));
  if (it == t.rows.end()) {
    throw Error(ErrorCode::kNotFound, std::string(Traits::kKind) + " " + std::string(id) +
                                          " not found");
  }
  auto& slot = it->second;
  Row updated = slot.row;
  mutate(updated);
  if (Traits::status(updated) != Traits::status(slot.row) ||
      Traits::id(updated) != Traits::id(slot.row) ||
      Traits::owner(updated) != Traits::owner(slot.row)) {
    throw Error(ErrorCode::kInvalidArgument, "update may not change id, owner or status");
  }
  Traits::touch(updated, impl_->clock.now());
  slot.row = std::move(updated);
  impl_->record<Row>(slot);
  return slot.row;
}

template <class Row>
void Store::release_lease(std::string_view id, std::string_view worker) {
  std::lock_guard lock(impl_->mu);
  auto& t = impl_->table<Row>();
  auto it = t.rows.find(std::string(id));
  if (it == t.rows.end() || it->second.lease_owner != worker) return;
  it->second.lease_owner.clear();
  it->second.lease_expiry = 0;
  impl_->journal_write<Row>(it->second);
}

template <class Row>
std::optional<std::string> Store::lease_holder(std::string_view id) const {
  std::lock_guard lock(impl_->mu);
  const auto& t = impl_->table<Row>();
  auto it = t.rows.find(std::string(id));
  if (it == t.rows.end() || it->second.lease_owner.empty() ||
      it->second.lease_expiry <= impl_->clock.now()) {
    return std::nullopt;
  }
  return it->second.lease_owner;
}

std::size_t Store::release_all_leases(std::string_view worker) {
  std::lock_guard lock(impl_->mu);
  std::size_t released = 0;
  std::apply(
      [&](auto&... tables) {
        auto release = [&](auto& t) {
          using Row = std::decay_t<decltype(t.rows.begin()->second.row)>;
          for (auto& [id, slot] : t.rows) {
            if (slot.lease_owner != worker) continue;
            slot.lease_owner.clear();
            slot.lease_expiry = 0;
            impl_->journal_write<Row>(slot);
            ++released;
          }
        };
        (release(tables), ...);
      },
      impl_->tables);
  return released;
}

std::uint64_t Store::last_seq() const {
  std::lock_guard lock(impl_->mu);
  return impl_->seq;
}

std::vector<Change> Store::changes_since(std::uint64_t seq, std::size_t limit) const {
  std::lock_guard lock(impl_->mu);
  const auto& changes = impl_->changes;
  auto it = std::upper_bound(changes.begin(), changes.end(), seq,
                             [](std::uint64_t s, const Change& c) { return s < c.seq; });
  std::vector<Change> out;
  for (; it != changes.end(); ++it) {
    out.push_back(*it);
    if (limit != 0 && out.size() >= limit) break;
  }
  return out;
}

std::string Store::export_table(std::string_view kind) const {
  std::lock_guard lock(impl_->mu);
  std::ostringstream out;
  bool known = false;
  std::apply(
      [&](const auto&... tables) {
        auto dump = [&](const auto& t) {
          using Row = std::decay_t<decltype(t.rows.begin()->second.row)>;
          if (RowTraits<Row>::kKind != kind) return;
          known = true;
          for (const auto& id : t.ids) out << Json(t.rows.at(id).row).dump() << "\n";
        };
        (dump(tables), ...);
      },
      impl_->tables);
  if (!known) throw Error(ErrorCode::kNotFound, "unknown table " + std::string(kind));
  return out.str();
}

std::string Store::audit() const {
  std::string out;
  for (auto kind : {"requests", "works", "processings", "collections", "contents", "messages"}) {
    out += "# ";
    out += kind;
    out += "\n";
    out += export_table(kind);
  }
  return out;
}

void Store::set_fault_hook(FaultHook hook) {
  std::lock_guard lock(impl_->mu);
  impl_->fault_hook = std::move(hook);
}

#define DDS_STORE_INSTANTIATE(Row)                                                        \
  template void Store::insert<Row>(const Row&);                                           \
  template bool Store::insert_if_absent<Row>(const Row&);                                 \
  template Row Store::get<Row>(std::string_view) const;                                   \
  template std::optional<Row> Store::find<Row>(std::string_view) const;                   \
  template std::vector<Row> Store::list<Row>(const Query<Row>&) const;                    \
  template std::size_t Store::count<Row>(const Query<Row>&) const;                        \
  template std::vector<Row> Store::claim<Row>(const Query<Row>&, std::string_view, Millis, \
                                              std::size_t);                               \
  template Row Store::transition<Row>(std::string_view, RowTraits<Row>::Status,           \
                                      RowTraits<Row>::Status,                             \
                                      const std::function<void(Row&)>&);                  \
  template Row Store::update<Row>(std::string_view, const std::function<void(Row&)>&);    \
  template void Store::release_lease<Row>(std::string_view, std::string_view);            \
  template std::optional<std::string> Store::lease_holder<Row>(std::string_view) const;

DDS_STORE_INSTANTIATE(RequestRecord)
DDS_STORE_INSTANTIATE(WorkRecord)
DDS_STORE_INSTANTIATE(Processing)
DDS_STORE_INSTANTIATE(Collection)
DDS_STORE_INSTANTIATE(Content)
DDS_STORE_INSTANTIATE(Message)

#undef DDS_STORE_INSTANTIATE

}  // namespace dds
