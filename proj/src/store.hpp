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

// Transactional entity store shared by the head service and the daemons.
//
// All tables live behind one mutex, so every operation is linearizable and a
// Content transition updates its Collection counters atomically. When a
// journal path is configured every acknowledged mutation is appended (full
// row image, JSON lines) before the call returns; reopening replays it.
//
// Coordination between daemons goes through two primitives only:
//   claim()       leases matching rows to one worker until expiry
//   transition()  compare-and-set on status along the legal lifecycle edges

#ifndef DDS_SRC_STORE_HPP_
#define DDS_SRC_STORE_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clock.hpp"
#include "entities.hpp"

namespace dds {

inline constexpr Millis kDefaultLeaseMillis = 60'000;

template <class Row>
struct Query {
  using Status = typename RowTraits<Row>::Status;

  std::optional<std::string> owner;
  std::vector<Status> statuses;
  std::function<bool(const Row&)> where;
  // Exclusive lower bound on the id (pagination cursor).
  std::string after_id;
  // 0 means unlimited.
  std::size_t limit = 0;
};

struct Change {
  std::uint64_t seq = 0;
  std::string_view kind;
  std::string id;
};

struct StoreOptions {
  // Empty: memory only.
  std::string journal_path;
  // fsync after every append (survives power loss, not only process death).
  bool sync = false;
};

// Invoked before every mutation with a short operation label; throwing from
// it aborts the mutation. Used for crash injection.
using FaultHook = std::function<void(std::string_view)>;

class Store {
 public:
  explicit Store(const Clock& clock, StoreOptions options = {});
  ~Store();

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  const Clock& clock() const;

  // Throws Error(kConflict) when the id exists.
  template <class Row>
  void insert(const Row& row);

  // False when the id exists (row left untouched).
  template <class Row>
  bool insert_if_absent(const Row& row);

  // Throws Error(kNotFound).
  template <class Row>
  Row get(std::string_view id) const;

  template <class Row>
  std::optional<Row> find(std::string_view id) const;

  // Rows in id order.
  template <class Row>
  std::vector<Row> list(const Query<Row>& query = {}) const;

  template <class Row>
  std::size_t count(const Query<Row>& query = {}) const;

  // Leases up to `limit` matching rows to `worker`. Rows leased to another
  // worker are skipped until the lease expires; a worker may re-claim its
  // own live leases.
  template <class Row>
  std::vector<Row> claim(const Query<Row>& query, std::string_view worker,
                         Millis lease_duration, std::size_t limit);

  // Compare-and-set on status. Throws Error(kStaleTransition) when the
  // current status differs from `from`, Error(kIllegalTransition) when the
  // edge is not in the lifecycle. `mutate` may edit non-status fields in the
  // same atomic step. Clears any lease on the row.
  template <class Row>
  Row transition(std::string_view id, typename RowTraits<Row>::Status from,
                 typename RowTraits<Row>::Status to,
                 const std::function<void(Row&)>& mutate = {});

  // Edits non-status fields. Throws Error(kNotFound).
  template <class Row>
  Row update(std::string_view id, const std::function<void(Row&)>& mutate);

  template <class Row>
  void release_lease(std::string_view id, std::string_view worker);

  template <class Row>
  std::optional<std::string> lease_holder(std::string_view id) const;

  std::size_t release_all_leases(std::string_view worker);

  // Change feed of inserts, transitions and updates (not lease traffic).
  std::uint64_t last_seq() const;
  std::vector<Change> changes_since(std::uint64_t seq, std::size_t limit = 0) const;

  // Newline-delimited canonical records, sorted by id. `kind` is one of
  // requests, works, processings, collections, contents, messages.
  std::string export_table(std::string_view kind) const;

  // Every table, lease metadata excluded. Equal audits mean equal state.
  std::string audit() const;

  void set_fault_hook(FaultHook hook);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dds

#endif  // DDS_SRC_STORE_HPP_
