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


// Brute-force, time-stepped replay of a carousel scenario, written without
// reference to the simulator's event queue. Time advances in steps of the
// gcd of every duration in the scenario; at each step completions free
// their slot, due submissions are checked against the stage schedule, and
// queued files start on free slots. Disk occupancy is summed tick by tick.
//
// Only values that do not depend on how ties between simultaneous arrivals
// are broken (attempts, makespan, dataset-level footprint, and file-level
// footprint when stage times are distinct) are meant to be compared.

#ifndef DDS_TESTS_CAROUSEL_ORACLE_HPP_
#define DDS_TESTS_CAROUSEL_ORACLE_HPP_

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace dds::oracle {

struct File {
  std::string name;
  std::int64_t size = 0;
  std::int64_t staged = 0;  // ms
};

struct Farm {
  std::int64_t workers = 1;
  std::int64_t proc = 1000;
  std::int64_t timeout = 30000;
  std::int64_t resubmit = 1000;
};

struct Outcome {
  std::map<std::string, std::int64_t> attempts;
  std::map<std::string, std::int64_t> started;
  std::map<std::string, std::int64_t> finished;
  std::map<std::int64_t, std::int64_t> histogram;
  std::int64_t makespan = 0;
  std::int64_t first_start = 0;
  std::int64_t peak = 0;
  std::int64_t byte_seconds = 0;
  double mean_attempts = 0;
};

inline Outcome replay(std::vector<File> files, const Farm& farm, bool file_level) {
  Outcome out;
  if (files.empty()) return out;
  std::sort(files.begin(), files.end(), [](const File& a, const File& b) { return a.name < b.name; });
  std::int64_t step = std::gcd(std::gcd(farm.proc, farm.timeout), farm.resubmit);
  for (const auto& f : files) step = std::gcd(step, f.staged);
  if (step == 0) step = 1;

  const std::size_t n = files.size();
  std::vector<std::int64_t> next_submit(n), run_until(n, -1), attempts(n, 0);
  std::vector<bool> done(n, false), queued(n, false);
  for (std::size_t i = 0; i < n; ++i) next_submit[i] = file_level ? files[i].staged : 0;
  std::deque<std::size_t> queue;
  std::int64_t busy = 0;
  std::size_t remaining = n;
  std::int64_t t = 0;
  for (; remaining > 0; t += step) {
    for (std::size_t i = 0; i < n; ++i) {
      if (run_until[i] == t && !done[i]) {
        done[i] = true;
        --busy;
        --remaining;
        out.finished[files[i].name] = t;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i] || queued[i] || next_submit[i] != t) continue;
      ++attempts[i];
      if (files[i].staged <= t) {
        queued[i] = true;
        queue.push_back(i);
      } else {
        const std::int64_t abort = t + farm.timeout;
        next_submit[i] = (abort + farm.resubmit - 1) / farm.resubmit * farm.resubmit;
      }
    }
    while (busy < farm.workers && !queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      ++busy;
      out.started[files[i].name] = t;
      run_until[i] = t + farm.proc;
      if (farm.proc == 0) {
        done[i] = true;
        --busy;
        --remaining;
        out.finished[files[i].name] = t;
      }
    }
  }
  out.makespan = 0;
  for (const auto& [name, f] : out.finished) out.makespan = std::max(out.makespan, f);
  out.first_start = out.makespan;
  for (const auto& [name, s] : out.started) out.first_start = std::min(out.first_start, s);

  std::int64_t total_attempts = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.attempts[files[i].name] = attempts[i];
    ++out.histogram[attempts[i]];
    total_attempts += attempts[i];
  }
  out.mean_attempts = static_cast<double>(total_attempts) / static_cast<double>(n);

  // occupancy after all changes at each tick, integrated up to the makespan
  __int128 byte_ms = 0;
  for (std::int64_t tick = 0; tick <= out.makespan; tick += step) {
    std::int64_t occupied = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool resident = files[i].staged <= tick &&
                            (!file_level || tick < out.finished[files[i].name]);
      if (resident) occupied += files[i].size;
    }
    out.peak = std::max(out.peak, occupied);
    if (tick < out.makespan) byte_ms += static_cast<__int128>(occupied) * step;
  }
  out.byte_seconds = static_cast<std::int64_t>(byte_ms / 1000);
  return out;
}

}  // namespace dds::oracle

#endif  // DDS_TESTS_CAROUSEL_ORACLE_HPP_
