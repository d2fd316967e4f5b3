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

// Data Carousel: tape-resident input processed as it is staged, against a
// coarse baseline that releases the whole dataset at once.

#ifndef DDS_SRC_CAROUSEL_HPP_
#define DDS_SRC_CAROUSEL_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "backends.hpp"
#include "service.hpp"

namespace dds {

inline constexpr std::string_view kCarouselScope = "tape";

struct CarouselPolicy {
  Granularity granularity = Granularity::kFileLevel;
  // Ignored for DatasetLevel: the cache is held until the end of the run.
  bool prompt_release = true;
  // Files per released job (FileLevel only).
  std::int64_t bundle_size = 1;

  std::string label() const;
  bool operator==(const CarouselPolicy&) const = default;
};

// "file-level" or "dataset-level". Throws Error(kInvalidArgument).
CarouselPolicy parse_policy(std::string_view name);

struct CarouselMetrics {
  std::string policy;
  // attempt_count -> number of jobs (one job per content)
  std::map<std::int64_t, std::int64_t> attempts_histogram;
  std::int64_t jobs = 0;
  double mean_attempts = 0.0;
  std::int64_t peak_disk_bytes = 0;
  std::int64_t disk_byte_seconds = 0;
  Millis makespan = 0;
  Millis time_to_first_processing = 0;
  std::vector<std::pair<Millis, std::int64_t>> disk_series;
  std::int64_t bytes_total = 0;
  std::int64_t bytes_staged = 0;
  std::int64_t bytes_processed = 0;
  std::int64_t bytes_failed = 0;
  std::string request_status;
};

struct CarouselOptions {
  PipelineConfig pipeline;
  // Virtual deadline.
  Millis deadline = 7 * 24 * 3600 * 1000LL;
  // Installed on the store once the request is submitted.
  FaultHook fault_hook;
  // Fixed poll ticks instead of event-driven time jumps.
  bool ticks = false;
};

struct CarouselRun {
  CarouselMetrics metrics;
  std::string request_id;
  bool completed = false;
  std::int64_t crashes = 0;
  std::int64_t step_errors = 0;
  std::int64_t cycles = 0;
  // Store audit at the end of the run.
  std::string audit;
  // Backend executions per file name.
  std::map<std::string, std::int64_t> executions;
  std::vector<Content> inputs;
};

Workflow build_carousel_workflow(const std::string& dataset, const CarouselPolicy& policy);

CarouselRun run_carousel(const ScenarioConfig& scenario, const CarouselPolicy& policy,
                         const CarouselOptions& options = {});

struct PolicyComparison {
  std::vector<CarouselMetrics> rows;
  // Row i over row 0.
  std::vector<double> peak_ratio;
  std::vector<double> byte_seconds_ratio;
  std::vector<double> mean_attempts_ratio;
};

// Needs at least two policies. Throws Error(kInvalidArgument).
PolicyComparison compare_policies(const ScenarioConfig& scenario,
                                  const std::vector<CarouselPolicy>& policies,
                                  const CarouselOptions& options = {});

std::string comparison_csv(const PolicyComparison& comparison);
// policy,attempts,jobs
std::string histogram_csv(const std::vector<CarouselMetrics>& rows);
// policy,time_s,bytes
std::string disk_series_csv(const std::vector<CarouselMetrics>& rows);

}  // namespace dds

#endif  // DDS_SRC_CAROUSEL_HPP_
