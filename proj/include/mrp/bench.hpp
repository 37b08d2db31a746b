/*
 * Copyright (c) 2026-present, the mrpaxos authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <string>
#include <vector>

#include "mrp/config.hpp"

namespace mrp {

struct BenchOptions {
  std::string mode = "kv";  // kv | dlog | dummy
  uint32_t clients = 1;
  uint32_t size = 128;      // command payload bytes
  uint32_t duration_s = 10;
  std::string csv_path;     // empty: no csv
  uint64_t seed = 1;
};

struct MetricsReport {
  uint64_t ops = 0;
  uint64_t errors = 0;     // timeouts and transport failures
  uint64_t bytes = 0;      // payload bytes in completed commands
  double duration_s = 0;
  double throughput = 0;   // completed commands per second
  double mbytes_per_s = 0;
  uint64_t p50_us = 0;
  uint64_t p95_us = 0;
  uint64_t p99_us = 0;
  uint64_t max_us = 0;

  struct Second {
    uint32_t second = 0;
    uint64_t ops = 0;
    uint64_t bytes = 0;
    uint64_t p50_us = 0;
    uint64_t p99_us = 0;
  };
  std::vector<Second> seconds;
};

// Closed-loop load: each client thread keeps exactly one command in flight.
// A zero duration produces an empty report without touching the cluster.
MetricsReport run_bench(const ClusterConfig& cfg, const BenchOptions& opt);

// One row per elapsed second: second,ops,bytes,p50_us,p99_us.
void write_csv(const MetricsReport& r, const std::string& path);
std::string format_report(const MetricsReport& r);

}  // namespace mrp
