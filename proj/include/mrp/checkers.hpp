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

#include <map>
#include <string>
#include <vector>

#include "mrp/config.hpp"
#include "mrp/sim.hpp"

namespace mrp {

struct CheckResult {
  bool ok = true;
  std::vector<std::string> problems;

  void fail(std::string why) {
    ok = false;
    problems.push_back(std::move(why));
  }
  void merge(const CheckResult& other) {
    ok = ok && other.ok;
    problems.insert(problems.end(), other.problems.begin(), other.problems.end());
  }
};

// No two processes decide differently for one instance, and decided
// instance ranges within a group never overlap.
CheckResult check_agreement(const std::vector<TimedTrace>& trace);

// Everything delivered was submitted by some client.
CheckResult check_validity(const std::vector<TimedTrace>& trace,
                           const std::map<uint64_t, SimCommand>& commands);

// No two processes deliver two commands in opposite relative order, and the
// union of local orders is acyclic (considering first deliveries only).
CheckResult check_acyclic_order(const std::vector<TimedTrace>& trace);

// Each node's checkpoint tuples grow monotonically, and tuples within one
// partition are pairwise comparable.
CheckResult check_checkpoint_order(const ClusterConfig& cfg, const std::vector<TimedTrace>& trace);

// Every submitted command got a reply.
CheckResult check_all_replied(const std::map<uint64_t, SimCommand>& commands);

// Runs everything above.
CheckResult check_all(const ClusterConfig& cfg, const SimNet& net);

// Instances decided per second for one group as observed by `node` inside
// [from_us, to_us); skips count with their whole span.
double decided_rate(const std::vector<TimedTrace>& trace, ProcessId node, GroupId group,
                    uint64_t from_us, uint64_t to_us);

// Commands delivered (first time) at `node` inside the window.
uint64_t delivered_count(const std::vector<TimedTrace>& trace, ProcessId node, uint64_t from_us,
                         uint64_t to_us);

}  // namespace mrp
