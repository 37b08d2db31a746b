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

#include <random>

#include "doctest.h"
#include "mrp/config.hpp"

using namespace mrp;

namespace {

const char* kSingleRing = R"(
[ring 0]
members = 0 1 2 3
acceptors = 0 1 2
coordinator = 0

[process 0]
roles = acceptor
[process 1]
roles = acceptor
[process 2]
roles = acceptor
[process 3]
roles = learner
subscriptions = 0
)";

}  // namespace

TEST_CASE("single ring: derived quorum and partition") {
  ClusterConfig cfg = load_config(kSingleRing);
  REQUIRE(cfg.rings.size() == 1);
  CHECK(cfg.rings[0].quorum_size == 2);  // floor(3/2)+1
  CHECK(cfg.rings[0].last_acceptor() == 2);
  REQUIRE(cfg.partitions.size() == 1);
  CHECK(cfg.partitions[0].replicas == std::set<ProcessId>{3});
  CHECK(cfg.partitions[0].groups == std::set<GroupId>{0});
}

TEST_CASE("tuning values accepted verbatim") {
  std::string text = kSingleRing;
  text += "\n[tuning]\nm = 1\ndelta_ms = 5\nlambda = 9000\n";
  ClusterConfig cfg = load_config(text);
  CHECK(cfg.tuning.merge_window == 1);
  CHECK(cfg.tuning.delta_ms == 5);
  CHECK(cfg.tuning.lambda == 9000);
  CHECK(cfg.interval_budget() == 45);  // ceil(9000 * 0.005)
}

TEST_CASE("tuning defaults") {
  ClusterConfig cfg = load_config(kSingleRing);
  CHECK(cfg.tuning.batch_limit == 32768);
  CHECK(cfg.tuning.buffer_slots == 15000);
  CHECK(cfg.tuning.slot_size == 32768);
  CHECK(cfg.tuning.sync_log);
}

TEST_CASE("coordinator outside the acceptor set is rejected") {
  const char* text = R"(
[ring 0]
members = 0 1 2
acceptors = 0 1
coordinator = 2
[process 0]
roles = acceptor
[process 1]
roles = acceptor
[process 2]
roles = acceptor
)";
  CHECK_THROWS_WITH_AS(load_config(text),
                       doctest::Contains("coordinator 2 is not in its acceptor set"), ConfigError);
}

TEST_CASE("unknown keys and malformed lines are errors") {
  CHECK_THROWS_AS(load_config(std::string(kSingleRing) + "\n[tuning]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(load_config(std::string(kSingleRing) + "\n[mystery]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(load_config("[ring 0]\nmembers 0 1 2\n"), ConfigError);
  CHECK_THROWS_AS(load_config("key = value\n"), ConfigError);
}

TEST_CASE("subscription validation") {
  // subscribing a group that does not exist
  CHECK_THROWS_AS(load_config(R"(
[ring 0]
members = 0 1
acceptors = 0
coordinator = 0
[process 0]
roles = acceptor
[process 1]
roles = learner
subscriptions = 7
)"),
                  ConfigError);
  // subscriber missing the learner role
  CHECK_THROWS_AS(load_config(R"(
[ring 0]
members = 0 1
acceptors = 0
coordinator = 0
[process 0]
roles = acceptor
[process 1]
roles = proposer
subscriptions = 0
)"),
                  ConfigError);
  // subscriber outside the ring cannot receive decisions
  CHECK_THROWS_AS(load_config(R"(
[ring 0]
members = 0 1
acceptors = 0
coordinator = 0
[process 0]
roles = acceptor
[process 1]
roles = learner
subscriptions = 0
[process 2]
roles = learner
subscriptions = 0
)"),
                  ConfigError);
}

TEST_CASE("partition_of groups learners by identical subscription sets") {
  const char* text = R"(
[ring 1]
members = 0 1 2 3
acceptors = 0
coordinator = 0
[ring 2]
members = 0 1 2 3 4
acceptors = 0
coordinator = 0
[process 0]
roles = acceptor
[process 1]
roles = learner
subscriptions = 1 2
[process 2]
roles = learner
subscriptions = 1 2
[process 3]
roles = learner
subscriptions = 2
[process 4]
roles = learner
subscriptions = 2
)";
  ClusterConfig cfg = load_config(text);
  Partition p1 = partition_of(1, cfg);
  CHECK(p1.replicas == std::set<ProcessId>{1, 2});
  CHECK(p1.groups == std::set<GroupId>{1, 2});
  Partition p3 = partition_of(3, cfg);
  CHECK(p3.replicas == std::set<ProcessId>{3, 4});
  CHECK_THROWS_AS(partition_of(0, cfg), ConfigError);  // not a learner
}

TEST_CASE("partitioning is an equivalence relation on random configurations") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    // 2 rings, learners with random subscription subsets
    std::string text =
        "[ring 1]\nmembers = 0 1 2 3 4 5\nacceptors = 0\ncoordinator = 0\n"
        "[ring 2]\nmembers = 0 1 2 3 4 5\nacceptors = 0\ncoordinator = 0\n"
        "[process 0]\nroles = acceptor\n";
    for (int p = 1; p <= 5; ++p) {
      int pick = static_cast<int>(rng() % 4);
      text += "[process " + std::to_string(p) + "]\nroles = learner\n";
      if (pick == 1) text += "subscriptions = 1\n";
      if (pick == 2) text += "subscriptions = 2\n";
      if (pick == 3) text += "subscriptions = 1 2\n";
    }
    ClusterConfig cfg = load_config(text);
    for (const auto& part : cfg.partitions) {
      for (ProcessId p : part.replicas) {
        // reflexive + symmetric: each member maps back to the same partition
        Partition q = partition_of(p, cfg);
        CHECK(q.replicas == part.replicas);
        CHECK(q.groups == part.groups);
        CHECK(cfg.process(p).subscriptions == part.groups);
      }
    }
    // partitions are disjoint and cover all subscribing learners
    std::set<ProcessId> seen;
    for (const auto& part : cfg.partitions)
      for (ProcessId p : part.replicas) CHECK(seen.insert(p).second);
  }
}

TEST_CASE("ring helpers: successor, distance, last acceptor") {
  ClusterConfig cfg = load_config(kSingleRing);
  const RingConfig& r = cfg.rings[0];
  CHECK(r.successor(0) == 1);
  CHECK(r.successor(3) == 0);
  CHECK(r.distance(0, 0) == 0);
  CHECK(r.distance(0, 3) == 3);
  CHECK(r.distance(3, 0) == 1);
}

TEST_CASE("kvstore and dlog sections") {
  const char* text = R"(
[ring 1]
members = 0 1
acceptors = 0
coordinator = 0
[ring 2]
members = 0 1
acceptors = 0
coordinator = 0
[process 0]
roles = acceptor
[process 1]
roles = learner
subscriptions = 1 2
[kvstore]
mode = hash
groups = 1
global_group = 2
[dlog]
logs = 10:1 11:1
global_group = 2
cache_limit = 1024
sync = off
)";
  ClusterConfig cfg = load_config(text);
  REQUIRE(cfg.kvstore.has_value());
  CHECK(cfg.kvstore->global_group == 2);
  REQUIRE(cfg.dlog.has_value());
  CHECK(cfg.dlog->logs.at(10) == 1);
  CHECK(cfg.dlog->cache_limit == 1024);
  CHECK_FALSE(cfg.dlog->sync);

  // range mode needs |groups|-1 sorted splits
  CHECK_THROWS_AS(load_config(R"(
[ring 1]
members = 0
acceptors = 0
coordinator = 0
[process 0]
roles = acceptor
[kvstore]
mode = range
groups = 1
splits = m
global_group = 1
)"),
                  ConfigError);
}

TEST_CASE("config digest depends on the source text") {
  ClusterConfig a = load_config(kSingleRing);
  ClusterConfig b = load_config(std::string(kSingleRing) + "\n[tuning]\nm = 1\n");
  CHECK(a.digest != 0);
  CHECK(a.digest != b.digest);
  CHECK(a.digest == load_config(kSingleRing).digest);
}
