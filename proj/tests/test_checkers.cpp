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

#include "doctest.h"
#include "mrp/checkers.hpp"

using namespace mrp;

namespace {

TimedTrace decide(uint64_t us, ProcessId node, GroupId g, InstanceId i, uint64_t vid,
                  InstanceId span = 1) {
  TimedTrace t;
  t.at_us = us;
  t.ev.kind = TraceEvent::Kind::Decide;
  t.ev.node = node;
  t.ev.group = g;
  t.ev.instance = i;
  t.ev.span = span;
  t.ev.value_id = vid;
  return t;
}

TimedTrace deliver(uint64_t us, ProcessId node, uint64_t client, uint64_t seq) {
  TimedTrace t;
  t.at_us = us;
  t.ev.kind = TraceEvent::Kind::Deliver;
  t.ev.node = node;
  t.ev.client_id = client;
  t.ev.seq = seq;
  return t;
}

TimedTrace ckpt(uint64_t us, ProcessId node, CheckpointTuple tuple) {
  TimedTrace t;
  t.at_us = us;
  t.ev.kind = TraceEvent::Kind::Checkpoint;
  t.ev.node = node;
  t.ev.tuple = std::move(tuple);
  return t;
}

SimCommand cmd(uint64_t client, uint64_t seq, bool replied = true) {
  SimCommand c;
  c.client_id = client;
  c.seq = seq;
  c.replied = replied;
  return c;
}

// two learners, one partition each side
const char* kCfg = R"(
[ring 1]
members = 0 1 2
acceptors = 0
coordinator = 0
[process 0]
roles = acceptor
[process 1]
roles = learner
subscriptions = 1
[process 2]
roles = learner
subscriptions = 1
)";

}  // namespace

TEST_CASE("agreement checker") {
  std::vector<TimedTrace> clean{decide(1, 1, 1, 0, 100), decide(2, 2, 1, 0, 100),
                                decide(3, 1, 1, 1, 200, 5), decide(4, 2, 1, 1, 200, 5),
                                decide(5, 1, 1, 6, 300)};
  CHECK(check_agreement(clean).ok);

  SUBCASE("conflicting value for one instance") {
    auto bad = clean;
    bad.push_back(decide(9, 2, 1, 6, 999));
    auto res = check_agreement(bad);
    CHECK_FALSE(res.ok);
    REQUIRE_FALSE(res.problems.empty());
    CHECK(res.problems[0].find("conflicting") != std::string::npos);
  }

  SUBCASE("overlapping spans") {
    // a skip of 5 at instance 1 and a value decided at instance 3
    std::vector<TimedTrace> bad{decide(1, 1, 1, 1, 200, 5), decide(2, 1, 1, 3, 300)};
    auto res = check_agreement(bad);
    CHECK_FALSE(res.ok);
    CHECK(res.problems[0].find("overlapping") != std::string::npos);
  }

  SUBCASE("same base in different groups never conflicts") {
    std::vector<TimedTrace> two{decide(1, 1, 1, 0, 100), decide(2, 1, 2, 0, 777)};
    CHECK(check_agreement(two).ok);
  }
}

TEST_CASE("validity checker") {
  std::map<uint64_t, SimCommand> commands;
  commands[5] = cmd(5, 1);
  std::vector<TimedTrace> clean{deliver(1, 1, 5, 1), deliver(2, 2, 5, 1)};
  CHECK(check_validity(clean, commands).ok);

  auto bad = clean;
  bad.push_back(deliver(3, 1, 6, 1));  // nobody submitted client 6
  CHECK_FALSE(check_validity(bad, commands).ok);
  bad = clean;
  bad.push_back(deliver(3, 1, 5, 2));  // wrong seq for a known client
  CHECK_FALSE(check_validity(bad, commands).ok);
}

TEST_CASE("acyclic order checker") {
  SUBCASE("identical orders pass") {
    std::vector<TimedTrace> t{deliver(1, 1, 1, 1), deliver(2, 1, 2, 1), deliver(3, 2, 1, 1),
                              deliver(4, 2, 2, 1)};
    CHECK(check_acyclic_order(t).ok);
  }

  SUBCASE("opposite pairwise orders form a cycle") {
    std::vector<TimedTrace> t{deliver(1, 1, 1, 1), deliver(2, 1, 2, 1), deliver(3, 2, 2, 1),
                              deliver(4, 2, 1, 1)};
    auto res = check_acyclic_order(t);
    CHECK_FALSE(res.ok);
    CHECK(res.problems[0].find("cycle") != std::string::npos);
  }

  SUBCASE("a three node cycle without any pairwise disagreement") {
    // node 1: a < b, node 2: b < c, node 3: c < a
    std::vector<TimedTrace> t{deliver(1, 1, 10, 1), deliver(2, 1, 20, 1),
                              deliver(3, 2, 20, 1), deliver(4, 2, 30, 1),
                              deliver(5, 3, 30, 1), deliver(6, 3, 10, 1)};
    CHECK_FALSE(check_acyclic_order(t).ok);
  }

  SUBCASE("redeliveries after a recovery do not count") {
    std::vector<TimedTrace> t{deliver(1, 1, 1, 1), deliver(2, 1, 2, 1),
                              // node 1 replays both after restart
                              deliver(5, 1, 1, 1), deliver(6, 1, 2, 1),
                              deliver(7, 2, 1, 1), deliver(8, 2, 2, 1)};
    CHECK(check_acyclic_order(t).ok);
  }
}

TEST_CASE("checkpoint order checker") {
  ClusterConfig cfg = load_config(kCfg);

  SUBCASE("monotone comparable tuples pass") {
    std::vector<TimedTrace> t{ckpt(1, 1, {{1, 5}}), ckpt(2, 2, {{1, 5}}), ckpt(3, 1, {{1, 9}}),
                              ckpt(4, 2, {{1, 12}})};
    CHECK(check_checkpoint_order(cfg, t).ok);
  }

  SUBCASE("a node going backwards fails") {
    std::vector<TimedTrace> t{ckpt(1, 1, {{1, 9}}), ckpt(2, 1, {{1, 5}})};
    auto res = check_checkpoint_order(cfg, t);
    CHECK_FALSE(res.ok);
    CHECK(res.problems[0].find("backwards") != std::string::npos);
  }

  SUBCASE("incomparable tuples inside one partition fail") {
    std::vector<TimedTrace> t{ckpt(1, 1, {{1, 5}, {2, 9}}), ckpt(2, 2, {{1, 9}, {2, 5}})};
    auto res = check_checkpoint_order(cfg, t);
    CHECK_FALSE(res.ok);
    CHECK(res.problems[0].find("incomparable") != std::string::npos);
  }
}

TEST_CASE("all replied checker") {
  std::map<uint64_t, SimCommand> commands;
  commands[1] = cmd(1, 1);
  commands[2] = cmd(2, 1);
  CHECK(check_all_replied(commands).ok);
  commands[3] = cmd(3, 1, false);
  CHECK_FALSE(check_all_replied(commands).ok);
}

TEST_CASE("rate and delivery counters honor their windows") {
  std::vector<TimedTrace> t{decide(1'000'000, 1, 1, 0, 1), decide(1'500'000, 1, 1, 1, 2, 9),
                            decide(2'500'000, 1, 1, 10, 3), decide(1'200'000, 2, 1, 0, 1),
                            deliver(1'100'000, 1, 7, 1), deliver(1'200'000, 1, 7, 1),
                            deliver(2'600'000, 1, 8, 1)};
  // node 1, [1s, 2s): bases 0 and 1, spans 1 + 9
  CHECK(decided_rate(t, 1, 1, 1'000'000, 2'000'000) == doctest::Approx(10.0));
  CHECK(decided_rate(t, 1, 1, 0, 500'000) == doctest::Approx(0.0));
  CHECK(delivered_count(t, 1, 1'000'000, 2'000'000) == 1);  // duplicate collapses
  CHECK(delivered_count(t, 1, 0, 3'000'000) == 2);
  CHECK(delivered_count(t, 2, 0, 3'000'000) == 0);
}
