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
#include "mrp/stable_log.hpp"
#include "mrp/storage.hpp"

using namespace mrp;

namespace {

ProposedValue app(std::vector<uint8_t> bytes) {
  ProposedValue v;
  v.payload = std::move(bytes);
  return v;
}

}  // namespace

TEST_CASE("votes and promises survive a reload") {
  MemStorageEnv env;
  {
    StableLog log(env.open("l"), true);
    log.promise(Ballot{1, 0}, 0, 100);
    log.vote(0, Ballot{1, 0}, app({1}));
    log.vote(1, Ballot{1, 0}, app({2, 2}));
    log.mark_decided(0);
  }
  StableLog log(env.open("l"), true);
  CHECK(log.promised() == Ballot{1, 0});
  CHECK(log.promised_end() == 100);
  REQUIRE(log.vote_at(0) != nullptr);
  CHECK(log.vote_at(0)->decided);
  CHECK(log.vote_at(0)->value == app({1}));
  REQUIRE(log.vote_at(1) != nullptr);
  CHECK_FALSE(log.vote_at(1)->decided);
  CHECK(log.vote_at(1)->value == app({2, 2}));
}

TEST_CASE("a restarted acceptor keeps the later ballot for an instance") {
  MemStorageEnv env;
  {
    StableLog log(env.open("l"), true);
    log.vote(5, Ballot{1, 0}, app({1}));
    log.vote(5, Ballot{2, 1}, app({9}));
  }
  StableLog log(env.open("l"), true);
  REQUIRE(log.vote_at(5) != nullptr);
  CHECK(log.vote_at(5)->ballot == Ballot{2, 1});
  CHECK(log.vote_at(5)->value == app({9}));
}

TEST_CASE("torn final record is discarded on recovery") {
  MemStorageEnv env;
  {
    StableLog log(env.open("l"), true);
    log.vote(0, Ballot{1, 0}, app({1, 1, 1}));
    log.vote(1, Ballot{1, 0}, app({2, 2, 2}));
  }
  // simulate a crash mid-append: chop bytes off the tail
  auto medium = env.open("l");
  auto bytes = medium->read_all();
  REQUIRE(bytes.size() > 4);
  for (size_t cut = 1; cut <= 6 && cut < bytes.size(); ++cut) {
    std::vector<uint8_t> torn(bytes.begin(), bytes.end() - static_cast<long>(cut));
    env.open("torn")->rewrite(torn);
    StableLog log(env.open("torn"), true);
    // first record intact, second may be lost but never corrupted
    REQUIRE(log.vote_at(0) != nullptr);
    CHECK(log.vote_at(0)->value == app({1, 1, 1}));
    if (auto* v = log.vote_at(1)) CHECK(v->value == app({2, 2, 2}));
  }
}

TEST_CASE("trim removes instances below the point and compacts") {
  MemStorageEnv env;
  {
    StableLog log(env.open("l"), true);
    for (InstanceId i = 0; i < 20; ++i) log.vote(i, Ballot{1, 0}, app({static_cast<uint8_t>(i)}));
    log.trim(10);
    CHECK(log.trim_point() == 10);
    CHECK(log.vote_at(9) == nullptr);
    CHECK(log.vote_at(10) != nullptr);
    CHECK(log.slots_used() == 10);
  }
  StableLog log(env.open("l"), true);
  CHECK(log.trim_point() == 10);
  CHECK(log.vote_at(9) == nullptr);
  CHECK(log.vote_at(15) != nullptr);
}

TEST_CASE("skip values round trip through the log") {
  MemStorageEnv env;
  {
    StableLog log(env.open("l"), true);
    ProposedValue s;
    s.kind = ValueKind::Skip;
    s.skip_count = 45;
    log.vote(3, Ballot{1, 0}, s);
  }
  StableLog log(env.open("l"), true);
  REQUIRE(log.vote_at(3) != nullptr);
  CHECK(log.vote_at(3)->value.kind == ValueKind::Skip);
  CHECK(log.vote_at(3)->value.skip_count == 45);
}
