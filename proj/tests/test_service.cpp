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
#include "mrp/envelope.hpp"
#include "mrp/service.hpp"

using namespace mrp;

TEST_CASE("command records pack and unpack through a batch") {
  CommandRecord a{ServiceKind::Kv, 0x1111, 1, 7, {1, 2, 3}};
  CommandRecord b{ServiceKind::Dlog, 0x2222, 9, 8, {}};
  std::vector<uint8_t> batch = a.encode();
  auto eb = b.encode();
  batch.insert(batch.end(), eb.begin(), eb.end());

  auto recs = unpack_batch(batch);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].service == ServiceKind::Kv);
  CHECK(recs[0].client_id == 0x1111);
  CHECK(recs[0].seq == 1);
  CHECK(recs[0].origin_node == 7);
  CHECK(recs[0].body == std::vector<uint8_t>{1, 2, 3});
  CHECK(recs[1].service == ServiceKind::Dlog);
  CHECK(recs[1].body.empty());
}

TEST_CASE("malformed batches are rejected") {
  CommandRecord a{ServiceKind::Kv, 1, 1, 1, {1}};
  auto batch = a.encode();
  batch.pop_back();
  CHECK_THROWS_AS(unpack_batch(batch), CodecError);
}

TEST_CASE("dedup table classifies fresh, replay and stale") {
  DedupTable t;
  CHECK(t.classify(5, 1) == DedupTable::Outcome::Fresh);
  t.record(5, 1, kOk, {9});
  CHECK(t.classify(5, 1) == DedupTable::Outcome::Replay);
  auto [status, cached] = t.cached(5);
  CHECK(status == kOk);
  CHECK(*cached == std::vector<uint8_t>{9});
  t.record(5, 2, kNotFound, {});
  CHECK(t.classify(5, 1) == DedupTable::Outcome::Stale);
  CHECK(t.classify(5, 2) == DedupTable::Outcome::Replay);
  CHECK(t.classify(5, 3) == DedupTable::Outcome::Fresh);
  CHECK(t.classify(6, 1) == DedupTable::Outcome::Fresh);  // other clients unaffected
}

TEST_CASE("dedup table survives serialization") {
  DedupTable t;
  t.record(1, 4, kAlreadyExists, {1, 2});
  t.record(2, 9, kOk, {});
  std::vector<uint8_t> bytes;
  t.serialize(bytes);
  DedupTable u;
  ByteReader r(bytes);
  u.deserialize(r);
  CHECK(u.digest() == t.digest());
  CHECK(u.classify(1, 4) == DedupTable::Outcome::Replay);
  CHECK(u.cached(1).first == kAlreadyExists);
}

TEST_CASE("dummy service digest is order sensitive") {
  DummyService a, b;
  CommandRecord r1{ServiceKind::Dummy, 1, 1, 0, {0, 1, 5}};
  CommandRecord r2{ServiceKind::Dummy, 2, 1, 0, {0, 1, 6}};
  auto res = a.apply(r1);
  CHECK(res.reply);
  CHECK(res.status == kOk);
  a.apply(r2);
  b.apply(r2);
  b.apply(r1);
  CHECK(a.state_digest() != b.state_digest());

  DummyService c;
  c.apply(r1);
  c.apply(r2);
  CHECK(a.state_digest() == c.state_digest());
}

TEST_CASE("dummy service state round trips") {
  DummyService a;
  a.apply({ServiceKind::Dummy, 1, 1, 0, {0, 2, 3}});
  DummyService b;
  b.deserialize(a.serialize());
  CHECK(b.state_digest() == a.state_digest());
}

TEST_CASE("dummy commands route on their leading group id") {
  ClusterConfig cfg = load_config(R"(
[ring 7]
members = 0
acceptors = 0
coordinator = 0
[process 0]
roles = acceptor
)");
  std::vector<uint8_t> body{0x00, 0x07, 1, 2, 3};
  CHECK(route_command(ServiceKind::Dummy, body, cfg) == 7);
  std::vector<uint8_t> tiny{0x01};
  CHECK_THROWS_AS(route_command(ServiceKind::Dummy, tiny, cfg), CodecError);
  std::vector<uint8_t> unknown{0x00, 0x08};
  CHECK_THROWS_AS(route_command(ServiceKind::Dummy, unknown, cfg), ConfigError);
}
