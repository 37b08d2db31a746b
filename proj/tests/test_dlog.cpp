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
#include "mrp/dlog.hpp"
#include "mrp/envelope.hpp"

using namespace mrp;

namespace {

std::vector<uint8_t> bytes(const std::string& s) { return {s.begin(), s.end()}; }

DlogCommand append_cmd(uint32_t log, const std::string& v) {
  return {DlogOp::Append, {log}, 0, bytes(v)};
}
DlogCommand mappend_cmd(std::vector<uint32_t> logs, const std::string& v) {
  return {DlogOp::MultiAppend, std::move(logs), 0, bytes(v)};
}
DlogCommand read_cmd(uint32_t log, uint64_t pos) { return {DlogOp::Read, {log}, pos, {}}; }
DlogCommand trim_cmd(uint32_t log, uint64_t pos) { return {DlogOp::Trim, {log}, pos, {}}; }

const char* kDlogCfg = R"(
[ring 1]
members = 0 1
acceptors = 0
coordinator = 0
[ring 2]
members = 0 2
acceptors = 0
coordinator = 0
[ring 3]
members = 0 1 2
acceptors = 0
coordinator = 0
[process 0]
roles = acceptor
[process 1]
roles = learner
subscriptions = 1 3
[process 2]
roles = learner
subscriptions = 2 3
[dlog]
logs = 10:1 20:2
global_group = 3
cache_limit = 1024
)";

}  // namespace

TEST_CASE("dlog commands round trip their codec") {
  for (const auto& cmd : {append_cmd(1, "vvv"), mappend_cmd({1, 2, 3}, "x"), read_cmd(7, 42),
                          trim_cmd(7, 9)}) {
    DlogCommand back = DlogCommand::decode(cmd.encode());
    CHECK(back.op == cmd.op);
    CHECK(back.logs == cmd.logs);
    CHECK(back.position == cmd.position);
    CHECK(back.value == cmd.value);
  }
  std::vector<uint8_t> junk{0x07};
  CHECK_THROWS_AS(DlogCommand::decode(junk), CodecError);
  // empty multi-append log list
  std::vector<uint8_t> empty_multi{0x01, 0x00, 0x00};
  CHECK_THROWS_AS(DlogCommand::decode(empty_multi), CodecError);
}

TEST_CASE("log positions are dense from zero and survive trim") {
  MemStorageEnv env;
  LogState log(10, &env, 1 << 20, false);

  CHECK(log.append(bytes("a")) == 0);
  CHECK(log.append(bytes("b")) == 1);
  CHECK(log.append(bytes("c")) == 2);
  CHECK(log.next_position() == 3);

  std::vector<uint8_t> out;
  CHECK(log.read(0, out) == kOk);
  CHECK(out == bytes("a"));
  CHECK(log.read(3, out) == kNotYetWritten);
  CHECK(log.read(99, out) == kNotYetWritten);

  log.trim(2);
  CHECK(log.trim_position() == 2);
  CHECK(log.read(0, out) == kTrimmed);
  CHECK(log.read(1, out) == kTrimmed);
  CHECK(log.read(2, out) == kOk);
  CHECK(out == bytes("c"));

  // the position counter does not reset after trim
  CHECK(log.append(bytes("d")) == 3);
  CHECK(log.read(3, out) == kOk);
  CHECK(out == bytes("d"));

  // trimming everything, including to next_position, is allowed
  log.trim(log.next_position());
  CHECK(log.read(3, out) == kTrimmed);
  CHECK(log.append(bytes("e")) == 4);

  // trim is idempotent and never moves backwards
  log.trim(4);
  log.trim(2);
  CHECK(log.trim_position() == 4);
}

TEST_CASE("evicted entries read identically from segment files") {
  MemStorageEnv env;
  LogState log(10, &env, 64, false);  // tiny cache forces eviction
  std::vector<std::string> values;
  for (int i = 0; i < 50; ++i) {
    values.push_back("value-" + std::to_string(i) + std::string(16, 'x'));
    CHECK(log.append(bytes(values.back())) == static_cast<uint64_t>(i));
  }
  for (int i = 0; i < 50; ++i) {
    std::vector<uint8_t> out;
    REQUIRE(log.read(static_cast<uint64_t>(i), out) == kOk);
    CHECK(out == bytes(values[static_cast<size_t>(i)]));
  }
  // segment files back the durable tail
  CHECK(env.total_bytes() > 0);
  // trimming everything eventually drops segment files
  log.trim(log.next_position());
  std::vector<uint8_t> out;
  CHECK(log.read(49, out) == kTrimmed);
}

TEST_CASE("log state serializes the retained suffix") {
  MemStorageEnv env;
  LogState a(10, &env, 64, false);
  for (int i = 0; i < 30; ++i) a.append(bytes("payload-" + std::to_string(i)));
  a.trim(12);

  ByteWriter w;
  a.serialize(w);
  auto blob = w.take();

  MemStorageEnv env2;
  LogState b(10, &env2, 64, false);
  ByteReader r(blob);
  b.deserialize(r);
  CHECK(b.next_position() == a.next_position());
  CHECK(b.trim_position() == a.trim_position());
  CHECK(b.digest() == a.digest());
  std::vector<uint8_t> out;
  CHECK(b.read(11, out) == kTrimmed);
  REQUIRE(b.read(29, out) == kOk);
  CHECK(out == bytes("payload-29"));
}

TEST_CASE("dlog routing targets the owning group or the global group") {
  ClusterConfig cfg = load_config(kDlogCfg);
  CHECK(route_dlog_command(append_cmd(10, "x").encode(), cfg) == 1);
  CHECK(route_dlog_command(append_cmd(20, "x").encode(), cfg) == 2);
  CHECK(route_dlog_command(read_cmd(20, 0).encode(), cfg) == 2);
  CHECK(route_dlog_command(trim_cmd(10, 0).encode(), cfg) == 1);
  CHECK(route_dlog_command(mappend_cmd({10, 20}, "x").encode(), cfg) == 3);
  CHECK_THROWS_AS(route_dlog_command(append_cmd(99, "x").encode(), cfg), ProtocolError);
}

TEST_CASE("dlog service applies the operation table with exactly-once replies") {
  ClusterConfig cfg = load_config(kDlogCfg);
  DlogService svc(cfg, 1);  // hosts log 10 only
  uint64_t seq = 0;
  auto run = [&](const DlogCommand& cmd) {
    return svc.apply({ServiceKind::Dlog, 9, ++seq, 0, cmd.encode()});
  };

  auto r = run(append_cmd(10, "first"));
  REQUIRE(r.reply);
  CHECK(r.status == kOk);
  ByteReader rd0(r.result);
  CHECK(rd0.u64() == 0);

  // a replayed seq returns the cached reply without a second append
  auto replay = svc.apply({ServiceKind::Dlog, 9, seq, 0, append_cmd(10, "first").encode()});
  REQUIRE(replay.reply);
  ByteReader rd1(replay.result);
  CHECK(rd1.u64() == 0);
  REQUIRE(svc.log(10) != nullptr);
  CHECK(svc.log(10)->next_position() == 1);

  auto rr = run(read_cmd(10, 0));
  CHECK(rr.status == kOk);
  CHECK(rr.result == bytes("first"));
  CHECK(run(read_cmd(10, 5)).status == kNotYetWritten);

  CHECK(run(trim_cmd(10, 1)).status == kOk);
  CHECK(run(read_cmd(10, 0)).status == kTrimmed);
  CHECK(run(trim_cmd(10, 9)).status == kBadRequest);  // beyond the end

  // commands for the other partition's log produce no local effect
  auto other = run(append_cmd(20, "x"));
  CHECK_FALSE(other.reply);
  CHECK(svc.log(20) == nullptr);
}

TEST_CASE("multi-append slices combine into one log-ordered position list") {
  ClusterConfig cfg = load_config(kDlogCfg);
  DlogService p1(cfg, 1), p2(cfg, 2);
  CommandRecord rec{ServiceKind::Dlog, 5, 1, 0, mappend_cmd({10, 20}, "both").encode()};
  auto r1 = p1.apply(rec);
  auto r2 = p2.apply(rec);
  REQUIRE(r1.reply);
  REQUIRE(r2.reply);
  CHECK(r1.partial);
  CHECK(r2.partial);
  CHECK(r1.slices_expected == 2);
  CHECK(r1.slice_tag != r2.slice_tag);

  std::map<uint32_t, std::vector<uint8_t>> slices{{r1.slice_tag, r1.result},
                                                  {r2.slice_tag, r2.result}};
  auto combined = p1.combine_slices(slices);
  ByteReader r(combined);
  REQUIRE(r.u32() == 2);
  CHECK(r.u32() == 10);
  CHECK(r.u64() == 0);
  CHECK(r.u32() == 20);
  CHECK(r.u64() == 0);

  // both replicas stored the entry in their own log
  std::vector<uint8_t> out;
  REQUIRE(p1.log(10)->read(0, out) == kOk);
  CHECK(out == bytes("both"));
  REQUIRE(p2.log(20)->read(0, out) == kOk);
  CHECK(out == bytes("both"));
}

TEST_CASE("dlog service state round trips") {
  ClusterConfig cfg = load_config(kDlogCfg);
  DlogService a(cfg, 1);
  uint64_t seq = 0;
  for (int i = 0; i < 20; ++i)
    a.apply({ServiceKind::Dlog, 3, ++seq, 0, append_cmd(10, "e" + std::to_string(i)).encode()});
  a.apply({ServiceKind::Dlog, 3, ++seq, 0, trim_cmd(10, 5).encode()});

  DlogService b(cfg, 1);
  b.deserialize(a.serialize());
  CHECK(b.state_digest() == a.state_digest());
  REQUIRE(b.log(10) != nullptr);
  CHECK(b.log(10)->next_position() == 20);
  CHECK(b.log(10)->trim_position() == 5);
  std::vector<uint8_t> out;
  REQUIRE(b.log(10)->read(19, out) == kOk);
  CHECK(out == bytes("e19"));
}
