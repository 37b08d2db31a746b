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

#include "mrp/checkpoint.hpp"

#include <algorithm>

namespace mrp {

namespace {
constexpr uint32_t kMagic = 0x4D52434B;  // "MRCK"
constexpr uint16_t kVersion = 1;
}  // namespace

std::vector<uint8_t> Checkpoint::encode() const {
  ByteWriter w;
  w.u32(kMagic);
  w.u16(kVersion);
  write_tuple(w, tuple);
  w.u64(digest);
  w.u32(static_cast<uint32_t>(blob.size()));
  w.bytes(blob);
  return w.take();
}

Checkpoint Checkpoint::decode(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.u32() != kMagic) throw StorageError("bad checkpoint magic");
  if (r.u16() != kVersion) throw StorageError("unsupported checkpoint version");
  Checkpoint c;
  c.tuple = read_tuple(r);
  c.digest = r.u64();
  c.blob = r.bytes(r.u32());
  r.expect_end();
  return c;
}

bool tuple_leq(const CheckpointTuple& a, const CheckpointTuple& b) {
  for (const auto& [g, k] : a) {
    auto it = b.find(g);
    InstanceId other = it == b.end() ? 0 : it->second;
    if (k > other) return false;
  }
  return true;
}

InstanceId select_trim_point(const std::vector<InstanceId>& replies) {
  if (replies.empty()) throw ProtocolError("trim decision without replies");
  return *std::min_element(replies.begin(), replies.end());
}

CheckpointTuple select_recovery_target(const std::vector<CheckpointTuple>& replies) {
  if (replies.empty()) throw ProtocolError("recovery decision without replies");
  const CheckpointTuple* best = &replies[0];
  for (const auto& t : replies)
    if (tuple_leq(*best, t)) best = &t;
  for (const auto& t : replies)
    if (!tuple_leq(t, *best))
      throw ProtocolError("incomparable checkpoint tuples within one partition");
  return *best;
}

}  // namespace mrp
