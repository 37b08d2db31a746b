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

#include "mrp/service.hpp"

#include "mrp/dlog.hpp"
#include "mrp/envelope.hpp"
#include "mrp/hash.hpp"
#include "mrp/kvstore.hpp"

namespace mrp {

std::vector<uint8_t> CommandRecord::encode() const {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(1 + 8 + 8 + 2 + body.size()));
  w.u8(static_cast<uint8_t>(service));
  w.u64(client_id);
  w.u64(seq);
  w.u16(origin_node);
  w.bytes(body);
  return w.take();
}

std::vector<CommandRecord> unpack_batch(std::span<const uint8_t> payload) {
  std::vector<CommandRecord> out;
  ByteReader r(payload);
  while (r.remaining() > 0) {
    uint32_t len = r.u32();
    if (len < 19) throw CodecError("command record too short");
    auto rec_bytes = r.bytes(len);
    ByteReader rr(rec_bytes);
    CommandRecord rec;
    uint8_t svc = rr.u8();
    if (svc > static_cast<uint8_t>(ServiceKind::Admin)) throw CodecError("unknown service kind");
    rec.service = static_cast<ServiceKind>(svc);
    rec.client_id = rr.u64();
    rec.seq = rr.u64();
    rec.origin_node = rr.u16();
    rec.body = rr.rest();
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<uint8_t> Service::combine_slices(const std::map<uint32_t, std::vector<uint8_t>>& slices) const {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(slices.size()));
  for (const auto& [tag, bytes] : slices) {
    w.u32(tag);
    w.u32(static_cast<uint32_t>(bytes.size()));
    w.bytes(bytes);
  }
  return w.take();
}

DedupTable::Outcome DedupTable::classify(uint64_t client, uint64_t seq) const {
  auto it = entries_.find(client);
  if (it == entries_.end() || seq > it->second.seq) return Outcome::Fresh;
  if (seq == it->second.seq) return Outcome::Replay;
  return Outcome::Stale;
}

std::pair<uint8_t, const std::vector<uint8_t>*> DedupTable::cached(uint64_t client) const {
  auto it = entries_.find(client);
  if (it == entries_.end()) throw ProtocolError("no cached reply for client");
  return {it->second.status, &it->second.reply};
}

void DedupTable::record(uint64_t client, uint64_t seq, uint8_t status, std::vector<uint8_t> reply) {
  entries_[client] = Entry{seq, status, std::move(reply)};
}

void DedupTable::serialize(std::vector<uint8_t>& out) const {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(entries_.size()));
  for (const auto& [client, e] : entries_) {
    w.u64(client);
    w.u64(e.seq);
    w.u8(e.status);
    w.u32(static_cast<uint32_t>(e.reply.size()));
    w.bytes(e.reply);
  }
  auto bytes = w.take();
  out.insert(out.end(), bytes.begin(), bytes.end());
}

void DedupTable::deserialize(ByteReader& r) {
  entries_.clear();
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    uint64_t client = r.u64();
    Entry e;
    e.seq = r.u64();
    e.status = r.u8();
    e.reply = r.bytes(r.u32());
    entries_[client] = std::move(e);
  }
}

uint64_t DedupTable::digest() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [client, e] : entries_) {
    h = fnv1a64(&client, sizeof(client), h);
    h = fnv1a64(&e.seq, sizeof(e.seq), h);
  }
  return h;
}

ApplyResult DummyService::apply(const CommandRecord& rec) {
  ApplyResult r;
  switch (dedup_.classify(rec.client_id, rec.seq)) {
    case DedupTable::Outcome::Stale:
      return r;
    case DedupTable::Outcome::Replay:
      r.reply = true;
      r.status = dedup_.cached(rec.client_id).first;
      return r;
    case DedupTable::Outcome::Fresh:
      break;
  }
  applied_++;
  rolling_ = fnv1a64(rec.body.data(), rec.body.size(), rolling_ ^ rec.client_id ^ rec.seq);
  dedup_.record(rec.client_id, rec.seq, kOk, {});
  r.reply = true;
  r.fresh = true;
  r.status = kOk;
  return r;
}

std::vector<uint8_t> DummyService::serialize() const {
  ByteWriter w;
  w.u64(applied_);
  w.u64(rolling_);
  std::vector<uint8_t> dd;
  dedup_.serialize(dd);
  w.bytes(dd);
  return w.take();
}

void DummyService::deserialize(std::span<const uint8_t> blob) {
  ByteReader r(blob);
  applied_ = r.u64();
  rolling_ = r.u64();
  dedup_.deserialize(r);
  r.expect_end();
}

uint64_t DummyService::state_digest() const {
  ByteWriter w;
  w.u64(applied_);
  w.u64(rolling_);
  auto b = w.take();
  return fnv1a64(b.data(), b.size());
}

GroupId route_command(ServiceKind service, std::span<const uint8_t> body, const ClusterConfig& cfg) {
  switch (service) {
    case ServiceKind::Dummy: {
      if (body.size() < 2) throw CodecError("dummy command too short");
      GroupId g = static_cast<GroupId>((body[0] << 8) | body[1]);
      cfg.ring_or_throw(g);
      return g;
    }
    case ServiceKind::Kv:
      return route_kv_command(body, cfg);
    case ServiceKind::Dlog:
      return route_dlog_command(body, cfg);
    case ServiceKind::Admin:
      throw ProtocolError("admin commands are not multicast");
  }
  throw CodecError("unknown service kind");
}

std::unique_ptr<Service> make_service(ServiceKind kind, const ClusterConfig& cfg, ProcessId self,
                                      StorageEnv* env) {
  switch (kind) {
    case ServiceKind::Dummy:
      return std::make_unique<DummyService>();
    case ServiceKind::Kv:
      return std::make_unique<KvService>(cfg, self);
    case ServiceKind::Dlog:
      return std::make_unique<DlogService>(cfg, self, env);
    default:
      throw ProtocolError("no service for this kind");
  }
}

}  // namespace mrp
