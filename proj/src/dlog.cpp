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

#include "mrp/dlog.hpp"

#include <algorithm>

#include "mrp/envelope.hpp"
#include "mrp/hash.hpp"

namespace mrp {

std::vector<uint8_t> DlogCommand::encode() const {
  ByteWriter w;
  w.u8(static_cast<uint8_t>(op));
  switch (op) {
    case DlogOp::Append:
      w.u32(logs.at(0));
      w.bytes(value);
      break;
    case DlogOp::MultiAppend:
      w.u16(static_cast<uint16_t>(logs.size()));
      for (uint32_t l : logs) w.u32(l);
      w.bytes(value);
      break;
    case DlogOp::Read:
    case DlogOp::Trim:
      w.u32(logs.at(0));
      w.u64(position);
      break;
  }
  return w.take();
}

DlogCommand DlogCommand::decode(std::span<const uint8_t> body) {
  ByteReader r(body);
  DlogCommand cmd;
  uint8_t op = r.u8();
  if (op > static_cast<uint8_t>(DlogOp::Trim)) throw CodecError("unknown dlog op");
  cmd.op = static_cast<DlogOp>(op);
  switch (cmd.op) {
    case DlogOp::Append:
      cmd.logs.push_back(r.u32());
      cmd.value = r.rest();
      break;
    case DlogOp::MultiAppend: {
      uint16_t n = r.u16();
      if (n == 0) throw CodecError("multi-append needs at least one log");
      for (uint16_t i = 0; i < n; ++i) cmd.logs.push_back(r.u32());
      cmd.value = r.rest();
      break;
    }
    case DlogOp::Read:
    case DlogOp::Trim:
      cmd.logs.push_back(r.u32());
      cmd.position = r.u64();
      r.expect_end();
      break;
  }
  return cmd;
}

GroupId route_dlog_command(std::span<const uint8_t> body, const ClusterConfig& cfg) {
  if (!cfg.dlog) throw ConfigError("configuration has no [dlog] section");
  DlogCommand cmd = DlogCommand::decode(body);
  for (uint32_t l : cmd.logs)
    if (!cfg.dlog->logs.count(l)) throw ProtocolError("unknown log " + std::to_string(l));
  if (cmd.op == DlogOp::MultiAppend) return cfg.dlog->global_group;
  return cfg.dlog->logs.at(cmd.logs[0]);
}

// ---- LogState ----

LogState::LogState(uint32_t id, StorageEnv* env, size_t cache_limit, bool sync)
    : id_(id), env_(env), cache_limit_(cache_limit), sync_(sync) {}

std::string LogState::segment_name(uint64_t base) const {
  return "dlog" + std::to_string(id_) + "_seg" + std::to_string(base);
}

void LogState::open_segment(uint64_t base) {
  Segment seg;
  seg.base = base;
  env_->remove_file(segment_name(base));  // a stale pre-crash file may exist
  seg.medium = env_->open(segment_name(base));
  ByteWriter w;
  w.u32(id_);
  w.u64(base);
  auto header = w.take();
  seg.medium->append(header, sync_);
  segments_.push_back(std::move(seg));
}

uint64_t LogState::append(std::vector<uint8_t> value) {
  uint64_t pos = next_++;
  if (segments_.empty() || new_segment_) {
    open_segment(pos);
    new_segment_ = false;
  }
  ByteWriter w;
  w.u32(static_cast<uint32_t>(value.size()));
  w.bytes(value);
  auto entry = w.take();
  segments_.back().medium->append(entry, sync_);
  cache_bytes_ += value.size();
  cache_.emplace(pos, std::move(value));
  evict();
  return pos;
}

void LogState::evict() {
  while (cache_bytes_ > cache_limit_ && cache_.size() > 1) {
    auto it = cache_.begin();
    cache_bytes_ -= it->second.size();
    cache_.erase(it);
  }
}

uint8_t LogState::read(uint64_t position, std::vector<uint8_t>& out) const {
  if (position < trim_) return kTrimmed;
  if (position >= next_) return kNotYetWritten;
  auto it = cache_.find(position);
  if (it != cache_.end()) {
    out = it->second;
    return kOk;
  }
  return read_from_disk(position, out);
}

uint8_t LogState::read_from_disk(uint64_t position, std::vector<uint8_t>& out) const {
  // last segment with base <= position
  auto it = std::upper_bound(segments_.begin(), segments_.end(), position,
                             [](uint64_t p, const Segment& s) { return p < s.base; });
  if (it == segments_.begin()) throw StorageError("log segment missing");
  const Segment& seg = *std::prev(it);
  auto raw = env_->open(segment_name(seg.base))->read_all();
  ByteReader r(raw);
  if (r.u32() != id_ || r.u64() != seg.base) throw StorageError("log segment header mismatch");
  for (uint64_t at = seg.base; r.remaining() > 0; ++at) {
    uint32_t len = r.u32();
    if (at == position) {
      out = r.bytes(len);
      return kOk;
    }
    r.skip(len);
  }
  throw StorageError("log entry missing from segment");
}

void LogState::trim(uint64_t position) {
  if (position <= trim_) return;
  trim_ = position;
  while (!cache_.empty() && cache_.begin()->first < trim_) {
    cache_bytes_ -= cache_.begin()->second.size();
    cache_.erase(cache_.begin());
  }
  // drop segments that became fully inaccessible
  while (!segments_.empty()) {
    uint64_t end = segments_.size() > 1 ? segments_[1].base : next_;
    if (end > trim_) break;
    env_->remove_file(segment_name(segments_.front().base));
    segments_.erase(segments_.begin());
  }
  new_segment_ = true;
}

void LogState::serialize(ByteWriter& w) const {
  w.u64(next_);
  w.u64(trim_);
  for (uint64_t p = trim_; p < next_; ++p) {
    std::vector<uint8_t> v;
    if (read(p, v) != kOk) throw StorageError("retained log entry unreadable");
    w.u32(static_cast<uint32_t>(v.size()));
    w.bytes(v);
  }
}

void LogState::purge() {
  for (const auto& seg : segments_) env_->remove_file(segment_name(seg.base));
  segments_.clear();
  cache_.clear();
  cache_bytes_ = 0;
  new_segment_ = false;
  next_ = 0;
  trim_ = 0;
}

void LogState::deserialize(ByteReader& r) {
  purge();
  uint64_t n = r.u64();
  trim_ = r.u64();
  next_ = trim_;  // replay entries through append for a fresh segment
  for (uint64_t p = trim_; p < n; ++p) append(r.bytes(r.u32()));
}

uint64_t LogState::digest() const {
  uint64_t h = fnv1a64(&id_, sizeof(id_));
  h = fnv1a64(&next_, sizeof(next_), h);
  h = fnv1a64(&trim_, sizeof(trim_), h);
  for (uint64_t p = trim_; p < next_; ++p) {
    std::vector<uint8_t> v;
    if (read(p, v) != kOk) throw StorageError("retained log entry unreadable");
    h = fnv1a64(v.data(), v.size(), h);
  }
  return h;
}

// ---- DlogService ----

DlogService::DlogService(const ClusterConfig& cfg, ProcessId self, StorageEnv* env)
    : cfg_(&cfg), self_(self), env_(env ? env : &fallback_env_) {
  if (!cfg.dlog) throw ConfigError("configuration has no [dlog] section");
  const auto& info = cfg.process(self);
  for (const auto& [log, g] : cfg.dlog->logs)
    if (info.subscriptions.count(g)) my_logs_.insert(log);
  for (size_t i = 0; i < cfg.partitions.size(); ++i)
    if (cfg.partitions[i].replicas.count(self)) slice_tag_ = static_cast<uint32_t>(i);
}

LogState& DlogService::hosted(uint32_t id) {
  auto it = logs_.find(id);
  if (it == logs_.end()) {
    it = logs_
             .emplace(id, std::make_unique<LogState>(id, env_, cfg_->dlog->cache_limit,
                                                     cfg_->dlog->sync))
             .first;
  }
  return *it->second;
}

const LogState* DlogService::log(uint32_t id) const {
  auto it = logs_.find(id);
  return it == logs_.end() ? nullptr : it->second.get();
}

uint32_t DlogService::slices_expected_for(const std::vector<uint32_t>& logs) const {
  std::set<size_t> parts;
  for (uint32_t l : logs) {
    GroupId g = cfg_->dlog->logs.at(l);
    for (size_t i = 0; i < cfg_->partitions.size(); ++i)
      if (cfg_->partitions[i].groups.count(g)) parts.insert(i);
  }
  return static_cast<uint32_t>(parts.size());
}

ApplyResult DlogService::apply(const CommandRecord& rec) {
  ApplyResult out;
  DlogCommand cmd = DlogCommand::decode(rec.body);
  bool involved = false;
  for (uint32_t l : cmd.logs) involved |= my_logs_.count(l) > 0;
  if (!involved) return out;

  switch (dedup_.classify(rec.client_id, rec.seq)) {
    case DedupTable::Outcome::Stale:
      return out;
    case DedupTable::Outcome::Replay: {
      auto [status, cached] = dedup_.cached(rec.client_id);
      out.reply = true;
      out.status = status;
      out.result = *cached;
      break;
    }
    case DedupTable::Outcome::Fresh: {
      uint8_t status = kOk;
      std::vector<uint8_t> result;
      switch (cmd.op) {
        case DlogOp::Append: {
          uint64_t pos = hosted(cmd.logs[0]).append(std::move(cmd.value));
          ByteWriter w;
          w.u64(pos);
          result = w.take();
          break;
        }
        case DlogOp::MultiAppend: {
          ByteWriter w;
          uint32_t count = 0;
          ByteWriter body;
          for (uint32_t l : cmd.logs) {
            if (!my_logs_.count(l)) continue;
            body.u32(l);
            body.u64(hosted(l).append(cmd.value));
            count++;
          }
          w.u32(count);
          w.bytes(body.take());
          result = w.take();
          break;
        }
        case DlogOp::Read:
          status = hosted(cmd.logs[0]).read(cmd.position, result);
          break;
        case DlogOp::Trim: {
          LogState& l = hosted(cmd.logs[0]);
          if (cmd.position > l.next_position())
            status = kBadRequest;  // cannot trim past the end
          else
            l.trim(cmd.position);
          break;
        }
      }
      dedup_.record(rec.client_id, rec.seq, status, result);
      out.reply = true;
      out.fresh = true;
      out.status = status;
      out.result = std::move(result);
      break;
    }
  }
  if (cmd.op == DlogOp::MultiAppend) {
    out.partial = true;
    out.slice_tag = slice_tag_;
    out.slices_expected = slices_expected_for(cmd.logs);
  }
  return out;
}

std::vector<uint8_t> DlogService::serialize() const {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(logs_.size()));
  for (const auto& [id, state] : logs_) {
    w.u32(id);
    state->serialize(w);
  }
  auto head = w.take();
  dedup_.serialize(head);
  return head;
}

void DlogService::deserialize(std::span<const uint8_t> blob) {
  ByteReader r(blob);
  for (const auto& [id, state] : logs_) state->purge();
  logs_.clear();
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    uint32_t id = r.u32();
    hosted(id).deserialize(r);
  }
  dedup_.deserialize(r);
  r.expect_end();
}

std::vector<uint8_t> DlogService::combine_slices(
    const std::map<uint32_t, std::vector<uint8_t>>& slices) const {
  std::vector<std::pair<uint32_t, uint64_t>> all;
  for (const auto& [tag, bytes] : slices) {
    ByteReader r(bytes);
    uint32_t n = r.u32();
    for (uint32_t i = 0; i < n; ++i) {
      uint32_t log = r.u32();
      all.emplace_back(log, r.u64());
    }
    r.expect_end();
  }
  std::sort(all.begin(), all.end());
  ByteWriter w;
  w.u32(static_cast<uint32_t>(all.size()));
  for (const auto& [log, pos] : all) {
    w.u32(log);
    w.u64(pos);
  }
  return w.take();
}

uint64_t DlogService::state_digest() const {
  uint64_t h = dedup_.digest();
  for (const auto& [id, state] : logs_) h ^= mix64(state->digest() + id);
  return h;
}

}  // namespace mrp
