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

#include "mrp/kvstore.hpp"

#include <algorithm>
#include <unordered_set>

#include "mrp/envelope.hpp"
#include "mrp/hash.hpp"

namespace mrp {

std::vector<uint8_t> KvCommand::encode() const {
  ByteWriter w;
  w.u8(static_cast<uint8_t>(op));
  w.str(key);
  switch (op) {
    case KvOp::Read:
    case KvOp::Delete:
      break;
    case KvOp::Scan:
      w.str(key2);
      break;
    case KvOp::Update:
    case KvOp::Insert:
      w.u32(static_cast<uint32_t>(value.size()));
      w.bytes(value);
      break;
  }
  return w.take();
}

KvCommand KvCommand::decode(std::span<const uint8_t> body) {
  ByteReader r(body);
  KvCommand cmd;
  uint8_t op = r.u8();
  if (op > static_cast<uint8_t>(KvOp::Delete)) throw CodecError("unknown kv op");
  cmd.op = static_cast<KvOp>(op);
  cmd.key = r.str();
  switch (cmd.op) {
    case KvOp::Read:
    case KvOp::Delete:
      break;
    case KvOp::Scan:
      cmd.key2 = r.str();
      break;
    case KvOp::Update:
    case KvOp::Insert:
      cmd.value = r.bytes(r.u32());
      break;
  }
  r.expect_end();
  return cmd;
}

PartitionMap PartitionMap::from_config(const ClusterConfig& cfg) {
  if (!cfg.kvstore) throw ConfigError("configuration has no [kvstore] section");
  PartitionMap pm;
  pm.cfg_ = *cfg.kvstore;
  return pm;
}

GroupId PartitionMap::group_for_key(const std::string& key) const {
  if (cfg_.mode == PartitionMode::Hash) {
    return cfg_.groups[key_hash(key) % cfg_.groups.size()];
  }
  // range: splits[i] is the first key of partition i+1
  size_t idx = static_cast<size_t>(std::upper_bound(cfg_.splits.begin(), cfg_.splits.end(), key) -
                                   cfg_.splits.begin());
  return cfg_.groups[idx];
}

GroupId PartitionMap::route(const KvCommand& cmd) const {
  if (cmd.op != KvOp::Scan) return group_for_key(cmd.key);
  if (cfg_.mode == PartitionMode::Range) {
    GroupId a = group_for_key(cmd.key);
    GroupId b = group_for_key(cmd.key2);
    if (a == b) return a;  // interval fits one partition
  }
  return cfg_.global_group;
}

GroupId route_kv_command(std::span<const uint8_t> body, const ClusterConfig& cfg) {
  return PartitionMap::from_config(cfg).route(KvCommand::decode(body));
}

KvState::Outcome KvState::execute(const KvCommand& cmd) {
  Outcome out;
  switch (cmd.op) {
    case KvOp::Read: {
      auto it = data_.find(cmd.key);
      if (it == data_.end()) {
        out.status = kNotFound;
      } else {
        out.result = it->second;
      }
      break;
    }
    case KvOp::Scan: {
      KvEntries entries;
      for (auto it = data_.lower_bound(cmd.key); it != data_.end() && it->first <= cmd.key2; ++it)
        entries.emplace_back(it->first, it->second);
      out.result = encode_scan_slice(entries);
      break;
    }
    case KvOp::Update: {
      auto it = data_.find(cmd.key);
      if (it == data_.end())
        out.status = kNotFound;
      else
        it->second = cmd.value;
      break;
    }
    case KvOp::Insert: {
      auto [it, inserted] = data_.emplace(cmd.key, cmd.value);
      if (!inserted) out.status = kAlreadyExists;
      break;
    }
    case KvOp::Delete:
      data_.erase(cmd.key);
      break;
  }
  return out;
}

uint64_t KvState::digest() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : data_) {
    h = fnv1a64(k.data(), k.size(), h);
    h = fnv1a64(v.data(), v.size(), h ^ 0x9e3779b97f4a7c15ULL);
  }
  return h;
}

void KvState::serialize(std::vector<uint8_t>& out) const {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(data_.size()));
  for (const auto& [k, v] : data_) {
    w.str(k);
    w.u32(static_cast<uint32_t>(v.size()));
    w.bytes(v);
  }
  auto bytes = w.take();
  out.insert(out.end(), bytes.begin(), bytes.end());
}

void KvState::deserialize(ByteReader& r) {
  data_.clear();
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    std::string k = r.str();
    data_[k] = r.bytes(r.u32());
  }
}

std::vector<uint8_t> encode_scan_slice(const KvEntries& entries) {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(entries.size()));
  for (const auto& [k, v] : entries) {
    w.str(k);
    w.u32(static_cast<uint32_t>(v.size()));
    w.bytes(v);
  }
  return w.take();
}

KvEntries decode_scan_slice(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  KvEntries out;
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    std::string k = r.str();
    out.emplace_back(std::move(k), r.bytes(r.u32()));
  }
  r.expect_end();
  return out;
}

KvService::KvService(const ClusterConfig& cfg, ProcessId self) : pm_(PartitionMap::from_config(cfg)) {
  const auto& info = cfg.process(self);
  std::set<const Partition*> involved;
  const Partition* mine = nullptr;
  for (GroupId g : pm_.partition_groups()) {
    for (const auto& part : cfg.partitions) {
      if (part.groups.count(g)) {
        involved.insert(&part);
        if (part.replicas.count(self)) mine = &part;
      }
    }
    if (info.subscriptions.count(g)) my_groups_.insert(g);
  }
  partitions_total_ = static_cast<uint32_t>(involved.size());
  if (mine && !my_groups_.empty()) slice_tag_ = *my_groups_.begin();
}

ApplyResult KvService::apply(const CommandRecord& rec) {
  ApplyResult out;
  KvCommand cmd = KvCommand::decode(rec.body);
  bool is_scan_broadcast = cmd.op == KvOp::Scan && pm_.route(cmd) == pm_.global_group();
  if (is_scan_broadcast) {
    if (my_groups_.empty()) return out;  // not a kv replica
  } else {
    // single-partition command: only the owning partition executes
    GroupId owner = pm_.route(cmd);
    if (!my_groups_.count(owner)) return out;
  }

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
      auto o = state_.execute(cmd);
      dedup_.record(rec.client_id, rec.seq, o.status, o.result);
      out.reply = true;
      out.fresh = true;
      out.status = o.status;
      out.result = std::move(o.result);
      break;
    }
  }
  if (is_scan_broadcast) {
    out.partial = true;
    out.slice_tag = slice_tag_;
    out.slices_expected = partitions_total_;
  }
  return out;
}

std::vector<uint8_t> KvService::serialize() const {
  std::vector<uint8_t> out;
  state_.serialize(out);
  dedup_.serialize(out);
  return out;
}

void KvService::deserialize(std::span<const uint8_t> blob) {
  ByteReader r(blob);
  state_.deserialize(r);
  dedup_.deserialize(r);
  r.expect_end();
}

uint64_t KvService::state_digest() const { return state_.digest() ^ dedup_.digest(); }

std::vector<uint8_t> KvService::combine_slices(
    const std::map<uint32_t, std::vector<uint8_t>>& slices) const {
  KvEntries all;
  for (const auto& [tag, bytes] : slices) {
    auto part = decode_scan_slice(bytes);
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return encode_scan_slice(all);
}

// ---- sequential consistency oracle ----

namespace {

struct SearchCtx {
  const std::vector<KvHistoryOp>* history;
  std::vector<std::vector<size_t>> per_client;  // program order per client
  uint64_t budget;
  uint64_t expanded = 0;
  std::unordered_set<uint64_t> visited;
  std::vector<size_t> path;
  bool out_of_budget = false;
};

bool outcome_matches(const KvHistoryOp& op, const KvState::Outcome& got) {
  if (op.status != got.status) return false;
  if (op.cmd.op == KvOp::Read && op.status == kOk && op.result != got.result) return false;
  if (op.cmd.op == KvOp::Scan && op.result != got.result) return false;
  return true;
}

bool dfs(SearchCtx& ctx, std::vector<size_t>& frontier, KvState& state) {
  if (++ctx.expanded > ctx.budget) {
    ctx.out_of_budget = true;
    return false;
  }
  bool done = true;
  uint64_t key = state.digest();
  for (size_t c = 0; c < frontier.size(); ++c) {
    key = mix64(key ^ (frontier[c] + 0x100 * c));
    if (frontier[c] < ctx.per_client[c].size()) done = false;
  }
  if (done) return true;
  if (!ctx.visited.insert(key).second) return false;

  for (size_t c = 0; c < frontier.size(); ++c) {
    if (frontier[c] >= ctx.per_client[c].size()) continue;
    size_t idx = ctx.per_client[c][frontier[c]];
    const KvHistoryOp& op = (*ctx.history)[idx];
    KvState next = state;  // states are small in oracle-scale histories
    auto got = next.execute(op.cmd);
    if (!outcome_matches(op, got)) continue;
    frontier[c]++;
    ctx.path.push_back(idx);
    if (dfs(ctx, frontier, next)) return true;
    ctx.path.pop_back();
    frontier[c]--;
    if (ctx.out_of_budget) return false;
  }
  return false;
}

}  // namespace

ScVerdict check_sequential_consistency(const std::vector<KvHistoryOp>& history, uint64_t budget) {
  SearchCtx ctx;
  ctx.history = &history;
  ctx.budget = budget;
  std::map<uint64_t, size_t> client_idx;
  for (size_t i = 0; i < history.size(); ++i) {
    auto [it, fresh] = client_idx.emplace(history[i].client, ctx.per_client.size());
    if (fresh) ctx.per_client.emplace_back();
    ctx.per_client[it->second].push_back(i);
  }
  std::vector<size_t> frontier(ctx.per_client.size(), 0);
  KvState state;
  ScVerdict v;
  if (dfs(ctx, frontier, state)) {
    v.consistent = true;
    v.witness = ctx.path;
  } else if (ctx.out_of_budget) {
    v.conclusive = false;
    v.violation = "search budget exceeded";
  } else {
    v.violation = "no serialization respects program order and store semantics";
  }
  return v;
}

}  // namespace mrp
