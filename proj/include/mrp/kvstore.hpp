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
#include <set>
#include <string>
#include <vector>

#include "mrp/config.hpp"
#include "mrp/service.hpp"
#include "mrp/types.hpp"

namespace mrp {

enum class KvOp : uint8_t { Read = 0, Scan = 1, Update = 2, Insert = 3, Delete = 4 };

struct KvCommand {
  KvOp op = KvOp::Read;
  std::string key;
  std::string key2;             // scan upper bound (inclusive)
  std::vector<uint8_t> value;   // update/insert

  std::vector<uint8_t> encode() const;
  static KvCommand decode(std::span<const uint8_t> body);
};

// Key-to-group routing shared by clients and replicas.
class PartitionMap {
 public:
  static PartitionMap from_config(const ClusterConfig& cfg);

  GroupId group_for_key(const std::string& key) const;
  // Owning group for a single-key op; scans go to the global group unless,
  // under range partitioning, the interval fits one partition.
  GroupId route(const KvCommand& cmd) const;
  GroupId global_group() const { return cfg_.global_group; }
  const std::vector<GroupId>& partition_groups() const { return cfg_.groups; }

 private:
  KvStoreConfig cfg_;
};

using KvEntries = std::vector<std::pair<std::string, std::vector<uint8_t>>>;

// In-memory ordered map, a deterministic function of the applied sequence.
class KvState {
 public:
  struct Outcome {
    uint8_t status = kOk;
    std::vector<uint8_t> result;
  };

  Outcome execute(const KvCommand& cmd);
  size_t size() const { return data_.size(); }
  uint64_t digest() const;
  void serialize(std::vector<uint8_t>& out) const;
  void deserialize(class ByteReader& r);

 private:
  std::map<std::string, std::vector<uint8_t>> data_;
};

KvEntries decode_scan_slice(std::span<const uint8_t> bytes);
std::vector<uint8_t> encode_scan_slice(const KvEntries& entries);

class KvService : public Service {
 public:
  KvService(const ClusterConfig& cfg, ProcessId self);

  ApplyResult apply(const CommandRecord& rec) override;
  std::vector<uint8_t> serialize() const override;
  void deserialize(std::span<const uint8_t> blob) override;
  uint64_t state_digest() const override;
  // merges per-partition scan slices into one key-ordered scan result
  std::vector<uint8_t> combine_slices(
      const std::map<uint32_t, std::vector<uint8_t>>& slices) const override;

 private:
  PartitionMap pm_;
  std::set<GroupId> my_groups_;  // kv partition groups this replica hosts
  uint32_t slice_tag_ = 0;
  uint32_t partitions_total_ = 0;
  KvState state_;
  DedupTable dedup_;
};

GroupId route_kv_command(std::span<const uint8_t> body, const ClusterConfig& cfg);

// ---- sequential consistency oracle ----

struct KvHistoryOp {
  uint64_t client = 0;
  KvCommand cmd;
  uint8_t status = kOk;
  std::vector<uint8_t> result;  // read value or merged scan entries
};

struct ScVerdict {
  bool consistent = false;
  bool conclusive = true;            // false: search budget exceeded
  std::vector<size_t> witness;       // indices into the history, a legal serialization
  std::string violation;
};

// Exhaustive search for a serialization respecting per-client program order
// and the sequential store semantics.  Intended for small histories.
ScVerdict check_sequential_consistency(const std::vector<KvHistoryOp>& history,
                                       uint64_t budget = 2'000'000);

}  // namespace mrp
