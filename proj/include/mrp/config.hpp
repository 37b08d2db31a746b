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

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mrp/types.hpp"

namespace mrp {

struct RingConfig {
  GroupId group = 0;
  std::vector<ProcessId> members;    // ring successor order, a cycle
  std::vector<ProcessId> acceptors;  // subset of members, in ring order
  ProcessId coordinator = 0;
  size_t quorum_size = 0;  // floor(|acceptors|/2)+1, derived

  bool is_member(ProcessId p) const;
  bool is_acceptor(ProcessId p) const;
  ProcessId successor(ProcessId p) const;
  // Ring-order distance from `from` to `to`, in hops (0 for from==to).
  size_t distance(ProcessId from, ProcessId to) const;
  // The acceptor whose ring-order distance from the coordinator is greatest.
  ProcessId last_acceptor() const;
};

struct ProcessInfo {
  ProcessId id = 0;
  std::string address;  // host:port, may be empty for sim-only configs
  uint8_t roles = 0;    // bitmask of Role
  std::set<GroupId> subscriptions;

  bool has_role(Role r) const { return roles & static_cast<uint8_t>(r); }
};

struct Tuning {
  uint32_t merge_window = 1;           // M
  uint32_t delta_ms = 5;               // skip interval
  uint32_t lambda = 9000;              // instances per second
  uint32_t batch_limit = 32768;        // bytes
  uint32_t buffer_slots = 15000;       // acceptor value buffer
  uint32_t slot_size = 32768;          // bytes
  bool sync_log = true;                // log votes before forwarding
  bool rate_leveling = true;
  uint64_t checkpoint_interval = 10000;  // delivered instances per checkpoint
  uint64_t phase1_window = 65536;        // pre-executed phase-1 instances
  uint32_t trim_interval_ms = 1000;
  uint32_t retransmit_timeout_ms = 50;
};

struct Partition {
  std::set<GroupId> groups;
  std::set<ProcessId> replicas;
};

enum class PartitionMode : uint8_t { Hash = 0, Range = 1 };

struct KvStoreConfig {
  PartitionMode mode = PartitionMode::Hash;
  std::vector<GroupId> groups;      // one group per partition
  std::vector<std::string> splits;  // range mode: |groups|-1 sorted split keys
  GroupId global_group = 0;         // scans and cross-partition ordering
};

struct DlogConfig {
  std::map<uint32_t, GroupId> logs;  // log id -> owning group
  GroupId global_group = 0;          // multi-append ordering
  uint64_t cache_limit = 200ull << 20;  // in-memory entry cache, bytes
  bool sync = false;                    // fsync segment appends
};

struct ClusterConfig {
  std::vector<RingConfig> rings;  // ascending GroupId
  std::map<ProcessId, ProcessInfo> processes;
  Tuning tuning;
  std::optional<KvStoreConfig> kvstore;
  std::optional<DlogConfig> dlog;
  std::vector<Partition> partitions;  // derived, learners grouped by subscriptions
  uint64_t digest = 0;                // over the source text, exchanged on connect

  const RingConfig* ring(GroupId g) const;
  const RingConfig& ring_or_throw(GroupId g) const;
  const ProcessInfo& process(ProcessId p) const;
  // Budget of instances per rate-leveling interval.
  uint64_t interval_budget() const;
};

// Parses and validates a configuration document.  Throws ConfigError naming
// the violated invariant.
ClusterConfig load_config(const std::string& text);
ClusterConfig load_config_file(const std::string& path);

// The set of learners whose subscription set is identical to p's.
Partition partition_of(ProcessId p, const ClusterConfig& cfg);

}  // namespace mrp
