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
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mrp/config.hpp"
#include "mrp/types.hpp"

namespace mrp {

enum class ServiceKind : uint8_t { Dummy = 0, Kv = 1, Dlog = 2, Admin = 3 };

enum ReplyStatus : uint8_t {
  kOk = 0,
  kNotFound = 1,
  kAlreadyExists = 2,
  kTrimmed = 3,
  kNotYetWritten = 4,
  kBadRequest = 5,
  kAck = 6,
  // node-to-node only: result wraps {slice_tag, slices_expected, status, slice}
  kPartial = 7,
};

// One client command as it travels inside an App batch:
//   u32 record_len || service(1) || client_id(8) || seq(8) || origin_node(2) || body
struct CommandRecord {
  ServiceKind service = ServiceKind::Dummy;
  uint64_t client_id = 0;
  uint64_t seq = 0;
  ProcessId origin_node = 0;
  std::vector<uint8_t> body;

  std::vector<uint8_t> encode() const;
};

// Splits an App batch payload into command records.
std::vector<CommandRecord> unpack_batch(std::span<const uint8_t> payload);

struct ApplyResult {
  bool reply = false;
  bool fresh = false;  // first application; replays and stale retries are not
  uint8_t status = kOk;
  std::vector<uint8_t> result;
  // Multi-partition commands produce one slice per partition; the origin
  // node collects `slices_expected` distinct tags before answering.
  bool partial = false;
  uint32_t slice_tag = 0;
  uint32_t slices_expected = 0;
};

// Deterministic replicated state machine executed over merged deliveries.
class Service {
 public:
  virtual ~Service() = default;
  virtual ApplyResult apply(const CommandRecord& rec) = 0;
  virtual std::vector<uint8_t> serialize() const = 0;
  virtual void deserialize(std::span<const uint8_t> blob) = 0;
  virtual uint64_t state_digest() const = 0;
  // Merges collected partial slices into the final client reply.
  virtual std::vector<uint8_t> combine_slices(const std::map<uint32_t, std::vector<uint8_t>>& slices) const;
};

// Exactly-once bookkeeping shared by the services: remembers the highest
// seq and last reply per client, survives checkpoints.
class DedupTable {
 public:
  enum class Outcome {
    Fresh,   // apply it
    Replay,  // same seq as last applied: resend the cached reply
    Stale,   // older than last applied: ignore
  };

  Outcome classify(uint64_t client, uint64_t seq) const;
  std::pair<uint8_t, const std::vector<uint8_t>*> cached(uint64_t client) const;
  void record(uint64_t client, uint64_t seq, uint8_t status, std::vector<uint8_t> reply);
  void serialize(std::vector<uint8_t>& out) const;
  void deserialize(class ByteReader& r);
  uint64_t digest() const;

 private:
  struct Entry {
    uint64_t seq = 0;
    uint8_t status = 0;
    std::vector<uint8_t> reply;
  };
  std::map<uint64_t, Entry> entries_;
};

// Deliver-and-discard service for the pure multicast path; body is
// target_group(2) || opaque filler.
class DummyService : public Service {
 public:
  ApplyResult apply(const CommandRecord& rec) override;
  std::vector<uint8_t> serialize() const override;
  void deserialize(std::span<const uint8_t> blob) override;
  uint64_t state_digest() const override;

 private:
  uint64_t applied_ = 0;
  uint64_t rolling_ = 0;  // order-sensitive digest of applied commands
  DedupTable dedup_;
};

// The target group of a command, resolved before multicast.
GroupId route_command(ServiceKind service, std::span<const uint8_t> body, const ClusterConfig& cfg);

// `env` backs services that keep bulk data on disk; nullptr keeps it in memory.
std::unique_ptr<Service> make_service(ServiceKind kind, const ClusterConfig& cfg, ProcessId self,
                                      class StorageEnv* env = nullptr);

}  // namespace mrp
