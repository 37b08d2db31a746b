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
#include <set>
#include <vector>

#include "mrp/config.hpp"
#include "mrp/service.hpp"
#include "mrp/storage.hpp"
#include "mrp/types.hpp"

namespace mrp {

enum class DlogOp : uint8_t { Append = 0, MultiAppend = 1, Read = 2, Trim = 3 };

struct DlogCommand {
  DlogOp op = DlogOp::Append;
  std::vector<uint32_t> logs;  // one entry except for multi-append
  uint64_t position = 0;       // read/trim
  std::vector<uint8_t> value;  // append/multi-append

  std::vector<uint8_t> encode() const;
  static DlogCommand decode(std::span<const uint8_t> body);
};

// One replicated shared log: recent entries in a bounded in-memory cache,
// everything durable in per-(log, segment) files.  Segment file format:
//   header {log_id(4) || base_position(8)} then length-prefixed entries,
// entry i holding position base+i.
class LogState {
 public:
  LogState(uint32_t id, StorageEnv* env, size_t cache_limit, bool sync);

  uint64_t append(std::vector<uint8_t> value);
  // status kOk / kTrimmed / kNotYetWritten
  uint8_t read(uint64_t position, std::vector<uint8_t>& out) const;
  void trim(uint64_t position);  // caller validates position <= next

  uint64_t next_position() const { return next_; }
  uint64_t trim_position() const { return trim_; }

  void serialize(class ByteWriter& w) const;
  void deserialize(class ByteReader& r);  // rewrites segments
  void purge();                           // drop all state and segment files
  uint64_t digest() const;

 private:
  struct Segment {
    uint64_t base = 0;
    std::unique_ptr<StableMedium> medium;
  };

  std::string segment_name(uint64_t base) const;
  void open_segment(uint64_t base);
  uint8_t read_from_disk(uint64_t position, std::vector<uint8_t>& out) const;
  void evict();

  uint32_t id_;
  StorageEnv* env_;
  size_t cache_limit_;
  bool sync_;
  uint64_t next_ = 0;
  uint64_t trim_ = 0;
  std::map<uint64_t, std::vector<uint8_t>> cache_;  // position -> value
  size_t cache_bytes_ = 0;
  std::vector<Segment> segments_;  // ascending base
  bool new_segment_ = false;       // next append starts a fresh segment
};

class DlogService : public Service {
 public:
  DlogService(const ClusterConfig& cfg, ProcessId self, StorageEnv* env = nullptr);

  ApplyResult apply(const CommandRecord& rec) override;
  std::vector<uint8_t> serialize() const override;
  void deserialize(std::span<const uint8_t> blob) override;
  uint64_t state_digest() const override;
  // merges per-partition multi-append slices into one log-ordered list
  std::vector<uint8_t> combine_slices(
      const std::map<uint32_t, std::vector<uint8_t>>& slices) const override;

  const LogState* log(uint32_t id) const;

 private:
  LogState& hosted(uint32_t id);
  uint32_t slices_expected_for(const std::vector<uint32_t>& logs) const;

  const ClusterConfig* cfg_;
  ProcessId self_;
  StorageEnv* env_;
  MemStorageEnv fallback_env_;
  std::set<uint32_t> my_logs_;
  uint32_t slice_tag_ = 0;
  std::map<uint32_t, std::unique_ptr<LogState>> logs_;
  DedupTable dedup_;
};

GroupId route_dlog_command(std::span<const uint8_t> body, const ClusterConfig& cfg);

}  // namespace mrp
