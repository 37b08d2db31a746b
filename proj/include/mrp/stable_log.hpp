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

#include "mrp/storage.hpp"
#include "mrp/types.hpp"

namespace mrp {

// Acceptor stable log.  File format: length-prefixed records of
//   {tag(1) || instance(8 BE) || ballot(8 BE: round(4) proposer(2) pad(2)) || value bytes}
// A torn final record is discarded on recovery.
class StableLog {
 public:
  enum Tag : uint8_t { kPromise = 1, kVote = 2, kDecide = 3, kTrim = 4 };

  struct VoteEntry {
    Ballot ballot;
    ProposedValue value;
    bool decided = false;
  };

  StableLog(std::unique_ptr<StableMedium> medium, bool sync);

  // Durable before returning (in sync mode).
  void promise(Ballot b, InstanceId begin, InstanceId end);
  void vote(InstanceId i, Ballot b, const ProposedValue& v);
  void mark_decided(InstanceId i);
  // Removes everything below `point` (exclusive upper bound on deleted
  // instances) and compacts the file.
  void trim(InstanceId point);

  Ballot promised() const { return promised_; }
  InstanceId promised_end() const { return promised_end_; }
  InstanceId trim_point() const { return trim_point_; }
  const std::map<InstanceId, VoteEntry>& votes() const { return votes_; }
  const VoteEntry* vote_at(InstanceId i) const;
  size_t slots_used() const { return votes_.size(); }

 private:
  void append_record(Tag tag, InstanceId instance, Ballot ballot, std::span<const uint8_t> value);
  void load();
  void compact();

  std::unique_ptr<StableMedium> medium_;
  bool sync_;
  Ballot promised_{};
  InstanceId promised_end_ = 0;
  InstanceId trim_point_ = 0;
  std::map<InstanceId, VoteEntry> votes_;
  size_t file_bytes_ = 0;
  size_t live_bytes_ = 0;
};

}  // namespace mrp
