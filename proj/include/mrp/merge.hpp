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
#include <optional>
#include <vector>

#include "mrp/types.hpp"

namespace mrp {

// Access to a learner's per-ring decided streams.  A record covers one
// instance (App) or a consecutive range (Skip).
class DecidedSource {
 public:
  struct Rec {
    InstanceId base = 0;
    InstanceId span = 1;
    const ProposedValue* value = nullptr;
  };

  virtual ~DecidedSource() = default;
  // The decided record covering `instance` of group g, if any.
  virtual std::optional<Rec> covering(GroupId g, InstanceId instance) = 0;
};

struct MergeDelivery {
  GroupId group = 0;
  InstanceId instance = 0;
  const ProposedValue* value = nullptr;  // always an App value
};

// Round-robin deterministic merge over subscribed rings, M instances per
// turn, ascending group order.  Skip values consume instances without
// yielding deliveries; a turn always accounts for exactly M instances.
class MergeCursor {
 public:
  MergeCursor(std::vector<GroupId> groups, uint32_t m);

  // Next deliverable application value, or nullopt when the current group's
  // next instance is undecided (blocked) or there are no groups.
  std::optional<MergeDelivery> next(DecidedSource& src);

  bool at_turn_boundary() const { return consumed_in_turn_ == 0; }
  GroupId current_group() const { return groups_[cur_]; }
  const std::vector<GroupId>& groups() const { return groups_; }
  // Instances consumed per group; doubles as the checkpoint tuple.
  const std::map<GroupId, InstanceId>& consumed() const { return consumed_; }

  // Repositions the cursor at the turn boundary implied by a checkpoint
  // tuple.  Throws ProtocolError if the tuple cannot arise from round-robin
  // consumption with this M.
  void restore(const std::map<GroupId, InstanceId>& consumed);

 private:
  std::vector<GroupId> groups_;
  uint32_t m_;
  size_t cur_ = 0;
  uint64_t consumed_in_turn_ = 0;
  std::map<GroupId, InstanceId> consumed_;
};

// Coordinator-side rate leveling: tracks instances proposed per interval
// and computes the skip deficit at each tick.
class SkipPolicy {
 public:
  SkipPolicy(uint32_t delta_ms, uint32_t lambda);

  uint64_t interval_budget() const { return budget_; }
  void on_proposed(uint64_t instances) { proposed_in_interval_ += instances; }
  // Called every delta; returns the skip count to propose (0 = none) and
  // resets the interval counter.
  uint64_t tick();

 private:
  uint64_t budget_;
  uint64_t proposed_in_interval_ = 0;
};

}  // namespace mrp
