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

#include "mrp/merge.hpp"

#include <algorithm>

namespace mrp {

MergeCursor::MergeCursor(std::vector<GroupId> groups, uint32_t m) : groups_(std::move(groups)), m_(m) {
  std::sort(groups_.begin(), groups_.end());
  groups_.erase(std::unique(groups_.begin(), groups_.end()), groups_.end());
  for (GroupId g : groups_) consumed_[g] = 0;
}

std::optional<MergeDelivery> MergeCursor::next(DecidedSource& src) {
  if (groups_.empty()) return std::nullopt;
  while (true) {
    GroupId g = groups_[cur_];
    InstanceId at = consumed_[g];
    auto rec = src.covering(g, at);
    if (!rec) return std::nullopt;  // blocked
    if (rec->value->kind == ValueKind::Skip) {
      // consume silently, capped so the turn stays at exactly M instances
      InstanceId avail = rec->base + rec->span - at;
      InstanceId take = std::min<InstanceId>(avail, m_ - consumed_in_turn_);
      consumed_[g] += take;
      consumed_in_turn_ += take;
    } else {
      consumed_[g] += 1;
      consumed_in_turn_ += 1;
      MergeDelivery d{g, at, rec->value};
      if (consumed_in_turn_ >= m_) {
        cur_ = (cur_ + 1) % groups_.size();
        consumed_in_turn_ = 0;
      }
      return d;
    }
    if (consumed_in_turn_ >= m_) {
      cur_ = (cur_ + 1) % groups_.size();
      consumed_in_turn_ = 0;
    }
  }
}

void MergeCursor::restore(const std::map<GroupId, InstanceId>& consumed) {
  InstanceId low = UINT64_MAX;
  for (GroupId g : groups_) {
    auto it = consumed.find(g);
    InstanceId k = it == consumed.end() ? 0 : it->second;
    if (k % m_ != 0) throw ProtocolError("checkpoint tuple not at a turn boundary");
    consumed_[g] = k;
    low = std::min(low, k / m_);
  }
  // turns completed per group are low or low+1, non-increasing in group
  // order; the current group is the first one still at `low`
  cur_ = 0;
  bool found = false;
  for (size_t i = 0; i < groups_.size(); ++i) {
    InstanceId turns = consumed_[groups_[i]] / m_;
    if (turns != low && turns != low + 1) throw ProtocolError("checkpoint tuple not round-robin consistent");
    if (i > 0 && turns > consumed_[groups_[i - 1]] / m_)
      throw ProtocolError("checkpoint tuple violates group-order monotonicity");
    if (!found && turns == low) {
      cur_ = i;
      found = true;
    }
  }
  consumed_in_turn_ = 0;
}

SkipPolicy::SkipPolicy(uint32_t delta_ms, uint32_t lambda)
    : budget_((static_cast<uint64_t>(lambda) * delta_ms + 999) / 1000) {}

uint64_t SkipPolicy::tick() {
  uint64_t deficit = budget_ > proposed_in_interval_ ? budget_ - proposed_in_interval_ : 0;
  proposed_in_interval_ = 0;
  return deficit;
}

}  // namespace mrp
