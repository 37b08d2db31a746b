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

#include <span>
#include <vector>

#include "mrp/envelope.hpp"
#include "mrp/types.hpp"

namespace mrp {

// A learner checkpoint: the application state blob plus, per subscribed
// group, the count of instances consumed from that group's sequence.
// File layout: magic(4) || version(2) || tuple || digest(8) || blob_len(4) || blob.
struct Checkpoint {
  CheckpointTuple tuple;
  uint64_t digest = 0;  // service state digest at the tuple
  std::vector<uint8_t> blob;

  std::vector<uint8_t> encode() const;
  static Checkpoint decode(std::span<const uint8_t> bytes);
};

// a <= b componentwise over the union of keys (missing entry reads as 0)
bool tuple_leq(const CheckpointTuple& a, const CheckpointTuple& b);

// Trim decision over a quorum of safe-instance replies for one ring: the
// slowest report wins so no reachable state is dropped.
InstanceId select_trim_point(const std::vector<InstanceId>& replies);

// Recovery target over a quorum of checkpoint tuples from the recoverer's
// own partition: the componentwise greatest reply.  Replies from one
// partition are totally ordered; an incomparable pair means divergence.
CheckpointTuple select_recovery_target(const std::vector<CheckpointTuple>& replies);

}  // namespace mrp
