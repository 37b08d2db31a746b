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

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrp {

using ProcessId = uint16_t;
using GroupId = uint16_t;

// Instances are numbered densely from 0 per ring.  An InstanceId of value n
// also doubles as "n instances consumed" in checkpoint tuples.
using InstanceId = uint64_t;

// Sentinel origin for external clients (real client ids are 64-bit and live
// in the payload).
constexpr ProcessId kClientOrigin = 0xFFFF;

enum class Role : uint8_t {
  Proposer = 1,
  Acceptor = 2,
  Learner = 4,
};

struct Ballot {
  uint32_t round = 0;
  ProcessId proposer = 0;

  auto operator<=>(const Ballot&) const = default;
};

enum class ValueKind : uint8_t { App = 0, Skip = 1 };

// One proposed value: either a batch of application commands or a skip
// covering `skip_count` consecutive instances (the skip's own instance is
// the first of them).
struct ProposedValue {
  ValueKind kind = ValueKind::App;
  std::vector<uint8_t> payload;  // App only
  uint32_t skip_count = 0;       // Skip only

  InstanceId span() const { return kind == ValueKind::Skip ? skip_count : 1; }

  bool operator==(const ProposedValue&) const = default;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class CodecError : public std::runtime_error {
 public:
  explicit CodecError(const std::string& what) : std::runtime_error(what) {}
};

class ProtocolError : public std::runtime_error {
 public:
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

class StorageError : public std::runtime_error {
 public:
  explicit StorageError(const std::string& what) : std::runtime_error(what) {}
};

class TimeoutError : public std::runtime_error {
 public:
  explicit TimeoutError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mrp
