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
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mrp/types.hpp"

namespace mrp {

// Wire layout of a frame (all integers big-endian):
//   length(4) || msg_type(1) || group(2) || origin(2) || payload
// where length covers everything after itself.
enum class MsgType : uint8_t {
  Propose = 0x00,
  Phase1A = 0x01,
  Phase1B = 0x02,
  Phase2 = 0x03,
  Decision = 0x04,
  TrimQuery = 0x05,
  TrimReply = 0x06,
  Trim = 0x07,
  CkptQuery = 0x08,
  CkptReply = 0x09,
  CkptFetch = 0x0A,
  CkptChunk = 0x0B,
  Retransmit = 0x0C,
  ClientRequest = 0x0D,
  ClientReply = 0x0E,
};

const char* msg_type_name(MsgType t);

struct Envelope {
  MsgType msg_type = MsgType::Propose;
  GroupId group = 0;
  ProcessId origin = 0;
  std::vector<uint8_t> payload;

  bool operator==(const Envelope&) const = default;
};

constexpr size_t kEnvelopeHeader = 5;  // msg_type + group + origin
constexpr size_t kNoPayloadLimit = SIZE_MAX;

// Serializes an envelope into a self-delimiting frame (length prefix
// included).  Throws CodecError if the payload exceeds `payload_limit`.
std::vector<uint8_t> encode(const Envelope& e, size_t payload_limit = kNoPayloadLimit);

// Decodes a frame body (everything after the length prefix).
Envelope decode_body(std::span<const uint8_t> body);

// Decodes a complete frame including the length prefix; rejects a declared
// length that mismatches the body size.
Envelope decode_frame(std::span<const uint8_t> frame);

// Incremental frame reassembly for stream transports.
class FrameReader {
 public:
  explicit FrameReader(size_t max_frame = 1 << 26) : max_frame_(max_frame) {}
  void feed(const uint8_t* data, size_t len);
  std::optional<Envelope> next();  // throws CodecError on malformed input

 private:
  std::vector<uint8_t> buf_;
  size_t pos_ = 0;
  size_t max_frame_;
};

// ---- payload codecs ----

class ByteWriter {
 public:
  void u8(uint8_t v) { out_.push_back(v); }
  void u16(uint16_t v);
  void u32(uint32_t v);
  void u64(uint64_t v);
  void bytes(std::span<const uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void str(const std::string& s);  // u32 length prefix
  std::vector<uint8_t> take() { return std::move(out_); }

 private:
  std::vector<uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> in) : in_(in) {}
  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  std::vector<uint8_t> rest();
  std::vector<uint8_t> bytes(size_t n);
  std::string str();
  void skip(size_t n);
  size_t remaining() const { return in_.size() - pos_; }
  void expect_end() const;

 private:
  std::span<const uint8_t> in_;
  size_t pos_ = 0;
};

void write_value(ByteWriter& w, const ProposedValue& v);
ProposedValue read_value(ByteReader& r);
uint64_t value_digest(const ProposedValue& v);

struct ProposePayload {
  uint64_t proposer_seq = 0;
  ProposedValue value;
};

struct Phase1APayload {
  Ballot ballot;
  InstanceId begin = 0;
  InstanceId end = 0;
  uint16_t promises = 0;
};

struct Phase1BPayload {
  Ballot ballot;       // highest ballot promised by the acceptor
  InstanceId begin = 0;  // acceptor's trim point
  InstanceId end = 0;    // acceptor's promised window end
  struct Vote {
    InstanceId instance = 0;
    Ballot ballot;
    bool decided = false;
    ProposedValue value;
  };
  std::vector<Vote> votes;  // retained votes, for coordinator recovery
};

struct Phase2Payload {
  InstanceId instance = 0;
  Ballot ballot;
  uint64_t value_id = 0;
  uint16_t votes = 0;
  ProposedValue value;
};

struct DecisionPayload {
  InstanceId instance = 0;
  uint64_t value_id = 0;
  ProposedValue value;
};

struct TrimQueryPayload {
  uint32_t round = 0;
};

struct TrimReplyPayload {
  uint32_t round = 0;
  InstanceId safe_instance = 0;  // instances consumed and checkpointed
};

struct TrimPayload {
  InstanceId trim_point = 0;  // instances < trim_point may be deleted
};

using CheckpointTuple = std::map<GroupId, InstanceId>;

struct CkptQueryPayload {
  uint32_t nonce = 0;
};

struct CkptReplyPayload {
  uint32_t nonce = 0;
  bool has_checkpoint = false;
  CheckpointTuple tuple;
};

struct CkptFetchPayload {
  CheckpointTuple tuple;
};

struct CkptChunkPayload {
  CheckpointTuple tuple;
  uint64_t offset = 0;
  uint64_t total = 0;
  uint64_t digest = 0;  // over the whole blob
  std::vector<uint8_t> data;
};

struct RetransmitPayload {
  enum Kind : uint8_t { Request = 0, TrimmedError = 1 };
  uint8_t kind = Request;
  InstanceId begin = 0;
  InstanceId end = 0;  // 0 = everything decided from begin on
  InstanceId trim_point = 0;
};

struct ClientRequestPayload {
  uint64_t client_id = 0;
  uint64_t seq = 0;
  uint8_t service = 0;  // ServiceKind
  std::vector<uint8_t> command;
};

struct ClientReplyPayload {
  uint64_t client_id = 0;
  uint64_t seq = 0;
  uint8_t status = 0;
  std::vector<uint8_t> result;
};

std::vector<uint8_t> encode_payload(const ProposePayload&);
std::vector<uint8_t> encode_payload(const Phase1APayload&);
std::vector<uint8_t> encode_payload(const Phase1BPayload&);
std::vector<uint8_t> encode_payload(const Phase2Payload&);
std::vector<uint8_t> encode_payload(const DecisionPayload&);
std::vector<uint8_t> encode_payload(const TrimQueryPayload&);
std::vector<uint8_t> encode_payload(const TrimReplyPayload&);
std::vector<uint8_t> encode_payload(const TrimPayload&);
std::vector<uint8_t> encode_payload(const CkptQueryPayload&);
std::vector<uint8_t> encode_payload(const CkptReplyPayload&);
std::vector<uint8_t> encode_payload(const CkptFetchPayload&);
std::vector<uint8_t> encode_payload(const CkptChunkPayload&);
std::vector<uint8_t> encode_payload(const RetransmitPayload&);
std::vector<uint8_t> encode_payload(const ClientRequestPayload&);
std::vector<uint8_t> encode_payload(const ClientReplyPayload&);

ProposePayload decode_propose(std::span<const uint8_t>);
Phase1APayload decode_phase1a(std::span<const uint8_t>);
Phase1BPayload decode_phase1b(std::span<const uint8_t>);
Phase2Payload decode_phase2(std::span<const uint8_t>);
DecisionPayload decode_decision(std::span<const uint8_t>);
TrimQueryPayload decode_trim_query(std::span<const uint8_t>);
TrimReplyPayload decode_trim_reply(std::span<const uint8_t>);
TrimPayload decode_trim(std::span<const uint8_t>);
CkptQueryPayload decode_ckpt_query(std::span<const uint8_t>);
CkptReplyPayload decode_ckpt_reply(std::span<const uint8_t>);
CkptFetchPayload decode_ckpt_fetch(std::span<const uint8_t>);
CkptChunkPayload decode_ckpt_chunk(std::span<const uint8_t>);
RetransmitPayload decode_retransmit(std::span<const uint8_t>);
ClientRequestPayload decode_client_request(std::span<const uint8_t>);
ClientReplyPayload decode_client_reply(std::span<const uint8_t>);

void write_tuple(ByteWriter& w, const CheckpointTuple& t);
CheckpointTuple read_tuple(ByteReader& r);

template <typename Payload>
Envelope make_envelope(MsgType t, GroupId g, ProcessId origin, const Payload& p) {
  return Envelope{t, g, origin, encode_payload(p)};
}

}  // namespace mrp
