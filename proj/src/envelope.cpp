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

#include "mrp/envelope.hpp"

#include <cstring>

#include "mrp/hash.hpp"

namespace mrp {

const char* msg_type_name(MsgType t) {
  switch (t) {
    case MsgType::Propose: return "propose";
    case MsgType::Phase1A: return "phase1a";
    case MsgType::Phase1B: return "phase1b";
    case MsgType::Phase2: return "phase2";
    case MsgType::Decision: return "decision";
    case MsgType::TrimQuery: return "trim_query";
    case MsgType::TrimReply: return "trim_reply";
    case MsgType::Trim: return "trim";
    case MsgType::CkptQuery: return "ckpt_query";
    case MsgType::CkptReply: return "ckpt_reply";
    case MsgType::CkptFetch: return "ckpt_fetch";
    case MsgType::CkptChunk: return "ckpt_chunk";
    case MsgType::Retransmit: return "retransmit";
    case MsgType::ClientRequest: return "client_request";
    case MsgType::ClientReply: return "client_reply";
  }
  return "unknown";
}

void ByteWriter::u16(uint16_t v) {
  out_.push_back(static_cast<uint8_t>(v >> 8));
  out_.push_back(static_cast<uint8_t>(v));
}

void ByteWriter::u32(uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out_.push_back(static_cast<uint8_t>(v >> s));
}

void ByteWriter::u64(uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out_.push_back(static_cast<uint8_t>(v >> s));
}

void ByteWriter::str(const std::string& s) {
  u32(static_cast<uint32_t>(s.size()));
  out_.insert(out_.end(), s.begin(), s.end());
}

uint8_t ByteReader::u8() {
  if (pos_ + 1 > in_.size()) throw CodecError("truncated payload");
  return in_[pos_++];
}

uint16_t ByteReader::u16() {
  uint16_t v = u8();
  return static_cast<uint16_t>((v << 8) | u8());
}

uint32_t ByteReader::u32() {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | u8();
  return v;
}

uint64_t ByteReader::u64() {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | u8();
  return v;
}

std::vector<uint8_t> ByteReader::rest() {
  std::vector<uint8_t> out(in_.begin() + pos_, in_.end());
  pos_ = in_.size();
  return out;
}

std::vector<uint8_t> ByteReader::bytes(size_t n) {
  if (pos_ + n > in_.size()) throw CodecError("truncated payload");
  std::vector<uint8_t> out(in_.begin() + pos_, in_.begin() + pos_ + n);
  pos_ += n;
  return out;
}

void ByteReader::skip(size_t n) {
  if (pos_ + n > in_.size()) throw CodecError("truncated payload");
  pos_ += n;
}

std::string ByteReader::str() {
  uint32_t n = u32();
  if (pos_ + n > in_.size()) throw CodecError("truncated string");
  std::string out(in_.begin() + pos_, in_.begin() + pos_ + n);
  pos_ += n;
  return out;
}

void ByteReader::expect_end() const {
  if (pos_ != in_.size()) throw CodecError("trailing bytes in payload");
}

std::vector<uint8_t> encode(const Envelope& e, size_t payload_limit) {
  if (e.payload.size() > payload_limit) throw CodecError("oversize payload");
  size_t body = kEnvelopeHeader + e.payload.size();
  std::vector<uint8_t> out;
  out.reserve(4 + body);
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<uint8_t>(body >> s));
  out.push_back(static_cast<uint8_t>(e.msg_type));
  out.push_back(static_cast<uint8_t>(e.group >> 8));
  out.push_back(static_cast<uint8_t>(e.group));
  out.push_back(static_cast<uint8_t>(e.origin >> 8));
  out.push_back(static_cast<uint8_t>(e.origin));
  out.insert(out.end(), e.payload.begin(), e.payload.end());
  return out;
}

Envelope decode_body(std::span<const uint8_t> body) {
  if (body.size() < kEnvelopeHeader) throw CodecError("frame body shorter than header");
  uint8_t t = body[0];
  if (t > static_cast<uint8_t>(MsgType::ClientReply)) throw CodecError("unknown msg_type");
  Envelope e;
  e.msg_type = static_cast<MsgType>(t);
  e.group = static_cast<GroupId>((body[1] << 8) | body[2]);
  e.origin = static_cast<ProcessId>((body[3] << 8) | body[4]);
  e.payload.assign(body.begin() + kEnvelopeHeader, body.end());
  return e;
}

Envelope decode_frame(std::span<const uint8_t> frame) {
  if (frame.size() < 4) throw CodecError("frame shorter than length prefix");
  uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len = (len << 8) | frame[i];
  if (len != frame.size() - 4) throw CodecError("frame length mismatch");
  return decode_body(frame.subspan(4));
}

void FrameReader::feed(const uint8_t* data, size_t len) {
  // compact once consumed bytes dominate
  if (pos_ > 4096 && pos_ * 2 > buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<ptrdiff_t>(pos_));
    pos_ = 0;
  }
  buf_.insert(buf_.end(), data, data + len);
}

std::optional<Envelope> FrameReader::next() {
  if (buf_.size() - pos_ < 4) return std::nullopt;
  uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len = (len << 8) | buf_[pos_ + i];
  if (len < kEnvelopeHeader || len > max_frame_) throw CodecError("bad frame length");
  if (buf_.size() - pos_ < 4 + static_cast<size_t>(len)) return std::nullopt;
  Envelope e = decode_body(std::span<const uint8_t>(buf_.data() + pos_ + 4, len));
  pos_ += 4 + len;
  return e;
}

void write_value(ByteWriter& w, const ProposedValue& v) {
  w.u8(static_cast<uint8_t>(v.kind));
  if (v.kind == ValueKind::Skip) {
    w.u32(v.skip_count);
  } else {
    w.u32(static_cast<uint32_t>(v.payload.size()));
    w.bytes(v.payload);
  }
}

ProposedValue read_value(ByteReader& r) {
  ProposedValue v;
  uint8_t k = r.u8();
  if (k > 1) throw CodecError("unknown value kind");
  v.kind = static_cast<ValueKind>(k);
  if (v.kind == ValueKind::Skip) {
    v.skip_count = r.u32();
    if (v.skip_count < 1) throw CodecError("skip count must be >= 1");
  } else {
    v.payload = r.bytes(r.u32());
  }
  return v;
}

uint64_t value_digest(const ProposedValue& v) {
  ByteWriter w;
  write_value(w, v);
  auto bytes = w.take();
  return fnv1a64(bytes.data(), bytes.size());
}

namespace {

void write_ballot(ByteWriter& w, const Ballot& b) {
  w.u32(b.round);
  w.u16(b.proposer);
}

Ballot read_ballot(ByteReader& r) {
  Ballot b;
  b.round = r.u32();
  b.proposer = r.u16();
  return b;
}

}  // namespace

void write_tuple(ByteWriter& w, const CheckpointTuple& t) {
  w.u16(static_cast<uint16_t>(t.size()));
  for (const auto& [g, k] : t) {
    w.u16(g);
    w.u64(k);
  }
}

CheckpointTuple read_tuple(ByteReader& r) {
  CheckpointTuple t;
  uint16_t n = r.u16();
  for (uint16_t i = 0; i < n; ++i) {
    GroupId g = r.u16();
    t[g] = r.u64();
  }
  return t;
}

std::vector<uint8_t> encode_payload(const ProposePayload& p) {
  ByteWriter w;
  w.u64(p.proposer_seq);
  write_value(w, p.value);
  return w.take();
}

ProposePayload decode_propose(std::span<const uint8_t> in) {
  ByteReader r(in);
  ProposePayload p;
  p.proposer_seq = r.u64();
  p.value = read_value(r);
  r.expect_end();
  return p;
}

std::vector<uint8_t> encode_payload(const Phase1APayload& p) {
  ByteWriter w;
  write_ballot(w, p.ballot);
  w.u64(p.begin);
  w.u64(p.end);
  w.u16(p.promises);
  return w.take();
}

Phase1APayload decode_phase1a(std::span<const uint8_t> in) {
  ByteReader r(in);
  Phase1APayload p;
  p.ballot = read_ballot(r);
  p.begin = r.u64();
  p.end = r.u64();
  p.promises = r.u16();
  r.expect_end();
  return p;
}

std::vector<uint8_t> encode_payload(const Phase1BPayload& p) {
  ByteWriter w;
  write_ballot(w, p.ballot);
  w.u64(p.begin);
  w.u64(p.end);
  w.u32(static_cast<uint32_t>(p.votes.size()));
  for (const auto& v : p.votes) {
    w.u64(v.instance);
    write_ballot(w, v.ballot);
    w.u8(v.decided ? 1 : 0);
    write_value(w, v.value);
  }
  return w.take();
}

Phase1BPayload decode_phase1b(std::span<const uint8_t> in) {
  ByteReader r(in);
  Phase1BPayload p;
  p.ballot = read_ballot(r);
  p.begin = r.u64();
  p.end = r.u64();
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    Phase1BPayload::Vote v;
    v.instance = r.u64();
    v.ballot = read_ballot(r);
    v.decided = r.u8() != 0;
    v.value = read_value(r);
    p.votes.push_back(std::move(v));
  }
  r.expect_end();
  return p;
}

std::vector<uint8_t> encode_payload(const Phase2Payload& p) {
  ByteWriter w;
  w.u64(p.instance);
  write_ballot(w, p.ballot);
  w.u64(p.value_id);
  w.u16(p.votes);
  write_value(w, p.value);
  return w.take();
}

Phase2Payload decode_phase2(std::span<const uint8_t> in) {
  ByteReader r(in);
  Phase2Payload p;
  p.instance = r.u64();
  p.ballot = read_ballot(r);
  p.value_id = r.u64();
  p.votes = r.u16();
  p.value = read_value(r);
  r.expect_end();
  return p;
}

std::vector<uint8_t> encode_payload(const DecisionPayload& p) {
  ByteWriter w;
  w.u64(p.instance);
  w.u64(p.value_id);
  write_value(w, p.value);
  return w.take();
}

DecisionPayload decode_decision(std::span<const uint8_t> in) {
  ByteReader r(in);
  DecisionPayload p;
  p.instance = r.u64();
  p.value_id = r.u64();
  p.value = read_value(r);
  r.expect_end();
  return p;
}

std::vector<uint8_t> encode_payload(const TrimQueryPayload& p) {
  ByteWriter w;
  w.u32(p.round);
  return w.take();
}

TrimQueryPayload decode_trim_query(std::span<const uint8_t> in) {
  ByteReader r(in);
  TrimQueryPayload p;
  p.round = r.u32();
  r.expect_end();
  return p;
}

std::vector<uint8_t> encode_payload(const TrimReplyPayload& p) {
  ByteWriter w;
  w.u32(p.round);
  w.u64(p.safe_instance);
  return w.take();
}

TrimReplyPayload decode_trim_reply(std::span<const uint8_t> in) {
  ByteReader r(in);
  TrimReplyPayload p;
  p.round = r.u32();
  p.safe_instance = r.u64();
  r.expect_end();
  return p;
}

std::vector<uint8_t> encode_payload(const TrimPayload& p) {
  ByteWriter w;
  w.u64(p.trim_point);
  return w.take();
}

TrimPayload decode_trim(std::span<const uint8_t> in) {
  ByteReader r(in);
  TrimPayload p;
  p.trim_point = r.u64();
  r.expect_end();
  return p;
}

std::vector<uint8_t> encode_payload(const CkptQueryPayload& p) {
  ByteWriter w;
  w.u32(p.nonce);
  return w.take();
}

CkptQueryPayload decode_ckpt_query(std::span<const uint8_t> in) {
  ByteReader r(in);
  CkptQueryPayload p;
  p.nonce = r.u32();
  r.expect_end();
  return p;
}

std::vector<uint8_t> encode_payload(const CkptReplyPayload& p) {
  ByteWriter w;
  w.u32(p.nonce);
  w.u8(p.has_checkpoint ? 1 : 0);
  write_tuple(w, p.tuple);
  return w.take();
}

CkptReplyPayload decode_ckpt_reply(std::span<const uint8_t> in) {
  ByteReader r(in);
  CkptReplyPayload p;
  p.nonce = r.u32();
  p.has_checkpoint = r.u8() != 0;
  p.tuple = read_tuple(r);
  r.expect_end();
  return p;
}

std::vector<uint8_t> encode_payload(const CkptFetchPayload& p) {
  ByteWriter w;
  write_tuple(w, p.tuple);
  return w.take();
}

CkptFetchPayload decode_ckpt_fetch(std::span<const uint8_t> in) {
  ByteReader r(in);
  CkptFetchPayload p;
  p.tuple = read_tuple(r);
  r.expect_end();
  return p;
}

std::vector<uint8_t> encode_payload(const CkptChunkPayload& p) {
  ByteWriter w;
  write_tuple(w, p.tuple);
  w.u64(p.offset);
  w.u64(p.total);
  w.u64(p.digest);
  w.u32(static_cast<uint32_t>(p.data.size()));
  w.bytes(p.data);
  return w.take();
}

CkptChunkPayload decode_ckpt_chunk(std::span<const uint8_t> in) {
  ByteReader r(in);
  CkptChunkPayload p;
  p.tuple = read_tuple(r);
  p.offset = r.u64();
  p.total = r.u64();
  p.digest = r.u64();
  p.data = r.bytes(r.u32());
  r.expect_end();
  return p;
}

std::vector<uint8_t> encode_payload(const RetransmitPayload& p) {
  ByteWriter w;
  w.u8(p.kind);
  w.u64(p.begin);
  w.u64(p.end);
  w.u64(p.trim_point);
  return w.take();
}

RetransmitPayload decode_retransmit(std::span<const uint8_t> in) {
  ByteReader r(in);
  RetransmitPayload p;
  p.kind = r.u8();
  if (p.kind > RetransmitPayload::TrimmedError) throw CodecError("bad retransmit kind");
  p.begin = r.u64();
  p.end = r.u64();
  p.trim_point = r.u64();
  r.expect_end();
  return p;
}

std::vector<uint8_t> encode_payload(const ClientRequestPayload& p) {
  ByteWriter w;
  w.u64(p.client_id);
  w.u64(p.seq);
  w.u8(p.service);
  w.bytes(p.command);
  return w.take();
}

ClientRequestPayload decode_client_request(std::span<const uint8_t> in) {
  ByteReader r(in);
  ClientRequestPayload p;
  p.client_id = r.u64();
  p.seq = r.u64();
  p.service = r.u8();
  p.command = r.rest();
  return p;
}

std::vector<uint8_t> encode_payload(const ClientReplyPayload& p) {
  ByteWriter w;
  w.u64(p.client_id);
  w.u64(p.seq);
  w.u8(p.status);
  w.bytes(p.result);
  return w.take();
}

ClientReplyPayload decode_client_reply(std::span<const uint8_t> in) {
  ByteReader r(in);
  ClientReplyPayload p;
  p.client_id = r.u64();
  p.seq = r.u64();
  p.status = r.u8();
  p.result = r.rest();
  return p;
}

}  // namespace mrp
