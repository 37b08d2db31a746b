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

#include "mrp/stable_log.hpp"

#include "mrp/envelope.hpp"

namespace mrp {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<uint8_t>(v >> s));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<uint8_t>(v >> s));
}

std::vector<uint8_t> make_record(StableLog::Tag tag, InstanceId instance, Ballot ballot,
                                 std::span<const uint8_t> value) {
  std::vector<uint8_t> rec;
  rec.reserve(4 + 17 + value.size());
  put_u32(rec, static_cast<uint32_t>(17 + value.size()));
  rec.push_back(tag);
  put_u64(rec, instance);
  put_u32(rec, ballot.round);
  rec.push_back(static_cast<uint8_t>(ballot.proposer >> 8));
  rec.push_back(static_cast<uint8_t>(ballot.proposer));
  rec.push_back(0);
  rec.push_back(0);
  rec.insert(rec.end(), value.begin(), value.end());
  return rec;
}

std::vector<uint8_t> encode_value(const ProposedValue& v) {
  ByteWriter w;
  write_value(w, v);
  return w.take();
}

}  // namespace

StableLog::StableLog(std::unique_ptr<StableMedium> medium, bool sync)
    : medium_(std::move(medium)), sync_(sync) {
  load();
}

const StableLog::VoteEntry* StableLog::vote_at(InstanceId i) const {
  auto it = votes_.find(i);
  return it == votes_.end() ? nullptr : &it->second;
}

void StableLog::append_record(Tag tag, InstanceId instance, Ballot ballot, std::span<const uint8_t> value) {
  auto rec = make_record(tag, instance, ballot, value);
  medium_->append(rec, sync_);
  file_bytes_ += rec.size();
}

void StableLog::promise(Ballot b, InstanceId begin, InstanceId end) {
  std::vector<uint8_t> val;
  put_u64(val, end);
  append_record(kPromise, begin, b, val);
  if (b > promised_) promised_ = b;
  if (end > promised_end_) promised_end_ = end;
  live_bytes_ += 29;
}

void StableLog::vote(InstanceId i, Ballot b, const ProposedValue& v) {
  auto enc = encode_value(v);
  append_record(kVote, i, b, enc);
  votes_[i] = VoteEntry{b, v, false};
  live_bytes_ += 21 + enc.size();
}

void StableLog::mark_decided(InstanceId i) {
  append_record(kDecide, i, Ballot{}, {});
  auto it = votes_.find(i);
  if (it != votes_.end()) it->second.decided = true;
  live_bytes_ += 21;
}

void StableLog::trim(InstanceId point) {
  if (point <= trim_point_) return;
  append_record(kTrim, point, Ballot{}, {});
  trim_point_ = point;
  // drop entries whose whole span lies below the trim point
  for (auto it = votes_.begin(); it != votes_.end();) {
    if (it->first + it->second.value.span() <= point)
      it = votes_.erase(it);
    else
      ++it;
  }
  compact();
}

void StableLog::compact() {
  std::vector<uint8_t> out;
  {
    auto rec = make_record(kTrim, trim_point_, Ballot{}, {});
    out.insert(out.end(), rec.begin(), rec.end());
  }
  if (promised_end_ > 0 || promised_ != Ballot{}) {
    std::vector<uint8_t> val;
    put_u64(val, promised_end_);
    auto rec = make_record(kPromise, 0, promised_, val);
    out.insert(out.end(), rec.begin(), rec.end());
  }
  for (const auto& [i, e] : votes_) {
    auto enc = encode_value(e.value);
    auto rec = make_record(kVote, i, e.ballot, enc);
    out.insert(out.end(), rec.begin(), rec.end());
    if (e.decided) {
      auto drec = make_record(kDecide, i, Ballot{}, {});
      out.insert(out.end(), drec.begin(), drec.end());
    }
  }
  medium_->rewrite(out);
  file_bytes_ = out.size();
  live_bytes_ = out.size();
}

void StableLog::load() {
  auto bytes = medium_->read_all();
  size_t pos = 0;
  while (pos + 4 <= bytes.size()) {
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len = (len << 8) | bytes[pos + i];
    if (len < 17 || pos + 4 + len > bytes.size()) break;  // torn tail
    std::span<const uint8_t> body(bytes.data() + pos + 4, len);
    uint8_t tag = body[0];
    InstanceId instance = 0;
    for (int i = 0; i < 8; ++i) instance = (instance << 8) | body[1 + i];
    Ballot ballot;
    for (int i = 0; i < 4; ++i) ballot.round = (ballot.round << 8) | body[9 + i];
    ballot.proposer = static_cast<ProcessId>((body[13] << 8) | body[14]);
    std::span<const uint8_t> value = body.subspan(17);
    try {
      switch (tag) {
        case kPromise: {
          if (value.size() != 8) throw CodecError("bad promise record");
          InstanceId end = 0;
          for (int i = 0; i < 8; ++i) end = (end << 8) | value[i];
          if (ballot > promised_) promised_ = ballot;
          if (end > promised_end_) promised_end_ = end;
          break;
        }
        case kVote: {
          ByteReader r(value);
          ProposedValue v = read_value(r);
          r.expect_end();
          votes_[instance] = VoteEntry{ballot, std::move(v), false};
          break;
        }
        case kDecide: {
          auto it = votes_.find(instance);
          if (it != votes_.end()) it->second.decided = true;
          break;
        }
        case kTrim: {
          if (instance > trim_point_) trim_point_ = instance;
          break;
        }
        default:
          throw CodecError("unknown log record tag");
      }
    } catch (const CodecError&) {
      break;  // treat a corrupt record as the torn tail
    }
    pos += 4 + len;
  }
  for (auto it = votes_.begin(); it != votes_.end();) {
    if (it->first + it->second.value.span() <= trim_point_)
      it = votes_.erase(it);
    else
      ++it;
  }
  file_bytes_ = bytes.size();
  live_bytes_ = bytes.size();
}

}  // namespace mrp
