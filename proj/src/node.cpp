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

#include "mrp/node.hpp"

#include <algorithm>
#include <cassert>

#include "mrp/hash.hpp"

namespace mrp {

namespace {

constexpr uint64_t kFlushDelayUs = 1000;
constexpr size_t kRetransmitBatch = 256;   // decisions served per request
constexpr size_t kCkptChunkBytes = 65536;
constexpr uint32_t kMaxProposeAttempts = 64;
constexpr size_t kCoordInflightLimit = 4096;  // undecided instances per ring
constexpr size_t kResendPerTick = 512;

size_t majority(size_t n) { return n / 2 + 1; }

std::string ring_log_name(GroupId g) { return "ring" + std::to_string(g); }
std::string coord_round_name(GroupId g) { return "coord" + std::to_string(g); }
constexpr const char* kCkptFile = "ckpt";

}  // namespace

ProcessCore::ProcessCore(const ClusterConfig& cfg, ProcessId self, NodeContext& ctx)
    : cfg_(cfg), self_(self), ctx_(ctx) {
  cfg_.process(self_);  // throws for unknown ids
  services_[ServiceKind::Dummy] = make_service(ServiceKind::Dummy, cfg_, self_, &ctx_.storage());
  if (cfg_.kvstore) services_[ServiceKind::Kv] = make_service(ServiceKind::Kv, cfg_, self_, &ctx_.storage());
  if (cfg_.dlog) services_[ServiceKind::Dlog] = make_service(ServiceKind::Dlog, cfg_, self_, &ctx_.storage());
}

ProcessCore::~ProcessCore() = default;

// ---- plumbing ----

ProcessCore::RingState& ProcessCore::ring_state(GroupId g) {
  auto it = rings_.find(g);
  if (it == rings_.end()) throw ProtocolError("not a member of ring " + std::to_string(g));
  return it->second;
}

void ProcessCore::send_to(ProcessId to, const Envelope& e) {
  if (to == self_)
    on_message(e);
  else
    ctx_.send(to, e);
}

void ProcessCore::send_ring(const RingConfig& r, const Envelope& e, ProcessId flow_origin,
                            bool through_origin) {
  ProcessId next = r.successor(self_);
  while (next != flow_origin && next != self_ && !ctx_.is_reachable(next))
    next = r.successor(next);
  if (next == self_) return;
  if (next == flow_origin && !through_origin) return;
  send_to(next, e);
}

const CheckpointTuple& ProcessCore::consumed() const {
  static const CheckpointTuple kEmpty;
  return cursor_ ? cursor_->consumed() : kEmpty;
}

uint64_t ProcessCore::service_digest(ServiceKind k) const {
  auto it = services_.find(k);
  return it == services_.end() ? 0 : it->second->state_digest();
}

uint64_t ProcessCore::combined_digest() const {
  uint64_t h = 0;
  for (const auto& [kind, svc] : services_)
    h ^= mix64(svc->state_digest() + static_cast<uint8_t>(kind));
  return h;
}

const Service* ProcessCore::service(ServiceKind k) const {
  auto it = services_.find(k);
  return it == services_.end() ? nullptr : it->second.get();
}

std::optional<DecidedSource::Rec> ProcessCore::decided_covering(GroupId g, InstanceId i) const {
  auto rit = rings_.find(g);
  if (rit == rings_.end()) return std::nullopt;
  const auto& decided = rit->second.decided;
  auto it = decided.upper_bound(i);
  if (it == decided.begin()) return std::nullopt;
  --it;
  if (i >= it->first + it->second.span()) return std::nullopt;
  return DecidedSource::Rec{it->first, it->second.span(), &it->second};
}

// ---- lifecycle ----

void ProcessCore::start() {
  const auto& info = cfg_.process(self_);

  for (const auto& rc : cfg_.rings) {
    if (!rc.is_member(self_)) continue;
    RingState rs;
    rs.cfg = &rc;
    if (rc.is_acceptor(self_)) {
      rs.acc = std::make_unique<AcceptorState>();
      rs.acc->log = std::make_unique<StableLog>(ctx_.storage().open(ring_log_name(rc.group)),
                                                cfg_.tuning.sync_log);
      rs.decided_floor = rs.acc->log->trim_point();
    }
    if (rc.coordinator == self_) {
      rs.coord = std::make_unique<CoordState>();
      auto stored = ctx_.storage().read_file(coord_round_name(rc.group));
      uint32_t round = 0;
      if (stored && stored->size() == 4)
        round = (uint32_t((*stored)[0]) << 24) | (uint32_t((*stored)[1]) << 16) |
                (uint32_t((*stored)[2]) << 8) | uint32_t((*stored)[3]);
      round += 1;
      uint8_t buf[4] = {uint8_t(round >> 24), uint8_t(round >> 16), uint8_t(round >> 8),
                        uint8_t(round)};
      ctx_.storage().write_file(coord_round_name(rc.group), std::span<const uint8_t>(buf, 4));
      rs.coord->ballot = Ballot{round, self_};
      if (cfg_.tuning.rate_leveling && cfg_.rings.size() > 1)
        rs.coord->skips = std::make_unique<SkipPolicy>(cfg_.tuning.delta_ms, cfg_.tuning.lambda);
    }
    rings_.emplace(rc.group, std::move(rs));
  }

  is_learner_ = info.has_role(Role::Learner) && !info.subscriptions.empty();
  if (is_learner_) {
    std::vector<GroupId> groups(info.subscriptions.begin(), info.subscriptions.end());
    cursor_ = std::make_unique<MergeCursor>(groups, cfg_.tuning.merge_window);
    my_partition_ = partition_of(self_, cfg_);
    if (auto bytes = ctx_.storage().read_file(kCkptFile)) {
      install_checkpoint(Checkpoint::decode(*bytes));
    }
    recovering_ = true;
    start_recovery();
    ctx_.set_timer(timer_token(kTimerGap), uint64_t(cfg_.tuning.retransmit_timeout_ms) * 1000);
  }

  for (auto& [g, rs] : rings_) {
    if (!rs.coord) continue;
    start_phase1(g, cfg_.tuning.phase1_window);
    if (rs.coord->skips)
      ctx_.set_timer(timer_token(kTimerRate, g), uint64_t(cfg_.tuning.delta_ms) * 1000);
    ctx_.set_timer(timer_token(kTimerTrim, g), uint64_t(cfg_.tuning.trim_interval_ms) * 1000);
  }
}

void ProcessCore::on_message(const Envelope& e) {
  switch (e.msg_type) {
    case MsgType::Propose: return on_propose(e);
    case MsgType::Phase1A: return on_phase1a(e);
    case MsgType::Phase1B: return on_phase1b(e);
    case MsgType::Phase2: return on_phase2(e);
    case MsgType::Decision: return on_decision(e);
    case MsgType::TrimQuery: {
      auto p = decode_trim_query(e.payload);
      if (!is_learner_ || !cfg_.process(self_).subscriptions.count(e.group)) return;
      TrimReplyPayload rep;
      rep.round = p.round;
      auto it = ckpt_tuple_.find(e.group);
      rep.safe_instance = have_ckpt_ && it != ckpt_tuple_.end() ? it->second : 0;
      send_to(e.origin, make_envelope(MsgType::TrimReply, e.group, self_, rep));
      return;
    }
    case MsgType::TrimReply: return on_trim_reply(e);
    case MsgType::Trim: return on_trim(e);
    case MsgType::CkptQuery: return on_ckpt_query(e);
    case MsgType::CkptReply: return on_ckpt_reply(e);
    case MsgType::CkptFetch: return on_ckpt_fetch(e);
    case MsgType::CkptChunk: return on_ckpt_chunk(e);
    case MsgType::Retransmit: return on_retransmit(e);
    case MsgType::ClientRequest: return on_client_request(e);
    case MsgType::ClientReply: return on_client_reply(e);
  }
}

void ProcessCore::on_timer(uint32_t token) {
  GroupId g = timer_group(token);
  switch (timer_kind(token)) {
    case kTimerRate: return on_rate_tick(g);
    case kTimerTrim: return on_trim_tick(g);
    case kTimerPhase1: {
      auto& rs = ring_state(g);
      if (rs.coord && rs.coord->phase1_running) start_phase1(g, rs.coord->phase1_target);
      return;
    }
    case kTimerPhase2: {
      auto& rs = ring_state(g);
      if (!rs.coord) return;
      uint64_t now = ctx_.now_us();
      uint64_t timeout = uint64_t(cfg_.tuning.retransmit_timeout_ms) * 1000;
      for (auto& [i, f] : rs.coord->inflight) {
        if (now - f.sent_at < timeout) continue;
        f.sent_at = now;
        coord_send_phase2(g, i, f);
      }
      rs.coord->phase2_timer_armed = !rs.coord->inflight.empty();
      if (rs.coord->phase2_timer_armed) ctx_.set_timer(token, timeout);
      return;
    }
    case kTimerFlush:
      flush_timer_armed_ = false;
      return flush_batches();
    case kTimerProposer: {
      uint64_t now = ctx_.now_us();
      uint64_t timeout = uint64_t(cfg_.tuning.retransmit_timeout_ms) * 1000;
      for (auto it = outgoing_.begin(); it != outgoing_.end();) {
        auto& [seq, b] = *it;
        uint64_t cadence = b.acked ? timeout * 10 : timeout;
        if (now - b.last_sent >= cadence) {
          if (++b.attempts > kMaxProposeAttempts) {
            for (const auto& [client, cseq] : b.waiting) aggregates_.erase(client);
            it = outgoing_.erase(it);
            continue;
          }
          b.last_sent = now;
          ProposePayload p{seq, b.value};
          const RingConfig& rc = cfg_.ring_or_throw(b.group);
          send_to(rc.coordinator, make_envelope(MsgType::Propose, b.group, self_, p));
        }
        ++it;
      }
      proposer_timer_armed_ = !outgoing_.empty();
      if (proposer_timer_armed_) ctx_.set_timer(token, timeout);
      return;
    }
    case kTimerGap: return check_gaps();
    case kTimerRecover:
      if (recovering_) start_recovery();
      return;
  }
}

// ---- coordinator ----

void ProcessCore::start_phase1(GroupId g, InstanceId target_end) {
  auto& rs = ring_state(g);
  CoordState& cs = *rs.coord;
  cs.phase1_running = true;
  cs.phase1_target = std::max(target_end, cs.phase1_target);
  cs.phase1_replies.clear();
  Phase1APayload p;
  p.ballot = cs.ballot;
  p.begin = cs.next;
  p.end = cs.phase1_target;
  for (ProcessId a : rs.cfg->acceptors)
    send_to(a, make_envelope(MsgType::Phase1A, g, self_, p));
  ctx_.set_timer(timer_token(kTimerPhase1, g), uint64_t(cfg_.tuning.retransmit_timeout_ms) * 1000);
}

void ProcessCore::on_phase1a(const Envelope& e) {
  auto it = rings_.find(e.group);
  if (it == rings_.end() || !it->second.acc) return;
  StableLog& log = *it->second.acc->log;
  auto p = decode_phase1a(e.payload);
  Phase1BPayload rep;
  if (p.ballot >= log.promised()) {
    log.promise(p.ballot, p.begin, p.end);
    rep.ballot = p.ballot;
    rep.begin = log.trim_point();
    rep.end = log.promised_end();
    for (const auto& [i, v] : log.votes()) {
      Phase1BPayload::Vote vote;
      vote.instance = i;
      vote.ballot = v.ballot;
      vote.decided = v.decided;
      vote.value = v.value;
      rep.votes.push_back(std::move(vote));
    }
  } else {
    rep.ballot = log.promised();  // rejection: a higher ballot exists
    rep.begin = log.trim_point();
    rep.end = log.promised_end();
  }
  send_to(e.origin, make_envelope(MsgType::Phase1B, e.group, self_, rep));
}

void ProcessCore::on_phase1b(const Envelope& e) {
  auto it = rings_.find(e.group);
  if (it == rings_.end() || !it->second.coord) return;
  RingState& rs = it->second;
  CoordState& cs = *rs.coord;
  if (!cs.phase1_running) return;
  auto p = decode_phase1b(e.payload);
  if (p.ballot > cs.ballot) {
    // lost to a higher round; take one above it and retry
    cs.ballot.round = p.ballot.round + 1;
    uint8_t buf[4] = {uint8_t(cs.ballot.round >> 24), uint8_t(cs.ballot.round >> 16),
                      uint8_t(cs.ballot.round >> 8), uint8_t(cs.ballot.round)};
    ctx_.storage().write_file(coord_round_name(e.group), std::span<const uint8_t>(buf, 4));
    start_phase1(e.group, cs.phase1_target);
    return;
  }
  if (p.ballot != cs.ballot) return;
  cs.phase1_replies[e.origin] = std::move(p);
  if (cs.phase1_replies.size() < rs.cfg->quorum_size) return;

  // quorum promised: adopt the highest vote per unresolved instance
  cs.phase1_running = false;
  ctx_.cancel_timer(timer_token(kTimerPhase1, e.group));
  cs.window_end = cs.phase1_target;
  std::map<InstanceId, Phase1BPayload::Vote> best;
  for (const auto& [from, rep] : cs.phase1_replies) {
    cs.next = std::max(cs.next, rep.begin);  // never reuse trimmed instances
    for (const auto& v : rep.votes) {
      auto [bit, fresh] = best.emplace(v.instance, v);
      if (!fresh && !bit->second.decided && (v.decided || v.ballot > bit->second.ballot))
        bit->second = v;
    }
  }
  for (const auto& [i, v] : best)
    cs.next = std::max(cs.next, i + v.value.span());
  for (const auto& [i, v] : best) {
    uint64_t vid = value_digest(v.value);
    if (v.decided) {
      if (note_decided(e.group, i, v.value, vid)) {
        DecisionPayload d{i, vid, v.value};
        send_ring(*rs.cfg, make_envelope(MsgType::Decision, e.group, self_, d), self_, false);
      }
      continue;
    }
    if (decided_covering(e.group, i)) continue;
    InFlight f;
    f.value = v.value;
    f.value_id = vid;
    f.sent_at = ctx_.now_us();
    cs.inflight[i] = f;
    coord_send_phase2(e.group, i, cs.inflight[i]);
  }
  arm_phase2_timer(e.group, cs);
  coord_drain_backlog(e.group);
  if (is_learner_ && !recovering_) drive_merge();
}

void ProcessCore::arm_phase2_timer(GroupId g, CoordState& cs) {
  // arming resets the deadline, so a steady stream of assignments must not
  // re-arm; the pending timer keeps itself alive while anything is in flight
  if (cs.inflight.empty() || cs.phase2_timer_armed) return;
  cs.phase2_timer_armed = true;
  ctx_.set_timer(timer_token(kTimerPhase2, g), uint64_t(cfg_.tuning.retransmit_timeout_ms) * 1000);
}

void ProcessCore::coord_send_phase2(GroupId g, InstanceId instance, const InFlight& f) {
  auto& rs = ring_state(g);
  CoordState& cs = *rs.coord;
  Phase2Payload p;
  p.instance = instance;
  p.ballot = cs.ballot;
  p.value_id = f.value_id;
  p.value = f.value;
  p.votes = 0;
  if (rs.acc) {
    StableLog& log = *rs.acc->log;
    const auto* v = log.vote_at(instance);
    if (!v || v->ballot < cs.ballot) log.vote(instance, cs.ballot, f.value);
    p.votes = 1;
    if (p.votes >= rs.cfg->quorum_size) {
      // single-acceptor ring: decided on the spot
      if (note_decided(g, instance, f.value, f.value_id)) {
        DecisionPayload d{instance, f.value_id, f.value};
        send_ring(*rs.cfg, make_envelope(MsgType::Decision, g, self_, d), self_, false);
        if (is_learner_ && !recovering_) drive_merge();
      }
      return;
    }
  }
  send_ring(*rs.cfg, make_envelope(MsgType::Phase2, g, self_, p), self_, false);
}

void ProcessCore::coord_assign(GroupId g, ProposedValue value, ProcessId origin,
                               uint64_t proposer_seq) {
  auto& rs = ring_state(g);
  CoordState& cs = *rs.coord;
  InstanceId span = value.span();
  // the vote window is what acceptor buffers can hold above the trim point;
  // the inflight cap bounds the retry timer's work per tick
  InstanceId vote_end = (rs.acc ? rs.acc->log->trim_point() : rs.decided_floor) +
                        cfg_.tuning.buffer_slots;
  if (cs.phase1_running || cs.next + span > cs.window_end ||
      cs.next + span > vote_end || cs.inflight.size() >= kCoordInflightLimit) {
    if (proposer_seq != 0 && !cs.queued.insert({origin, proposer_seq}).second) return;
    cs.backlog.push_back(QueuedProposal{origin, proposer_seq, std::move(value)});
    if (!cs.phase1_running && cs.next + span > cs.window_end)
      start_phase1(g, cs.window_end + cfg_.tuning.phase1_window);
    return;
  }
  InstanceId i = cs.next;
  cs.next += span;
  if (proposer_seq != 0) cs.assigned[{origin, proposer_seq}] = i;
  // skips are what the tick itself injects; counting them would shrink the
  // next interval's deficit and halve the leveled rate
  if (cs.skips && value.kind == ValueKind::App) cs.skips->on_proposed(span);
  InFlight f;
  f.value_id = value_digest(value);
  f.value = std::move(value);
  f.sent_at = ctx_.now_us();
  auto [fit, fresh] = cs.inflight.emplace(i, std::move(f));
  (void)fresh;
  coord_send_phase2(g, i, fit->second);
  arm_phase2_timer(g, cs);
  // extend the promised window well before it runs out
  if (!cs.phase1_running && cs.window_end - cs.next < cfg_.tuning.phase1_window / 4)
    start_phase1(g, cs.window_end + cfg_.tuning.phase1_window);
}

void ProcessCore::coord_drain_backlog(GroupId g) {
  auto& cs = *ring_state(g).coord;
  while (!cs.backlog.empty() && !cs.phase1_running &&
         cs.next + cs.backlog.front().value.span() <= cs.window_end) {
    QueuedProposal q = std::move(cs.backlog.front());
    cs.backlog.pop_front();
    coord_assign(g, std::move(q.value), q.origin, q.proposer_seq);
  }
}

void ProcessCore::on_propose(const Envelope& e) {
  auto it = rings_.find(e.group);
  if (it == rings_.end() || !it->second.coord) return;
  CoordState& cs = *it->second.coord;
  auto p = decode_propose(e.payload);
  ClientReplyPayload ack;
  ack.client_id = 0;  // coordinator ack, not a client reply
  ack.seq = p.proposer_seq;
  ack.status = kAck;
  if (!cs.assigned.count({e.origin, p.proposer_seq}))
    coord_assign(e.group, std::move(p.value), e.origin, p.proposer_seq);
  send_to(e.origin, make_envelope(MsgType::ClientReply, e.group, self_, ack));
}

void ProcessCore::on_phase2_return(const Envelope& e, const Phase2Payload& p) {
  auto& rs = ring_state(e.group);
  CoordState& cs = *rs.coord;
  if (p.ballot != cs.ballot) return;
  if (p.votes >= rs.cfg->quorum_size) {
    if (note_decided(e.group, p.instance, p.value, p.value_id)) {
      DecisionPayload d{p.instance, p.value_id, p.value};
      send_ring(*rs.cfg, make_envelope(MsgType::Decision, e.group, self_, d), self_, false);
      if (is_learner_ && !recovering_) drive_merge();
    }
  }
  // not quorate: the phase 2 retry timer resends
}

void ProcessCore::on_rate_tick(GroupId g) {
  auto it = rings_.find(g);
  if (it == rings_.end() || !it->second.coord || !it->second.coord->skips) return;
  CoordState& cs = *it->second.coord;
  uint64_t deficit = cs.skips->tick();
  if (deficit > 0) {
    ProposedValue skip;
    skip.kind = ValueKind::Skip;
    skip.skip_count = static_cast<uint32_t>(std::min<uint64_t>(deficit, 0xFFFFFFFFu));
    coord_assign(g, std::move(skip), self_, 0);
  }
  ctx_.set_timer(timer_token(kTimerRate, g), uint64_t(cfg_.tuning.delta_ms) * 1000);
}

void ProcessCore::on_trim_tick(GroupId g) {
  auto it = rings_.find(g);
  if (it != rings_.end() && it->second.coord) {
    CoordState& cs = *it->second.coord;
    cs.trim_round++;
    cs.trim_replies.clear();
    for (const auto& part : cfg_.partitions) {
      if (!part.groups.count(g)) continue;
      for (ProcessId r : part.replicas)
        send_to(r, make_envelope(MsgType::TrimQuery, g, self_, TrimQueryPayload{cs.trim_round}));
    }
  }
  ctx_.set_timer(timer_token(kTimerTrim, g), uint64_t(cfg_.tuning.trim_interval_ms) * 1000);
}

void ProcessCore::on_trim_reply(const Envelope& e) {
  auto it = rings_.find(e.group);
  if (it == rings_.end() || !it->second.coord) return;
  RingState& rs = it->second;
  CoordState& cs = *rs.coord;
  auto p = decode_trim_reply(e.payload);
  if (p.round != cs.trim_round) return;
  cs.trim_replies[e.origin] = p.safe_instance;
  // need a majority of every partition subscribed to this group
  bool complete = false;
  for (const auto& part : cfg_.partitions) {
    if (!part.groups.count(e.group)) continue;
    complete = true;
    size_t got = 0;
    for (ProcessId r : part.replicas) got += cs.trim_replies.count(r);
    if (got < majority(part.replicas.size())) return;
  }
  if (!complete) return;
  std::vector<InstanceId> replies;
  for (const auto& [from, safe] : cs.trim_replies) replies.push_back(safe);
  InstanceId point = select_trim_point(replies);
  if (point <= cs.trim_point) return;
  cs.trim_point = point;
  stats_.trims++;
  TraceEvent ev;
  ev.kind = TraceEvent::Kind::Trim;
  ev.node = self_;
  ev.group = e.group;
  ev.instance = point;
  ctx_.trace(ev);
  Envelope trim = make_envelope(MsgType::Trim, e.group, self_, TrimPayload{point});
  on_trim(trim);  // apply locally first
}

void ProcessCore::on_trim(const Envelope& e) {
  auto it = rings_.find(e.group);
  if (it == rings_.end()) return;
  RingState& rs = it->second;
  auto p = decode_trim(e.payload);
  bool fresh = p.trim_point > rs.decided_floor || (rs.acc && p.trim_point > rs.acc->log->trim_point());
  if (rs.acc) rs.acc->log->trim(p.trim_point);
  if (p.trim_point > rs.decided_floor) {
    rs.decided_floor = p.trim_point;
    while (!rs.decided.empty()) {
      auto d = rs.decided.begin();
      if (d->first + d->second.span() > p.trim_point) break;
      rs.decided.erase(d);
    }
  }
  if (fresh) send_ring(*rs.cfg, e, e.origin, false);
}

// ---- acceptor ----

void ProcessCore::on_phase2(const Envelope& e) {
  auto it = rings_.find(e.group);
  if (it == rings_.end()) return;
  RingState& rs = it->second;
  auto p = decode_phase2(e.payload);
  if (e.origin == self_ && rs.coord) return on_phase2_return(e, p);

  if (rs.acc) {
    StableLog& log = *rs.acc->log;
    if (p.instance < log.trim_point()) return;
    if (p.ballot < log.promised()) return;  // promised someone newer; drop
    const auto* v = log.vote_at(p.instance);
    if (v && v->decided) {
      // already decided here: short-circuit to a decision
      DecisionPayload d{p.instance, value_digest(v->value), v->value};
      Envelope de = make_envelope(MsgType::Decision, e.group, self_, d);
      send_to(e.origin, de);
      send_ring(*rs.cfg, de, self_, false);
      return;
    }
    if (v && v->ballot > p.ballot) return;  // stale retry
    if (!v && log.slots_used() >= cfg_.tuning.buffer_slots) {
      // full buffer: pass the message along unvoted so the rest of the ring
      // can still reach quorum without us
      send_ring(*rs.cfg, make_envelope(MsgType::Phase2, e.group, e.origin, p), e.origin, true);
      return;
    }
    if (!v || v->ballot < p.ballot) log.vote(p.instance, p.ballot, p.value);
    p.votes++;
    if (self_ == rs.cfg->last_acceptor() && p.votes >= rs.cfg->quorum_size) {
      if (note_decided(e.group, p.instance, p.value, p.value_id)) {
        DecisionPayload d{p.instance, p.value_id, p.value};
        send_ring(*rs.cfg, make_envelope(MsgType::Decision, e.group, self_, d), self_, false);
        if (is_learner_ && !recovering_) drive_merge();
      }
      return;
    }
  }
  send_ring(*rs.cfg, make_envelope(MsgType::Phase2, e.group, e.origin, p), e.origin, true);
}

void ProcessCore::on_retransmit(const Envelope& e) {
  auto it = rings_.find(e.group);
  if (it == rings_.end()) return;
  RingState& rs = it->second;
  auto p = decode_retransmit(e.payload);
  if (p.kind == RetransmitPayload::TrimmedError) {
    // our position was trimmed away; catch up from a peer checkpoint
    if (is_learner_ && !recovering_) {
      recovering_ = true;
      start_recovery();
    }
    return;
  }
  if (!rs.acc) return;
  StableLog& log = *rs.acc->log;
  if (p.begin < log.trim_point()) {
    RetransmitPayload err;
    err.kind = RetransmitPayload::TrimmedError;
    err.trim_point = log.trim_point();
    send_to(e.origin, make_envelope(MsgType::Retransmit, e.group, self_, err));
    return;
  }
  size_t sent = 0;
  auto vit = log.votes().upper_bound(p.begin);
  if (vit != log.votes().begin()) --vit;
  for (; vit != log.votes().end() && sent < kRetransmitBatch; ++vit) {
    const auto& [i, v] = *vit;
    if (i + v.value.span() <= p.begin) continue;
    if (p.end != 0 && i >= p.end) break;
    if (!v.decided) continue;
    DecisionPayload d{i, value_digest(v.value), v.value};
    send_to(e.origin, make_envelope(MsgType::Decision, e.group, self_, d));
    sent++;
  }
}

// ---- learner ----

bool ProcessCore::note_decided(GroupId g, InstanceId base, ProposedValue value, uint64_t value_id) {
  RingState& rs = ring_state(g);
  if (base < rs.decided_floor) return false;
  if (rs.decided.count(base)) return false;
  if (rs.coord) {
    rs.coord->inflight.erase(base);
    rs.coord->next = std::max(rs.coord->next, base + value.span());
  }
  if (rs.acc) {
    StableLog& log = *rs.acc->log;
    const auto* v = log.vote_at(base);
    if (!v) log.vote(base, log.promised(), value);
    log.mark_decided(base);
  }
  TraceEvent ev;
  ev.kind = TraceEvent::Kind::Decide;
  ev.node = self_;
  ev.group = g;
  ev.instance = base;
  ev.span = value.span();
  ev.value_id = value_id;
  ctx_.trace(ev);
  stats_.decided++;
  rs.blocked_since = 0;
  rs.decided.emplace(base, std::move(value));
  return true;
}

void ProcessCore::on_decision(const Envelope& e) {
  auto it = rings_.find(e.group);
  if (it == rings_.end()) return;
  auto p = decode_decision(e.payload);
  bool fresh = note_decided(e.group, p.instance, std::move(p.value), p.value_id);
  if (fresh && e.origin != self_)
    send_ring(*it->second.cfg, e, e.origin, false);
  if (fresh && is_learner_ && !recovering_) drive_merge();
}

void ProcessCore::drive_merge() {
  if (!cursor_ || recovering_) return;
  struct Src final : DecidedSource {
    ProcessCore* pc;
    std::optional<Rec> covering(GroupId g, InstanceId i) override {
      return pc->decided_covering(g, i);
    }
  } src;
  src.pc = this;
  // checkpoint checks run at every turn boundary so the tuple sequence is
  // a pure function of the delivered sequence, identical across a partition
  while (auto d = cursor_->next(src)) {
    apply_delivery(*d);
    maybe_checkpoint();
  }

  // prune consumed decisions and track where we are stuck
  uint64_t now = ctx_.now_us();
  for (auto& [g, rs] : rings_) {
    auto cit = cursor_->consumed().find(g);
    if (cit == cursor_->consumed().end()) continue;
    while (!rs.decided.empty()) {
      auto d = rs.decided.begin();
      if (d->first + d->second.span() > cit->second) break;
      rs.decided.erase(d);
    }
    if (g == cursor_->current_group() && !decided_covering(g, cit->second)) {
      if (rs.blocked_since == 0) rs.blocked_since = now;
    } else {
      rs.blocked_since = 0;
    }
  }
}

void ProcessCore::apply_delivery(const MergeDelivery& d) {
  auto records = unpack_batch(d.value->payload);
  for (auto& rec : records) {
    auto sit = services_.find(rec.service);
    if (sit == services_.end()) continue;
    ApplyResult res = sit->second->apply(rec);
    // a re-decided duplicate is filtered by the dedup table; only the first
    // application counts as a delivery to the application
    if (res.fresh) {
      TraceEvent ev;
      ev.kind = TraceEvent::Kind::Deliver;
      ev.node = self_;
      ev.group = d.group;
      ev.instance = d.instance;
      ev.client_id = rec.client_id;
      ev.seq = rec.seq;
      ev.service = static_cast<uint8_t>(rec.service);
      ctx_.trace(ev);
      stats_.delivered++;
    }
    if (res.reply) send_reply_to_origin(d.group, rec, res);
  }
}

void ProcessCore::maybe_checkpoint() {
  if (!cursor_ || !cursor_->at_turn_boundary()) return;
  uint64_t total = 0;
  for (const auto& [g, n] : cursor_->consumed()) total += n;
  if (total - last_ckpt_consumed_ < cfg_.tuning.checkpoint_interval) return;
  write_checkpoint();
  last_ckpt_consumed_ = total;
}

void ProcessCore::write_checkpoint() {
  Checkpoint c;
  c.tuple = cursor_->consumed();
  c.digest = combined_digest();
  c.blob = serialize_services();
  ctx_.storage().write_file(kCkptFile, c.encode());
  ckpt_tuple_ = c.tuple;
  ckpt_digest_ = c.digest;
  have_ckpt_ = true;
  stats_.checkpoints++;
  TraceEvent ev;
  ev.kind = TraceEvent::Kind::Checkpoint;
  ev.node = self_;
  ev.value_id = c.digest;
  ev.tuple = c.tuple;
  ctx_.trace(ev);
}

std::vector<uint8_t> ProcessCore::serialize_services() const {
  ByteWriter w;
  w.u8(static_cast<uint8_t>(services_.size()));
  for (const auto& [kind, svc] : services_) {
    w.u8(static_cast<uint8_t>(kind));
    auto blob = svc->serialize();
    w.u32(static_cast<uint32_t>(blob.size()));
    w.bytes(blob);
  }
  return w.take();
}

void ProcessCore::deserialize_services(std::span<const uint8_t> blob) {
  ByteReader r(blob);
  uint8_t n = r.u8();
  for (uint8_t i = 0; i < n; ++i) {
    auto kind = static_cast<ServiceKind>(r.u8());
    auto bytes = r.bytes(r.u32());
    auto it = services_.find(kind);
    if (it == services_.end()) throw StorageError("checkpoint names an unknown service");
    it->second->deserialize(bytes);
  }
  r.expect_end();
}

void ProcessCore::check_gaps() {
  if (is_learner_)
    ctx_.set_timer(timer_token(kTimerGap), uint64_t(cfg_.tuning.retransmit_timeout_ms) * 1000);
  if (!cursor_ || recovering_) return;
  uint64_t now = ctx_.now_us();
  uint64_t timeout = uint64_t(cfg_.tuning.retransmit_timeout_ms) * 1000;
  for (auto& [g, rs] : rings_) {
    auto cit = cursor_->consumed().find(g);
    if (cit == cursor_->consumed().end()) continue;
    InstanceId at = cit->second;
    if (decided_covering(g, at)) continue;
    bool ahead = !rs.decided.empty() && rs.decided.rbegin()->first > at;
    if (rs.blocked_since == 0) {
      if (g == cursor_->current_group()) rs.blocked_since = now;
      if (!ahead) continue;
    }
    if (!ahead && now - rs.blocked_since < timeout) continue;
    // ask an acceptor for the missing range, rotating on each try
    const auto& accs = rs.cfg->acceptors;
    for (size_t k = 0; k < accs.size(); ++k) {
      ProcessId a = accs[(rs.retransmit_rotate + k) % accs.size()];
      if (a == self_ || !ctx_.is_reachable(a)) continue;
      rs.retransmit_rotate += k + 1;
      RetransmitPayload p;
      p.kind = RetransmitPayload::Request;
      p.begin = at;
      p.end = ahead ? rs.decided.rbegin()->first + rs.decided.rbegin()->second.span() : 0;
      send_to(a, make_envelope(MsgType::Retransmit, g, self_, p));
      stats_.retransmit_requests++;
      break;
    }
  }
}

// ---- recovery ----

void ProcessCore::start_recovery() {
  recovery_ = RecoveryState{};
  recovery_.nonce = static_cast<uint32_t>(mix64(ctx_.now_us() ^ (uint64_t(self_) << 32)));
  CkptReplyPayload own;
  own.nonce = recovery_.nonce;
  own.has_checkpoint = have_ckpt_;
  own.tuple = ckpt_tuple_;
  recovery_.replies[self_] = own;
  for (ProcessId r : my_partition_.replicas) {
    if (r == self_) continue;
    send_to(r, make_envelope(MsgType::CkptQuery, 0, self_, CkptQueryPayload{recovery_.nonce}));
  }
  ctx_.set_timer(timer_token(kTimerRecover), uint64_t(cfg_.tuning.retransmit_timeout_ms) * 4000);
  if (recovery_.replies.size() >= majority(my_partition_.replicas.size()))
    finish_recovery(ckpt_tuple_);
}

void ProcessCore::on_ckpt_query(const Envelope& e) {
  if (!is_learner_) return;
  auto p = decode_ckpt_query(e.payload);
  CkptReplyPayload rep;
  rep.nonce = p.nonce;
  rep.has_checkpoint = have_ckpt_;
  rep.tuple = ckpt_tuple_;
  send_to(e.origin, make_envelope(MsgType::CkptReply, 0, self_, rep));
}

void ProcessCore::on_ckpt_reply(const Envelope& e) {
  if (!recovering_ || recovery_.fetching) return;
  auto p = decode_ckpt_reply(e.payload);
  if (p.nonce != recovery_.nonce) return;
  if (!my_partition_.replicas.count(e.origin)) return;
  recovery_.replies[e.origin] = p;
  if (recovery_.replies.size() < majority(my_partition_.replicas.size())) return;

  std::vector<CheckpointTuple> tuples;
  for (const auto& [from, rep] : recovery_.replies)
    if (rep.has_checkpoint) tuples.push_back(rep.tuple);
  if (tuples.empty()) {
    finish_recovery(ckpt_tuple_);
    return;
  }
  CheckpointTuple target = select_recovery_target(tuples);
  if (have_ckpt_ && tuple_leq(target, ckpt_tuple_)) {
    finish_recovery(ckpt_tuple_);
    return;
  }
  for (const auto& [from, rep] : recovery_.replies) {
    if (from == self_ || !rep.has_checkpoint || rep.tuple != target) continue;
    recovery_.fetching = true;
    recovery_.target = target;
    recovery_.source = from;
    recovery_.blob.clear();
    recovery_.received = 0;
    send_to(from, make_envelope(MsgType::CkptFetch, 0, self_, CkptFetchPayload{target}));
    ctx_.set_timer(timer_token(kTimerRecover), uint64_t(cfg_.tuning.retransmit_timeout_ms) * 4000);
    return;
  }
  finish_recovery(ckpt_tuple_);  // target was our own tuple
}

void ProcessCore::on_ckpt_fetch(const Envelope& e) {
  auto p = decode_ckpt_fetch(e.payload);
  auto bytes = ctx_.storage().read_file(kCkptFile);
  if (!bytes) return;
  Checkpoint c = Checkpoint::decode(*bytes);
  if (!tuple_leq(p.tuple, c.tuple)) return;  // cannot serve an older state
  uint64_t digest = fnv1a64(bytes->data(), bytes->size());
  for (uint64_t off = 0; off < bytes->size(); off += kCkptChunkBytes) {
    CkptChunkPayload chunk;
    chunk.tuple = c.tuple;
    chunk.offset = off;
    chunk.total = bytes->size();
    chunk.digest = digest;
    size_t len = std::min<size_t>(kCkptChunkBytes, bytes->size() - off);
    chunk.data.assign(bytes->begin() + off, bytes->begin() + off + len);
    send_to(e.origin, make_envelope(MsgType::CkptChunk, 0, self_, chunk));
  }
}

void ProcessCore::on_ckpt_chunk(const Envelope& e) {
  if (!recovering_ || !recovery_.fetching) return;
  auto p = decode_ckpt_chunk(e.payload);
  if (e.origin != recovery_.source) return;
  if (p.offset != recovery_.received) return;  // out of order; retry timer restarts
  recovery_.blob.insert(recovery_.blob.end(), p.data.begin(), p.data.end());
  recovery_.received += p.data.size();
  if (recovery_.received < p.total) return;
  uint64_t digest = fnv1a64(recovery_.blob.data(), recovery_.blob.size());
  if (digest != p.digest) {
    start_recovery();  // corrupted transfer; start over
    return;
  }
  Checkpoint c = Checkpoint::decode(recovery_.blob);
  install_checkpoint(c);
  ctx_.storage().write_file(kCkptFile, recovery_.blob);
  finish_recovery(c.tuple);
}

void ProcessCore::install_checkpoint(const Checkpoint& c) {
  deserialize_services(c.blob);
  if (combined_digest() != c.digest) throw StorageError("checkpoint digest mismatch");
  cursor_->restore(c.tuple);
  ckpt_tuple_ = c.tuple;
  ckpt_digest_ = c.digest;
  have_ckpt_ = true;
  uint64_t total = 0;
  for (const auto& [g, n] : c.tuple) total += n;
  last_ckpt_consumed_ = total;
  for (auto& [g, rs] : rings_) {
    auto it = c.tuple.find(g);
    if (it == c.tuple.end()) continue;
    if (it->second > rs.decided_floor) rs.decided_floor = it->second;
    while (!rs.decided.empty()) {
      auto d = rs.decided.begin();
      if (d->first + d->second.span() > rs.decided_floor) break;
      rs.decided.erase(d);
    }
  }
}

void ProcessCore::finish_recovery(const CheckpointTuple& target) {
  recovering_ = false;
  recovery_.fetching = false;
  ctx_.cancel_timer(timer_token(kTimerRecover));
  TraceEvent ev;
  ev.kind = TraceEvent::Kind::Recovered;
  ev.node = self_;
  ev.tuple = target;
  ctx_.trace(ev);
  drive_merge();
  check_gaps();
}

// ---- front end ----

void ProcessCore::on_client_request(const Envelope& e) {
  auto p = decode_client_request(e.payload);
  auto kind = static_cast<ServiceKind>(p.service);
  if (kind == ServiceKind::Admin) {
    ByteWriter w;
    w.u64(stats_.proposals);
    w.u64(stats_.decided);
    w.u64(stats_.delivered);
    w.u64(stats_.checkpoints);
    w.u64(stats_.trims);
    ClientReplyPayload rep{p.client_id, p.seq, kOk, w.take()};
    ctx_.send_client(p.client_id, make_envelope(MsgType::ClientReply, 0, self_, rep));
    return;
  }
  GroupId g;
  try {
    g = route_command(kind, p.command, cfg_);
  } catch (const std::exception&) {
    ClientReplyPayload rep{p.client_id, p.seq, kBadRequest, {}};
    ctx_.send_client(p.client_id, make_envelope(MsgType::ClientReply, 0, self_, rep));
    return;
  }
  CommandRecord rec;
  rec.service = kind;
  rec.client_id = p.client_id;
  rec.seq = p.seq;
  rec.origin_node = self_;
  rec.body = std::move(p.command);
  auto encoded = rec.encode();
  auto& acc = accum_[g];
  if (!acc.empty() && acc.size() + encoded.size() > cfg_.tuning.batch_limit) flush_batches();
  auto& acc2 = accum_[g];
  acc2.insert(acc2.end(), encoded.begin(), encoded.end());
  ReplyAggregate& ag = aggregates_[p.client_id];
  ag = ReplyAggregate{};
  ag.seq = p.seq;
  ag.service = p.service;
  if (!flush_timer_armed_) {
    flush_timer_armed_ = true;
    ctx_.set_timer(timer_token(kTimerFlush), kFlushDelayUs);
  }
}

void ProcessCore::flush_batches() {
  uint64_t now = ctx_.now_us();
  for (auto& [g, bytes] : accum_) {
    if (bytes.empty()) continue;
    uint64_t seq = next_proposer_seq_++;
    OutgoingBatch b;
    b.group = g;
    b.value.kind = ValueKind::App;
    b.value.payload = std::move(bytes);
    b.last_sent = now;
    for (const auto& rec : unpack_batch(b.value.payload)) b.waiting.insert({rec.client_id, rec.seq});
    const RingConfig& rc = cfg_.ring_or_throw(g);
    ProposePayload p{seq, b.value};
    outgoing_.emplace(seq, std::move(b));
    stats_.proposals++;
    send_to(rc.coordinator, make_envelope(MsgType::Propose, g, self_, p));
  }
  accum_.clear();
  // same deadline-reset hazard as phase 2: only arm when nothing is pending
  if (!outgoing_.empty() && !proposer_timer_armed_) {
    proposer_timer_armed_ = true;
    ctx_.set_timer(timer_token(kTimerProposer), uint64_t(cfg_.tuning.retransmit_timeout_ms) * 1000);
  }
}

void ProcessCore::send_reply_to_origin(GroupId g, const CommandRecord& rec, const ApplyResult& res) {
  ClientReplyPayload p;
  p.client_id = rec.client_id;
  p.seq = rec.seq;
  if (res.partial) {
    ByteWriter w;
    w.u32(res.slice_tag);
    w.u32(res.slices_expected);
    w.u8(res.status);
    w.bytes(res.result);
    p.status = kPartial;
    p.result = w.take();
  } else {
    p.status = res.status;
    p.result = res.result;
  }
  if (rec.origin_node == self_)
    deliver_reply_local(p);
  else if (ctx_.is_reachable(rec.origin_node))
    ctx_.send(rec.origin_node, make_envelope(MsgType::ClientReply, g, self_, p));
}

void ProcessCore::on_client_reply(const Envelope& e) {
  auto p = decode_client_reply(e.payload);
  if (p.client_id == 0) {
    // coordinator ack for one of our proposals
    auto it = outgoing_.find(p.seq);
    if (it != outgoing_.end()) it->second.acked = true;
    return;
  }
  deliver_reply_local(p);
}

void ProcessCore::deliver_reply_local(const ClientReplyPayload& p) {
  auto rit = replied_.find(p.client_id);
  if (rit != replied_.end() && rit->second >= p.seq) return;  // duplicate
  auto ait = aggregates_.find(p.client_id);
  if (ait == aggregates_.end() || ait->second.seq != p.seq) return;
  ReplyAggregate& ag = ait->second;
  if (p.status != kPartial) {
    finish_client_reply(p.client_id, p.seq, p.status, p.result);
    return;
  }
  ByteReader r(p.result);
  uint32_t tag = r.u32();
  uint32_t expected = r.u32();
  uint8_t status = r.u8();
  ag.slices[tag] = {status, r.rest()};
  ag.expected = expected;
  if (ag.slices.size() < ag.expected) return;
  uint8_t final_status = kOk;
  std::map<uint32_t, std::vector<uint8_t>> parts;
  for (auto& [t, sv] : ag.slices) {
    if (sv.first != kOk) final_status = sv.first;
    parts[t] = std::move(sv.second);
  }
  auto sit = services_.find(static_cast<ServiceKind>(ag.service));
  std::vector<uint8_t> combined =
      sit != services_.end() ? sit->second->combine_slices(parts) : std::vector<uint8_t>{};
  finish_client_reply(p.client_id, p.seq, final_status, std::move(combined));
}

void ProcessCore::finish_client_reply(uint64_t client, uint64_t seq, uint8_t status,
                                      std::vector<uint8_t> result) {
  ClientReplyPayload rep{client, seq, status, std::move(result)};
  ctx_.send_client(client, make_envelope(MsgType::ClientReply, 0, self_, rep));
  replied_[client] = seq;
  aggregates_.erase(client);
  stats_.replies_sent++;
  for (auto it = outgoing_.begin(); it != outgoing_.end();) {
    it->second.waiting.erase({client, seq});
    if (it->second.waiting.empty())
      it = outgoing_.erase(it);
    else
      ++it;
  }
}

}  // namespace mrp
