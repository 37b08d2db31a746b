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

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "mrp/checkpoint.hpp"
#include "mrp/config.hpp"
#include "mrp/envelope.hpp"
#include "mrp/merge.hpp"
#include "mrp/service.hpp"
#include "mrp/stable_log.hpp"
#include "mrp/storage.hpp"

namespace mrp {

// Protocol events surfaced to the harness; the simulator records them for
// the property checkers.
struct TraceEvent {
  enum class Kind : uint8_t {
    Decide,      // group, instance, span, value_id
    Deliver,     // group, instance, client_id, seq, service
    Checkpoint,  // tuple, value_id carries the state digest
    Trim,        // group, instance = trim point
    Recovered,   // tuple = recovery target
  };
  Kind kind = Kind::Decide;
  ProcessId node = 0;
  GroupId group = 0;
  InstanceId instance = 0;
  InstanceId span = 1;
  uint64_t value_id = 0;
  uint64_t client_id = 0;
  uint64_t seq = 0;
  uint8_t service = 0;
  CheckpointTuple tuple;
};

// Everything a ProcessCore needs from its host: the event loop owns the
// sockets, timers and clock; the core owns the protocol state.
class NodeContext {
 public:
  virtual ~NodeContext() = default;
  virtual void send(ProcessId to, const Envelope& e) = 0;
  virtual void send_client(uint64_t client_id, const Envelope& e) = 0;
  // Single-shot; setting an armed token moves its deadline.
  virtual void set_timer(uint32_t token, uint64_t delay_us) = 0;
  virtual void cancel_timer(uint32_t token) = 0;
  virtual uint64_t now_us() = 0;
  virtual StorageEnv& storage() = 0;
  // Failure-detector hint; used to route around crashed ring members.
  virtual bool is_reachable(ProcessId p) = 0;
  virtual void trace(const TraceEvent&) {}
};

enum TimerKind : uint8_t {
  kTimerRate = 1,      // coordinator, per ring
  kTimerTrim = 2,      // coordinator, per ring
  kTimerPhase1 = 3,    // coordinator, per ring
  kTimerPhase2 = 4,    // coordinator, per ring
  kTimerFlush = 5,     // proposer batch flush
  kTimerProposer = 6,  // proposer resend until coordinator ack
  kTimerGap = 7,       // learner retransmit check
  kTimerRecover = 8,   // learner recovery retry
};

constexpr uint32_t timer_token(TimerKind k, GroupId g = 0) {
  return static_cast<uint32_t>(k) | (static_cast<uint32_t>(g) << 8);
}
constexpr TimerKind timer_kind(uint32_t token) { return static_cast<TimerKind>(token & 0xFF); }
constexpr GroupId timer_group(uint32_t token) { return static_cast<GroupId>(token >> 8); }

struct NodeStats {
  uint64_t proposals = 0;      // values this node sent to coordinators
  uint64_t decided = 0;        // decisions observed (first copy)
  uint64_t delivered = 0;      // command records applied
  uint64_t skipped = 0;        // skip instances consumed
  uint64_t checkpoints = 0;
  uint64_t trims = 0;
  uint64_t retransmit_requests = 0;
  uint64_t replies_sent = 0;   // client replies from this node
};

// The whole protocol stack of one process, sans I/O: ring coordinator and
// acceptor, deterministic-merge learner, checkpoint/trim/recovery, and the
// client-facing front end.  Driven by on_message/on_timer from a host.
class ProcessCore {
 public:
  ProcessCore(const ClusterConfig& cfg, ProcessId self, NodeContext& ctx);
  ~ProcessCore();

  void start();
  void on_message(const Envelope& e);
  void on_timer(uint32_t token);

  ProcessId id() const { return self_; }
  const NodeStats& stats() const { return stats_; }
  // Learner recovery finished (or not needed); deliveries flow.
  bool ready() const { return !recovering_; }
  const CheckpointTuple& consumed() const;
  uint64_t service_digest(ServiceKind k) const;
  uint64_t combined_digest() const;
  const Service* service(ServiceKind k) const;
  // Decided record covering instance i of group g, if buffered.
  std::optional<DecidedSource::Rec> decided_covering(GroupId g, InstanceId i) const;

 private:
  struct InFlight {
    ProposedValue value;
    uint64_t value_id = 0;
    uint64_t sent_at = 0;
  };

  struct QueuedProposal {
    ProcessId origin = 0;
    uint64_t proposer_seq = 0;
    ProposedValue value;
  };

  struct CoordState {
    Ballot ballot;
    InstanceId next = 0;
    InstanceId window_end = 0;  // quorum-promised phase 1 window
    bool phase1_running = false;
    InstanceId phase1_target = 0;
    std::map<ProcessId, Phase1BPayload> phase1_replies;
    std::map<InstanceId, InFlight> inflight;
    bool phase2_timer_armed = false;
    std::map<std::pair<ProcessId, uint64_t>, InstanceId> assigned;  // proposal dedup
    std::deque<QueuedProposal> backlog;  // waits for a usable window
    std::set<std::pair<ProcessId, uint64_t>> queued;  // dedup for the backlog
    bool draining = false;
    std::unique_ptr<SkipPolicy> skips;
    InstanceId trim_point = 0;
    uint32_t trim_round = 0;
    std::map<ProcessId, InstanceId> trim_replies;
  };

  struct AcceptorState {
    std::unique_ptr<StableLog> log;
  };

  struct RingState {
    const RingConfig* cfg = nullptr;
    std::unique_ptr<CoordState> coord;    // iff self is the coordinator
    std::unique_ptr<AcceptorState> acc;   // iff self is an acceptor
    // subscribed learners buffer decided values until merged
    std::map<InstanceId, ProposedValue> decided;  // base instance -> value
    InstanceId decided_floor = 0;  // everything below is consumed or trimmed
    uint64_t blocked_since = 0;    // 0 = not blocked
    size_t retransmit_rotate = 0;
  };

  struct OutgoingBatch {
    GroupId group = 0;
    ProposedValue value;
    uint64_t last_sent = 0;
    bool acked = false;  // coordinator saw it; resend cadence slows
    uint32_t attempts = 0;
    std::set<std::pair<uint64_t, uint64_t>> waiting;  // (client, seq) not yet answered
  };

  struct ReplyAggregate {
    uint64_t seq = 0;
    uint8_t service = 0;
    std::map<uint32_t, std::pair<uint8_t, std::vector<uint8_t>>> slices;
    uint32_t expected = 0;
  };

  struct RecoveryState {
    uint32_t nonce = 0;
    std::map<ProcessId, CkptReplyPayload> replies;
    bool fetching = false;
    CheckpointTuple target;
    ProcessId source = 0;
    std::vector<uint8_t> blob;
    uint64_t received = 0;
  };

  // plumbing
  RingState& ring_state(GroupId g);
  void send_to(ProcessId to, const Envelope& e);
  // Forwards along the ring, skipping unreachable members.  Stops before
  // the flow origin unless `through_origin` (phase 2 returns to its
  // coordinator, decisions do not revisit their creator).
  void send_ring(const RingConfig& r, const Envelope& e, ProcessId flow_origin, bool through_origin);

  // coordinator
  void start_phase1(GroupId g, InstanceId target_end);
  void on_phase1b(const Envelope& e);
  void coord_assign(GroupId g, ProposedValue value, ProcessId origin, uint64_t proposer_seq);
  void coord_drain_backlog(GroupId g);
  void arm_phase2_timer(GroupId g, CoordState& cs);
  void coord_send_phase2(GroupId g, InstanceId instance, const InFlight& f);
  void on_propose(const Envelope& e);
  void on_phase2_return(const Envelope& e, const Phase2Payload& p);
  void on_rate_tick(GroupId g);
  void on_trim_tick(GroupId g);
  void on_trim_reply(const Envelope& e);

  // acceptor
  void on_phase1a(const Envelope& e);
  void on_phase2(const Envelope& e);
  void on_trim(const Envelope& e);
  void on_retransmit(const Envelope& e);

  // learner
  void on_decision(const Envelope& e);
  bool note_decided(GroupId g, InstanceId base, ProposedValue value, uint64_t value_id);
  void drive_merge();
  void apply_delivery(const MergeDelivery& d);
  void maybe_checkpoint();
  void write_checkpoint();
  void check_gaps();
  void start_recovery();
  void on_ckpt_query(const Envelope& e);
  void on_ckpt_reply(const Envelope& e);
  void on_ckpt_fetch(const Envelope& e);
  void on_ckpt_chunk(const Envelope& e);
  void finish_recovery(const CheckpointTuple& target);
  void install_checkpoint(const Checkpoint& c);
  std::vector<uint8_t> serialize_services() const;
  void deserialize_services(std::span<const uint8_t> blob);

  // front end
  void on_client_request(const Envelope& e);
  void flush_batches();
  void on_client_reply(const Envelope& e);
  void deliver_reply_local(const ClientReplyPayload& p);
  void send_reply_to_origin(GroupId g, const CommandRecord& rec, const ApplyResult& res);
  void finish_client_reply(uint64_t client, uint64_t seq, uint8_t status, std::vector<uint8_t> result);

  const ClusterConfig& cfg_;
  ProcessId self_;
  NodeContext& ctx_;
  NodeStats stats_;

  std::map<GroupId, RingState> rings_;
  std::map<ServiceKind, std::unique_ptr<Service>> services_;
  std::unique_ptr<MergeCursor> cursor_;
  bool is_learner_ = false;
  bool recovering_ = false;
  RecoveryState recovery_;
  Partition my_partition_;
  bool have_ckpt_ = false;
  uint64_t ckpt_digest_ = 0;          // digest at last durable checkpoint
  CheckpointTuple ckpt_tuple_;        // tuple of last durable checkpoint
  uint64_t last_ckpt_consumed_ = 0;   // total instances consumed at that point

  // front end
  uint64_t next_proposer_seq_ = 1;
  std::map<GroupId, std::vector<uint8_t>> accum_;  // batch under construction
  std::map<uint64_t, OutgoingBatch> outgoing_;           // proposer_seq -> batch
  bool proposer_timer_armed_ = false;
  bool flush_timer_armed_ = false;
  std::map<uint64_t, ReplyAggregate> aggregates_;        // client_id -> pending reply
  std::map<uint64_t, uint64_t> replied_;                 // client_id -> last seq answered
};

}  // namespace mrp
