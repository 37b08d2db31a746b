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
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "mrp/config.hpp"
#include "mrp/node.hpp"
#include "mrp/storage.hpp"

namespace mrp {

// One line of a scenario file:
//   at <ms> propose <group> <size>
//   at <ms> crash <pid>
//   at <ms> restart <pid>
struct ScenarioEvent {
  enum class Kind : uint8_t { Propose, Crash, Restart };
  uint64_t at_ms = 0;
  Kind kind = Kind::Propose;
  GroupId group = 0;
  uint32_t size = 0;
  ProcessId pid = 0;
};

std::vector<ScenarioEvent> parse_scenario(const std::string& text);
std::vector<ScenarioEvent> parse_scenario_file(const std::string& path);

// A scenario document: an optional `config <path>` directive naming the
// cluster configuration, then event lines.
struct Scenario {
  std::string config_path;
  std::vector<ScenarioEvent> events;
};

Scenario parse_scenario_doc(const std::string& text);
// Resolves a relative config path against the scenario file's directory.
Scenario load_scenario(const std::string& path);

struct TimedTrace {
  uint64_t at_us = 0;
  TraceEvent ev;
};

// One injected client command and its fate.
struct SimCommand {
  uint64_t client_id = 0;
  uint64_t seq = 1;
  ServiceKind service = ServiceKind::Dummy;
  std::vector<uint8_t> body;
  GroupId group = 0;          // routing result, for the checkers
  ProcessId target = 0;       // node it was submitted to
  uint64_t sent_at = 0;
  bool replied = false;
  uint8_t status = 0;
  std::vector<uint8_t> result;
  uint64_t replied_at = 0;
};

// Deterministic single-threaded cluster simulation: virtual time, seeded
// link delays, per-link FIFO delivery, crash/restart with persistent
// in-memory storage.  Identical seeds and inputs replay identically.
class SimNet {
 public:
  SimNet(const ClusterConfig& cfg, uint64_t seed);
  ~SimNet();

  // Submits one client command to `target` (0 = pick a proposer round-robin).
  // The simulated client retries on silence until a reply arrives.
  uint64_t submit(ServiceKind svc, std::vector<uint8_t> body, ProcessId target = 0);

  void crash(ProcessId p);
  void restart(ProcessId p);
  bool up(ProcessId p) const;

  // Runs until virtual time reaches `until_us`.
  void run_until(uint64_t until_us);
  void run_for(uint64_t us) { run_until(now_ + us); }
  // Runs until the command has a reply, up to `max_us` more virtual time.
  bool run_until_replied(uint64_t client_id, uint64_t max_us);

  void play(const std::vector<ScenarioEvent>& scenario, uint64_t drain_us);

  uint64_t now_us() const { return now_; }
  ProcessCore* core(ProcessId p);
  const SimCommand* command(uint64_t client_id) const;
  const std::map<uint64_t, SimCommand>& commands() const { return commands_; }
  const std::vector<TimedTrace>& trace() const { return trace_; }
  size_t messages_delivered() const { return deliveries_; }

 private:
  friend class SimCtx;

  struct Event {
    uint64_t at = 0;
    uint64_t seq = 0;
    enum class Kind : uint8_t { Deliver, Timer, ClientRetry } kind = Kind::Deliver;
    ProcessId target = 0;
    uint32_t gen = 0;
    Envelope env;          // Deliver
    uint32_t token = 0;    // Timer
    uint64_t arm_seq = 0;  // Timer
    uint64_t client_id = 0;  // ClientRetry
  };
  struct EventOrder {
    bool operator()(const Event& a, const Event& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  struct Node {
    ProcessId id = 0;
    bool up = false;
    uint32_t gen = 0;
    MemStorageEnv env;  // survives crashes
    std::unique_ptr<class SimCtx> ctx;
    std::unique_ptr<ProcessCore> core;
    std::map<uint32_t, uint64_t> timer_arms;
  };

  void push(Event ev);
  void enqueue_message(ProcessId from, ProcessId to, const Envelope& e);
  void client_reply(uint64_t client_id, const Envelope& e);
  void record(const TraceEvent& ev) { trace_.push_back({now_, ev}); }
  void dispatch(Event& ev);
  void send_command(SimCommand& cmd);
  ProcessId pick_proposer();

  const ClusterConfig& cfg_;
  std::mt19937_64 rng_;
  uint64_t now_ = 0;
  uint64_t next_seq_ = 0;
  uint64_t min_delay_us_ = 100;
  uint64_t max_delay_us_ = 1500;
  std::priority_queue<Event, std::vector<Event>, EventOrder> queue_;
  std::map<ProcessId, Node> nodes_;
  std::map<std::pair<ProcessId, ProcessId>, uint64_t> link_last_;
  std::map<uint64_t, SimCommand> commands_;
  uint64_t next_client_ = 1;
  size_t proposer_rr_ = 0;
  std::vector<ProcessId> proposers_;
  std::vector<TimedTrace> trace_;
  size_t deliveries_ = 0;
};

}  // namespace mrp
