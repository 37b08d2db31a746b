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

#include "mrp/sim.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "mrp/envelope.hpp"

namespace mrp {

namespace {
constexpr uint64_t kClientRetryUs = 250000;
}

std::vector<ScenarioEvent> parse_scenario(const std::string& text) {
  std::vector<ScenarioEvent> out;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    auto fail = [&](const std::string& why) {
      throw ConfigError("scenario line " + std::to_string(lineno) + ": " + why);
    };
    if (word != "at") fail("expected 'at'");
    ScenarioEvent ev;
    if (!(ls >> ev.at_ms)) fail("expected a millisecond timestamp");
    std::string verb;
    if (!(ls >> verb)) fail("expected a verb");
    if (verb == "propose") {
      ev.kind = ScenarioEvent::Kind::Propose;
      uint64_t g, sz;
      if (!(ls >> g >> sz)) fail("propose needs <group> <size>");
      ev.group = static_cast<GroupId>(g);
      ev.size = static_cast<uint32_t>(sz);
    } else if (verb == "crash" || verb == "restart") {
      ev.kind = verb == "crash" ? ScenarioEvent::Kind::Crash : ScenarioEvent::Kind::Restart;
      uint64_t p;
      if (!(ls >> p)) fail(verb + " needs <pid>");
      ev.pid = static_cast<ProcessId>(p);
    } else {
      fail("unknown verb '" + verb + "'");
    }
    std::string extra;
    if (ls >> extra) fail("trailing token '" + extra + "'");
    out.push_back(ev);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ScenarioEvent& a, const ScenarioEvent& b) { return a.at_ms < b.at_ms; });
  return out;
}

std::vector<ScenarioEvent> parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

Scenario parse_scenario_doc(const std::string& text) {
  Scenario s;
  std::istringstream in(text);
  std::string line, rest;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    if (ls >> word && word == "config") {
      if (!(ls >> s.config_path)) throw ConfigError("scenario: config directive without a path");
      continue;
    }
    rest += line;
    rest += '\n';
  }
  s.events = parse_scenario(rest);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  Scenario s = parse_scenario_doc(ss.str());
  if (!s.config_path.empty() && s.config_path[0] != '/') {
    auto slash = path.rfind('/');
    if (slash != std::string::npos) s.config_path = path.substr(0, slash + 1) + s.config_path;
  }
  return s;
}

class SimCtx : public NodeContext {
 public:
  SimCtx(SimNet& net, SimNet::Node& node) : net_(net), node_(node) {}

  void send(ProcessId to, const Envelope& e) override { net_.enqueue_message(node_.id, to, e); }
  void send_client(uint64_t client_id, const Envelope& e) override { net_.client_reply(client_id, e); }
  void set_timer(uint32_t token, uint64_t delay_us) override {
    uint64_t arm = ++net_.next_seq_;
    node_.timer_arms[token] = arm;
    SimNet::Event ev;
    ev.at = net_.now_ + delay_us;
    ev.seq = ++net_.next_seq_;
    ev.kind = SimNet::Event::Kind::Timer;
    ev.target = node_.id;
    ev.gen = node_.gen;
    ev.token = token;
    ev.arm_seq = arm;
    net_.queue_.push(std::move(ev));
  }
  void cancel_timer(uint32_t token) override { node_.timer_arms.erase(token); }
  uint64_t now_us() override { return net_.now_; }
  StorageEnv& storage() override { return node_.env; }
  bool is_reachable(ProcessId p) override { return net_.up(p); }
  void trace(const TraceEvent& ev) override { net_.record(ev); }

 private:
  SimNet& net_;
  SimNet::Node& node_;
};

SimNet::SimNet(const ClusterConfig& cfg, uint64_t seed) : cfg_(cfg), rng_(seed) {
  for (const auto& [pid, info] : cfg_.processes) {
    Node& n = nodes_[pid];
    n.id = pid;
    n.up = true;
    n.ctx = std::make_unique<SimCtx>(*this, n);
    n.core = std::make_unique<ProcessCore>(cfg_, pid, *n.ctx);
    if (info.has_role(Role::Proposer)) proposers_.push_back(pid);
  }
  for (auto& [pid, n] : nodes_) n.core->start();
}

SimNet::~SimNet() = default;

ProcessCore* SimNet::core(ProcessId p) {
  auto it = nodes_.find(p);
  return it != nodes_.end() && it->second.core ? it->second.core.get() : nullptr;
}

const SimCommand* SimNet::command(uint64_t client_id) const {
  auto it = commands_.find(client_id);
  return it == commands_.end() ? nullptr : &it->second;
}

bool SimNet::up(ProcessId p) const {
  auto it = nodes_.find(p);
  return it != nodes_.end() && it->second.up;
}

void SimNet::push(Event ev) {
  ev.seq = ++next_seq_;
  queue_.push(std::move(ev));
}

void SimNet::enqueue_message(ProcessId from, ProcessId to, const Envelope& e) {
  auto it = nodes_.find(to);
  if (it == nodes_.end()) return;
  std::uniform_int_distribution<uint64_t> d(min_delay_us_, max_delay_us_);
  uint64_t& last = link_last_[{from, to}];
  uint64_t at = std::max(now_ + d(rng_), last);  // FIFO per link
  last = at;
  Event ev;
  ev.at = at;
  ev.kind = Event::Kind::Deliver;
  ev.target = to;
  ev.gen = it->second.gen;
  ev.env = e;
  push(std::move(ev));
}

ProcessId SimNet::pick_proposer() {
  if (proposers_.empty()) throw ConfigError("no process has the proposer role");
  for (size_t i = 0; i < proposers_.size(); ++i) {
    ProcessId p = proposers_[proposer_rr_++ % proposers_.size()];
    if (up(p)) return p;
  }
  return proposers_[proposer_rr_ % proposers_.size()];
}

uint64_t SimNet::submit(ServiceKind svc, std::vector<uint8_t> body, ProcessId target) {
  SimCommand cmd;
  cmd.client_id = next_client_++;
  cmd.service = svc;
  cmd.body = std::move(body);
  try {
    cmd.group = route_command(svc, cmd.body, cfg_);
  } catch (const std::exception&) {
    cmd.group = 0;
  }
  cmd.target = target != 0 ? target : pick_proposer();
  cmd.sent_at = now_;
  auto [it, fresh] = commands_.emplace(cmd.client_id, std::move(cmd));
  (void)fresh;
  send_command(it->second);
  Event retry;
  retry.at = now_ + kClientRetryUs;
  retry.kind = Event::Kind::ClientRetry;
  retry.client_id = it->second.client_id;
  push(std::move(retry));
  return it->second.client_id;
}

void SimNet::send_command(SimCommand& cmd) {
  if (!up(cmd.target)) cmd.target = pick_proposer();
  ClientRequestPayload p;
  p.client_id = cmd.client_id;
  p.seq = cmd.seq;
  p.service = static_cast<uint8_t>(cmd.service);
  p.command = cmd.body;
  enqueue_message(kClientOrigin, cmd.target,
                  make_envelope(MsgType::ClientRequest, 0, kClientOrigin, p));
}

void SimNet::client_reply(uint64_t client_id, const Envelope& e) {
  auto it = commands_.find(client_id);
  if (it == commands_.end()) return;
  SimCommand& cmd = it->second;
  if (cmd.replied) return;
  auto p = decode_client_reply(e.payload);
  if (p.seq != cmd.seq) return;
  cmd.replied = true;
  cmd.status = p.status;
  cmd.result = std::move(p.result);
  cmd.replied_at = now_;
}

void SimNet::crash(ProcessId p) {
  Node& n = nodes_.at(p);
  if (!n.up) return;
  n.up = false;
  n.gen++;
  n.core.reset();
  n.ctx.reset();
  n.timer_arms.clear();
}

void SimNet::restart(ProcessId p) {
  Node& n = nodes_.at(p);
  if (n.up) return;
  n.up = true;
  n.ctx = std::make_unique<SimCtx>(*this, n);
  n.core = std::make_unique<ProcessCore>(cfg_, p, *n.ctx);
  n.core->start();
}

void SimNet::dispatch(Event& ev) {
  auto it = nodes_.find(ev.target);
  switch (ev.kind) {
    case Event::Kind::Deliver: {
      if (it == nodes_.end() || !it->second.up || it->second.gen != ev.gen) return;
      deliveries_++;
      it->second.core->on_message(ev.env);
      return;
    }
    case Event::Kind::Timer: {
      if (it == nodes_.end() || !it->second.up || it->second.gen != ev.gen) return;
      auto arm = it->second.timer_arms.find(ev.token);
      if (arm == it->second.timer_arms.end() || arm->second != ev.arm_seq) return;
      it->second.timer_arms.erase(arm);
      it->second.core->on_timer(ev.token);
      return;
    }
    case Event::Kind::ClientRetry: {
      auto cit = commands_.find(ev.client_id);
      if (cit == commands_.end() || cit->second.replied) return;
      send_command(cit->second);
      Event retry;
      retry.at = now_ + kClientRetryUs;
      retry.kind = Event::Kind::ClientRetry;
      retry.client_id = ev.client_id;
      push(std::move(retry));
      return;
    }
  }
}

void SimNet::run_until(uint64_t until_us) {
  while (!queue_.empty() && queue_.top().at <= until_us) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = std::max(now_, ev.at);
    dispatch(ev);
  }
  now_ = std::max(now_, until_us);
}

bool SimNet::run_until_replied(uint64_t client_id, uint64_t max_us) {
  uint64_t deadline = now_ + max_us;
  while (now_ < deadline) {
    const SimCommand* c = command(client_id);
    if (c && c->replied) return true;
    if (queue_.empty()) break;
    uint64_t step = std::min(queue_.top().at, deadline);
    run_until(std::max(step, now_));
  }
  const SimCommand* c = command(client_id);
  return c && c->replied;
}

void SimNet::play(const std::vector<ScenarioEvent>& scenario, uint64_t drain_us) {
  uint64_t end_ms = 0;
  for (const auto& ev : scenario) {
    run_until(ev.at_ms * 1000);
    end_ms = std::max(end_ms, ev.at_ms);
    switch (ev.kind) {
      case ScenarioEvent::Kind::Propose: {
        std::vector<uint8_t> body(std::max<uint32_t>(ev.size, 2));
        body[0] = static_cast<uint8_t>(ev.group >> 8);
        body[1] = static_cast<uint8_t>(ev.group & 0xFF);
        for (size_t i = 2; i < body.size(); ++i)
          body[i] = static_cast<uint8_t>(rng_() & 0xFF);
        submit(ServiceKind::Dummy, std::move(body));
        break;
      }
      case ScenarioEvent::Kind::Crash:
        crash(ev.pid);
        break;
      case ScenarioEvent::Kind::Restart:
        restart(ev.pid);
        break;
    }
  }
  run_until(end_ms * 1000 + drain_us);
}

}  // namespace mrp
