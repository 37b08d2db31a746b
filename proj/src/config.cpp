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

#include "mrp/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mrp/hash.hpp"

namespace mrp {

bool RingConfig::is_member(ProcessId p) const {
  return std::find(members.begin(), members.end(), p) != members.end();
}

bool RingConfig::is_acceptor(ProcessId p) const {
  return std::find(acceptors.begin(), acceptors.end(), p) != acceptors.end();
}

ProcessId RingConfig::successor(ProcessId p) const {
  auto it = std::find(members.begin(), members.end(), p);
  if (it == members.end()) throw ConfigError("successor of non-member process");
  ++it;
  return it == members.end() ? members.front() : *it;
}

size_t RingConfig::distance(ProcessId from, ProcessId to) const {
  auto a = std::find(members.begin(), members.end(), from);
  auto b = std::find(members.begin(), members.end(), to);
  if (a == members.end() || b == members.end()) throw ConfigError("distance of non-member process");
  size_t ia = static_cast<size_t>(a - members.begin());
  size_t ib = static_cast<size_t>(b - members.begin());
  size_t n = members.size();
  return (ib + n - ia) % n;
}

ProcessId RingConfig::last_acceptor() const {
  ProcessId best = coordinator;
  size_t best_d = 0;
  for (ProcessId a : acceptors) {
    size_t d = distance(coordinator, a);
    if (d >= best_d) {
      best_d = d;
      best = a;
    }
  }
  return best;
}

const RingConfig* ClusterConfig::ring(GroupId g) const {
  for (const auto& r : rings)
    if (r.group == g) return &r;
  return nullptr;
}

const RingConfig& ClusterConfig::ring_or_throw(GroupId g) const {
  const RingConfig* r = ring(g);
  if (!r) throw ConfigError("unknown group " + std::to_string(g));
  return *r;
}

const ProcessInfo& ClusterConfig::process(ProcessId p) const {
  auto it = processes.find(p);
  if (it == processes.end()) throw ConfigError("unknown process " + std::to_string(p));
  return it->second;
}

uint64_t ClusterConfig::interval_budget() const {
  // ceil(lambda * delta)
  uint64_t num = static_cast<uint64_t>(tuning.lambda) * tuning.delta_ms;
  return (num + 999) / 1000;
}

namespace {

struct Section {
  std::string name;
  int line = 0;
  std::vector<std::pair<std::string, std::string>> entries;  // key, value
};

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

uint64_t parse_uint(const std::string& s, const std::string& what, uint64_t max) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("invalid " + what + ": '" + s + "'");
  uint64_t v = std::stoull(s);
  if (v > max) throw ConfigError(what + " out of range: " + s);
  return v;
}

bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "on" || s == "true" || s == "1" || s == "sync") return true;
  if (s == "off" || s == "false" || s == "0" || s == "async") return false;
  throw ConfigError("invalid " + what + ": '" + s + "'");
}

std::vector<Section> parse_sections(const std::string& text) {
  std::vector<Section> out;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    size_t hash = s.find_first_of("#;");
    if (hash != std::string::npos) s = trim(s.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("line " + std::to_string(line) + ": unterminated section header");
      out.push_back(Section{trim(s.substr(1, s.size() - 2)), line, {}});
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'");
    if (out.empty()) throw ConfigError("line " + std::to_string(line) + ": entry before any section");
    out.back().entries.emplace_back(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return out;
}

void apply_tuning(Tuning& t, const Section& sec) {
  for (const auto& [key, val] : sec.entries) {
    if (key == "m")
      t.merge_window = static_cast<uint32_t>(parse_uint(val, "m", 1 << 20));
    else if (key == "delta_ms")
      t.delta_ms = static_cast<uint32_t>(parse_uint(val, "delta_ms", 1 << 30));
    else if (key == "lambda")
      t.lambda = static_cast<uint32_t>(parse_uint(val, "lambda", 1u << 31));
    else if (key == "batch_limit")
      t.batch_limit = static_cast<uint32_t>(parse_uint(val, "batch_limit", 1u << 30));
    else if (key == "buffer_slots")
      t.buffer_slots = static_cast<uint32_t>(parse_uint(val, "buffer_slots", 1u << 30));
    else if (key == "slot_size")
      t.slot_size = static_cast<uint32_t>(parse_uint(val, "slot_size", 1u << 30));
    else if (key == "sync_log")
      t.sync_log = parse_bool(val, "sync_log");
    else if (key == "rate_leveling")
      t.rate_leveling = parse_bool(val, "rate_leveling");
    else if (key == "checkpoint_interval")
      t.checkpoint_interval = parse_uint(val, "checkpoint_interval", uint64_t(1) << 62);
    else if (key == "phase1_window")
      t.phase1_window = parse_uint(val, "phase1_window", uint64_t(1) << 32);
    else if (key == "trim_interval_ms")
      t.trim_interval_ms = static_cast<uint32_t>(parse_uint(val, "trim_interval_ms", 1u << 30));
    else if (key == "retransmit_timeout_ms")
      t.retransmit_timeout_ms = static_cast<uint32_t>(parse_uint(val, "retransmit_timeout_ms", 1u << 30));
    else
      throw ConfigError("unknown [tuning] key '" + key + "'");
  }
}

uint8_t parse_roles(const std::string& val) {
  uint8_t roles = 0;
  for (const auto& tok : split_ws(val)) {
    if (tok == "proposer")
      roles |= static_cast<uint8_t>(Role::Proposer);
    else if (tok == "acceptor")
      roles |= static_cast<uint8_t>(Role::Acceptor);
    else if (tok == "learner")
      roles |= static_cast<uint8_t>(Role::Learner);
    else
      throw ConfigError("unknown role '" + tok + "'");
  }
  return roles;
}

void validate(ClusterConfig& cfg) {
  std::sort(cfg.rings.begin(), cfg.rings.end(),
            [](const RingConfig& a, const RingConfig& b) { return a.group < b.group; });
  for (size_t i = 1; i < cfg.rings.size(); ++i)
    if (cfg.rings[i].group == cfg.rings[i - 1].group)
      throw ConfigError("duplicate ring " + std::to_string(cfg.rings[i].group));

  for (auto& r : cfg.rings) {
    if (r.members.empty()) throw ConfigError("ring " + std::to_string(r.group) + " has no members");
    std::set<ProcessId> seen;
    for (ProcessId p : r.members) {
      if (!cfg.processes.count(p))
        throw ConfigError("ring " + std::to_string(r.group) + " references undeclared process " + std::to_string(p));
      if (!seen.insert(p).second)
        throw ConfigError("ring " + std::to_string(r.group) + " repeats member " + std::to_string(p));
    }
    if (r.acceptors.empty()) throw ConfigError("ring " + std::to_string(r.group) + " has no acceptors");
    for (ProcessId a : r.acceptors) {
      if (!r.is_member(a))
        throw ConfigError("ring " + std::to_string(r.group) + ": acceptor " + std::to_string(a) + " is not a member");
      if (!cfg.process(a).has_role(Role::Acceptor))
        throw ConfigError("process " + std::to_string(a) + " is an acceptor of ring " + std::to_string(r.group) +
                          " but lacks the acceptor role");
    }
    if (!r.is_acceptor(r.coordinator))
      throw ConfigError("ring " + std::to_string(r.group) + ": coordinator " + std::to_string(r.coordinator) +
                        " is not in its acceptor set");
    // keep acceptors in ring order starting at the coordinator
    std::sort(r.acceptors.begin(), r.acceptors.end(), [&](ProcessId a, ProcessId b) {
      return r.distance(r.coordinator, a) < r.distance(r.coordinator, b);
    });
    r.quorum_size = r.acceptors.size() / 2 + 1;
  }

  for (auto& [pid, info] : cfg.processes) {
    for (GroupId g : info.subscriptions) {
      if (!cfg.ring(g))
        throw ConfigError("process " + std::to_string(pid) + " subscribes to unknown group " + std::to_string(g));
      if (!info.has_role(Role::Learner))
        throw ConfigError("process " + std::to_string(pid) + " subscribes but lacks the learner role");
      if (!cfg.ring(g)->is_member(pid))
        throw ConfigError("process " + std::to_string(pid) + " subscribes to group " + std::to_string(g) +
                          " but is not in its ring");
    }
  }

  if (cfg.tuning.merge_window < 1) throw ConfigError("m must be >= 1");
  if (cfg.tuning.delta_ms == 0) throw ConfigError("delta_ms must be > 0");
  if (cfg.tuning.lambda == 0) throw ConfigError("lambda must be > 0");

  if (cfg.kvstore) {
    const auto& kv = *cfg.kvstore;
    if (kv.groups.empty()) throw ConfigError("[kvstore] groups must be non-empty");
    for (GroupId g : kv.groups) cfg.ring_or_throw(g);
    cfg.ring_or_throw(kv.global_group);
    if (kv.mode == PartitionMode::Range) {
      if (kv.splits.size() + 1 != kv.groups.size())
        throw ConfigError("[kvstore] range mode needs |groups|-1 split keys");
      if (!std::is_sorted(kv.splits.begin(), kv.splits.end()))
        throw ConfigError("[kvstore] split keys must be sorted");
    } else if (!kv.splits.empty()) {
      throw ConfigError("[kvstore] splits are only valid in range mode");
    }
  }
  if (cfg.dlog) {
    for (const auto& [log, g] : cfg.dlog->logs) {
      (void)log;
      cfg.ring_or_throw(g);
    }
    cfg.ring_or_throw(cfg.dlog->global_group);
  }

  // partitions: learners grouped by identical subscription sets
  std::map<std::set<GroupId>, Partition> parts;
  for (const auto& [pid, info] : cfg.processes) {
    if (!info.has_role(Role::Learner) || info.subscriptions.empty()) continue;
    auto& part = parts[info.subscriptions];
    part.groups = info.subscriptions;
    part.replicas.insert(pid);
  }
  cfg.partitions.clear();
  for (auto& [groups, part] : parts) cfg.partitions.push_back(part);
}

}  // namespace

ClusterConfig load_config(const std::string& text) {
  ClusterConfig cfg;
  cfg.digest = fnv1a64(text);
  for (const Section& sec : parse_sections(text)) {
    auto words = split_ws(sec.name);
    if (words.size() == 2 && words[0] == "ring") {
      RingConfig r;
      r.group = static_cast<GroupId>(parse_uint(words[1], "ring id", 0xFFFE));
      bool have_coord = false;
      for (const auto& [key, val] : sec.entries) {
        if (key == "members") {
          for (const auto& tok : split_ws(val))
            r.members.push_back(static_cast<ProcessId>(parse_uint(tok, "member id", 0xFFFE)));
        } else if (key == "acceptors") {
          for (const auto& tok : split_ws(val))
            r.acceptors.push_back(static_cast<ProcessId>(parse_uint(tok, "acceptor id", 0xFFFE)));
        } else if (key == "coordinator") {
          r.coordinator = static_cast<ProcessId>(parse_uint(val, "coordinator id", 0xFFFE));
          have_coord = true;
        } else {
          throw ConfigError("unknown [ring] key '" + key + "'");
        }
      }
      if (!have_coord) throw ConfigError("ring " + std::to_string(r.group) + " has no coordinator");
      cfg.rings.push_back(std::move(r));
    } else if (words.size() == 2 && words[0] == "process") {
      ProcessInfo info;
      info.id = static_cast<ProcessId>(parse_uint(words[1], "process id", 0xFFFE));
      if (cfg.processes.count(info.id)) throw ConfigError("duplicate process " + std::to_string(info.id));
      for (const auto& [key, val] : sec.entries) {
        if (key == "address") {
          info.address = val;
        } else if (key == "roles") {
          info.roles = parse_roles(val);
        } else if (key == "subscriptions") {
          for (const auto& tok : split_ws(val))
            info.subscriptions.insert(static_cast<GroupId>(parse_uint(tok, "subscription", 0xFFFE)));
        } else {
          throw ConfigError("unknown [process] key '" + key + "'");
        }
      }
      cfg.processes[info.id] = std::move(info);
    } else if (sec.name == "tuning") {
      apply_tuning(cfg.tuning, sec);
    } else if (sec.name == "kvstore") {
      KvStoreConfig kv;
      bool have_global = false;
      for (const auto& [key, val] : sec.entries) {
        if (key == "mode") {
          if (val == "hash")
            kv.mode = PartitionMode::Hash;
          else if (val == "range")
            kv.mode = PartitionMode::Range;
          else
            throw ConfigError("unknown kvstore mode '" + val + "'");
        } else if (key == "groups") {
          for (const auto& tok : split_ws(val))
            kv.groups.push_back(static_cast<GroupId>(parse_uint(tok, "kvstore group", 0xFFFE)));
        } else if (key == "splits") {
          kv.splits = split_ws(val);
        } else if (key == "global_group") {
          kv.global_group = static_cast<GroupId>(parse_uint(val, "global_group", 0xFFFE));
          have_global = true;
        } else {
          throw ConfigError("unknown [kvstore] key '" + key + "'");
        }
      }
      if (!have_global) throw ConfigError("[kvstore] requires global_group");
      cfg.kvstore = std::move(kv);
    } else if (sec.name == "dlog") {
      DlogConfig dl;
      bool have_global = false;
      for (const auto& [key, val] : sec.entries) {
        if (key == "logs") {
          for (const auto& tok : split_ws(val)) {
            size_t colon = tok.find(':');
            if (colon == std::string::npos) throw ConfigError("dlog logs entries are '<log>:<group>'");
            uint32_t log = static_cast<uint32_t>(parse_uint(tok.substr(0, colon), "log id", 0xFFFFFFFF));
            GroupId g = static_cast<GroupId>(parse_uint(tok.substr(colon + 1), "log group", 0xFFFE));
            dl.logs[log] = g;
          }
        } else if (key == "global_group") {
          dl.global_group = static_cast<GroupId>(parse_uint(val, "global_group", 0xFFFE));
          have_global = true;
        } else if (key == "cache_limit") {
          dl.cache_limit = parse_uint(val, "cache_limit", uint64_t(1) << 40);
        } else if (key == "sync") {
          dl.sync = parse_bool(val, "dlog sync");
        } else {
          throw ConfigError("unknown [dlog] key '" + key + "'");
        }
      }
      if (!have_global) throw ConfigError("[dlog] requires global_group");
      cfg.dlog = std::move(dl);
    } else {
      throw ConfigError("unknown section [" + sec.name + "]");
    }
  }
  validate(cfg);
  return cfg;
}

ClusterConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_config(buf.str());
}

Partition partition_of(ProcessId p, const ClusterConfig& cfg) {
  const ProcessInfo& info = cfg.process(p);
  if (!info.has_role(Role::Learner)) throw ConfigError("process " + std::to_string(p) + " is not a learner");
  for (const auto& part : cfg.partitions)
    if (part.replicas.count(p)) return part;
  throw ConfigError("process " + std::to_string(p) + " has no subscriptions");
}

}  // namespace mrp
