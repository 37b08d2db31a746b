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

#include "mrp/checkers.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "mrp/checkpoint.hpp"

namespace mrp {

namespace {

std::string where(GroupId g, InstanceId i) {
  std::ostringstream os;
  os << "group " << g << " instance " << i;
  return os.str();
}

using CmdKey = std::pair<uint64_t, uint64_t>;  // (client, seq)

// first delivery of each command per node, in delivery order
std::map<ProcessId, std::vector<CmdKey>> first_deliveries(const std::vector<TimedTrace>& trace) {
  std::map<ProcessId, std::vector<CmdKey>> out;
  std::map<ProcessId, std::set<CmdKey>> seen;
  for (const auto& t : trace) {
    if (t.ev.kind != TraceEvent::Kind::Deliver) continue;
    CmdKey k{t.ev.client_id, t.ev.seq};
    if (seen[t.ev.node].insert(k).second) out[t.ev.node].push_back(k);
  }
  return out;
}

}  // namespace

CheckResult check_agreement(const std::vector<TimedTrace>& trace) {
  CheckResult res;
  // (group, base) -> (value_id, span)
  std::map<std::pair<GroupId, InstanceId>, std::pair<uint64_t, InstanceId>> decided;
  for (const auto& t : trace) {
    if (t.ev.kind != TraceEvent::Kind::Decide) continue;
    auto key = std::make_pair(t.ev.group, t.ev.instance);
    auto val = std::make_pair(t.ev.value_id, t.ev.span);
    auto [it, fresh] = decided.emplace(key, val);
    if (!fresh && it->second != val)
      res.fail("conflicting decisions for " + where(t.ev.group, t.ev.instance));
  }
  // decided ranges must not overlap within a group
  GroupId cur_group = 0;
  InstanceId prev_end = 0;
  bool have_prev = false;
  for (const auto& [key, val] : decided) {
    if (!have_prev || key.first != cur_group) {
      cur_group = key.first;
      have_prev = true;
      prev_end = key.second + val.second;
    } else {
      if (key.second < prev_end)
        res.fail("overlapping decided ranges at " + where(key.first, key.second));
      prev_end = std::max(prev_end, key.second + val.second);
    }
  }
  return res;
}

CheckResult check_validity(const std::vector<TimedTrace>& trace,
                           const std::map<uint64_t, SimCommand>& commands) {
  CheckResult res;
  std::set<CmdKey> reported;
  for (const auto& t : trace) {
    if (t.ev.kind != TraceEvent::Kind::Deliver) continue;
    CmdKey k{t.ev.client_id, t.ev.seq};
    auto it = commands.find(t.ev.client_id);
    if (it == commands.end() || it->second.seq != t.ev.seq) {
      if (reported.insert(k).second)
        res.fail("delivered command was never submitted (client " + std::to_string(t.ev.client_id) +
                 " seq " + std::to_string(t.ev.seq) + ")");
    }
  }
  return res;
}

CheckResult check_acyclic_order(const std::vector<TimedTrace>& trace) {
  CheckResult res;
  auto per_node = first_deliveries(trace);
  std::map<CmdKey, size_t> index;
  for (const auto& [node, seq] : per_node)
    for (const auto& k : seq) index.emplace(k, index.size());
  std::vector<std::set<size_t>> edges(index.size());
  for (const auto& [node, seq] : per_node)
    for (size_t i = 0; i + 1 < seq.size(); ++i)
      edges[index[seq[i]]].insert(index[seq[i + 1]]);
  // iterative DFS cycle detection
  std::vector<uint8_t> state(index.size(), 0);  // 0 new, 1 on stack, 2 done
  for (size_t root = 0; root < index.size(); ++root) {
    if (state[root]) continue;
    std::vector<std::pair<size_t, std::set<size_t>::iterator>> stack;
    state[root] = 1;
    stack.emplace_back(root, edges[root].begin());
    while (!stack.empty()) {
      auto& [u, it] = stack.back();
      if (it == edges[u].end()) {
        state[u] = 2;
        stack.pop_back();
        continue;
      }
      size_t v = *it++;
      if (state[v] == 1) {
        res.fail("cycle in the global delivery order");
        return res;
      }
      if (state[v] == 0) {
        state[v] = 1;
        stack.emplace_back(v, edges[v].begin());
      }
    }
  }
  return res;
}

CheckResult check_checkpoint_order(const ClusterConfig& cfg, const std::vector<TimedTrace>& trace) {
  CheckResult res;
  std::map<ProcessId, CheckpointTuple> last;
  std::map<ProcessId, std::vector<CheckpointTuple>> all;
  for (const auto& t : trace) {
    if (t.ev.kind != TraceEvent::Kind::Checkpoint) continue;
    auto it = last.find(t.ev.node);
    if (it != last.end() && !tuple_leq(it->second, t.ev.tuple))
      res.fail("checkpoint tuple of node " + std::to_string(t.ev.node) + " went backwards");
    last[t.ev.node] = t.ev.tuple;
    all[t.ev.node].push_back(t.ev.tuple);
  }
  for (const auto& part : cfg.partitions) {
    std::vector<CheckpointTuple> tuples;
    for (ProcessId p : part.replicas)
      for (const auto& t : all[p]) tuples.push_back(t);
    for (size_t i = 0; i < tuples.size(); ++i)
      for (size_t j = i + 1; j < tuples.size(); ++j)
        if (!tuple_leq(tuples[i], tuples[j]) && !tuple_leq(tuples[j], tuples[i])) {
          res.fail("incomparable checkpoint tuples within one partition");
          return res;
        }
  }
  return res;
}

CheckResult check_all_replied(const std::map<uint64_t, SimCommand>& commands) {
  CheckResult res;
  for (const auto& [id, cmd] : commands)
    if (!cmd.replied) res.fail("client " + std::to_string(id) + " never got a reply");
  return res;
}

CheckResult check_all(const ClusterConfig& cfg, const SimNet& net) {
  CheckResult res;
  res.merge(check_agreement(net.trace()));
  res.merge(check_validity(net.trace(), net.commands()));
  res.merge(check_acyclic_order(net.trace()));
  res.merge(check_checkpoint_order(cfg, net.trace()));
  res.merge(check_all_replied(net.commands()));
  return res;
}

double decided_rate(const std::vector<TimedTrace>& trace, ProcessId node, GroupId group,
                    uint64_t from_us, uint64_t to_us) {
  if (to_us <= from_us) return 0.0;
  uint64_t instances = 0;
  for (const auto& t : trace) {
    if (t.ev.kind != TraceEvent::Kind::Decide) continue;
    if (t.ev.node != node || t.ev.group != group) continue;
    if (t.at_us < from_us || t.at_us >= to_us) continue;
    instances += t.ev.span;
  }
  return double(instances) * 1e6 / double(to_us - from_us);
}

uint64_t delivered_count(const std::vector<TimedTrace>& trace, ProcessId node, uint64_t from_us,
                         uint64_t to_us) {
  std::set<std::pair<uint64_t, uint64_t>> seen;
  for (const auto& t : trace) {
    if (t.ev.kind != TraceEvent::Kind::Deliver || t.ev.node != node) continue;
    if (t.at_us < from_us || t.at_us >= to_us) continue;
    seen.insert({t.ev.client_id, t.ev.seq});
  }
  return seen.size();
}

}  // namespace mrp
