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

#include "mrp.h"

#include <cstring>
#include <sstream>
#include <string>

#include "mrp/bench.hpp"
#include "mrp/checkers.hpp"
#include "mrp/client.hpp"
#include "mrp/config.hpp"
#include "mrp/runtime.hpp"
#include "mrp/sim.hpp"

using namespace mrp;

struct mrp_config {
  ClusterConfig cfg;
};

struct mrp_node {
  std::unique_ptr<NodeRuntime> rt;
};

struct mrp_kv {
  std::unique_ptr<KvClient> client;
};

struct mrp_dlog {
  std::unique_ptr<DlogClient> client;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
int guard(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    g_last_error = e.what();
    return MRP_ERR_CONFIG;
  } catch (const CodecError& e) {
    g_last_error = e.what();
    return MRP_ERR_CODEC;
  } catch (const StorageError& e) {
    g_last_error = e.what();
    return MRP_ERR_STORAGE;
  } catch (const TimeoutError& e) {
    g_last_error = e.what();
    return MRP_ERR_TIMEOUT;
  } catch (const ProtocolError& e) {
    g_last_error = e.what();
    return MRP_ERR_PROTOCOL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MRP_ERR_INTERNAL;
  }
}

int invalid(const char* what) {
  g_last_error = what;
  return MRP_ERR_INVALID;
}

}  // namespace

extern "C" {

const char* mrp_last_error(void) { return g_last_error.c_str(); }

int mrp_config_load(const char* path, mrp_config** out) {
  if (!path || !out) return invalid("null argument");
  return guard([&] {
    auto h = new mrp_config{load_config_file(path)};
    *out = h;
    return MRP_OK;
  });
}

int mrp_config_parse(const char* text, mrp_config** out) {
  if (!text || !out) return invalid("null argument");
  return guard([&] {
    auto h = new mrp_config{load_config(text)};
    *out = h;
    return MRP_OK;
  });
}

void mrp_config_free(mrp_config* cfg) { delete cfg; }

int mrp_node_start(const mrp_config* cfg, uint16_t process_id, const char* data_dir,
                   mrp_node** out) {
  if (!cfg || !data_dir || !out) return invalid("null argument");
  return guard([&] {
    auto node = std::make_unique<mrp_node>();
    node->rt = std::make_unique<NodeRuntime>(cfg->cfg, process_id, data_dir);
    node->rt->start();
    *out = node.release();
    return MRP_OK;
  });
}

int mrp_node_wait(mrp_node* node) {
  if (!node) return invalid("null node");
  return guard([&] {
    node->rt->wait();
    return MRP_OK;
  });
}

int mrp_node_stop(mrp_node* node) {
  if (!node) return invalid("null node");
  int rc = guard([&] {
    node->rt->stop();
    return MRP_OK;
  });
  delete node;
  return rc;
}

int mrp_node_get_stats(mrp_node* node, mrp_node_stats* out) {
  if (!node || !out) return invalid("null argument");
  return guard([&] {
    const NodeStats& s = node->rt->stats();
    out->proposals = s.proposals;
    out->decided = s.decided;
    out->delivered = s.delivered;
    out->skipped = s.skipped;
    out->checkpoints = s.checkpoints;
    out->trims = s.trims;
    out->retransmit_requests = s.retransmit_requests;
    out->replies_sent = s.replies_sent;
    return MRP_OK;
  });
}

int mrp_kv_open(const mrp_config* cfg, mrp_kv** out) {
  if (!cfg || !out) return invalid("null argument");
  return guard([&] {
    auto h = std::make_unique<mrp_kv>();
    h->client = std::make_unique<KvClient>(cfg->cfg);
    *out = h.release();
    return MRP_OK;
  });
}

void mrp_kv_close(mrp_kv* kv) { delete kv; }

int mrp_kv_put(mrp_kv* kv, const char* key, const uint8_t* value, size_t value_len, int* status) {
  if (!kv || !key || (!value && value_len)) return invalid("null argument");
  return guard([&] {
    auto r = kv->client->put(key, std::vector<uint8_t>(value, value + value_len));
    if (status) *status = r.status;
    return MRP_OK;
  });
}

int mrp_kv_update(mrp_kv* kv, const char* key, const uint8_t* value, size_t value_len,
                  int* status) {
  if (!kv || !key || (!value && value_len)) return invalid("null argument");
  return guard([&] {
    auto r = kv->client->update(key, std::vector<uint8_t>(value, value + value_len));
    if (status) *status = r.status;
    return MRP_OK;
  });
}

int mrp_kv_get(mrp_kv* kv, const char* key, mrp_kv_entry_cb cb, void* userdata, int* status) {
  if (!kv || !key) return invalid("null argument");
  return guard([&] {
    auto r = kv->client->get(key);
    if (status) *status = r.status;
    if (r.status == MRP_STATUS_OK && cb) cb(userdata, key, r.value.data(), r.value.size());
    return MRP_OK;
  });
}

int mrp_kv_del(mrp_kv* kv, const char* key, int* status) {
  if (!kv || !key) return invalid("null argument");
  return guard([&] {
    auto r = kv->client->del(key);
    if (status) *status = r.status;
    return MRP_OK;
  });
}

int mrp_kv_scan(mrp_kv* kv, const char* from, const char* to, mrp_kv_entry_cb cb, void* userdata,
                int* status) {
  if (!kv || !from || !to) return invalid("null argument");
  return guard([&] {
    auto r = kv->client->scan(from, to);
    if (status) *status = r.status;
    if (cb)
      for (const auto& [k, v] : r.entries) cb(userdata, k.c_str(), v.data(), v.size());
    return MRP_OK;
  });
}

int mrp_dlog_open(const mrp_config* cfg, mrp_dlog** out) {
  if (!cfg || !out) return invalid("null argument");
  return guard([&] {
    auto h = std::make_unique<mrp_dlog>();
    h->client = std::make_unique<DlogClient>(cfg->cfg);
    *out = h.release();
    return MRP_OK;
  });
}

void mrp_dlog_close(mrp_dlog* dl) { delete dl; }

int mrp_dlog_append(mrp_dlog* dl, uint32_t log, const uint8_t* value, size_t value_len,
                    uint64_t* position, int* status) {
  if (!dl || (!value && value_len)) return invalid("null argument");
  return guard([&] {
    auto r = dl->client->append(log, std::vector<uint8_t>(value, value + value_len));
    if (status) *status = r.status;
    if (position) *position = r.position;
    return MRP_OK;
  });
}

int mrp_dlog_mappend(mrp_dlog* dl, const uint32_t* logs, size_t logs_len, const uint8_t* value,
                     size_t value_len, mrp_dlog_pos_cb cb, void* userdata, int* status) {
  if (!dl || !logs || logs_len == 0 || (!value && value_len)) return invalid("null argument");
  return guard([&] {
    auto r = dl->client->mappend(std::vector<uint32_t>(logs, logs + logs_len),
                                 std::vector<uint8_t>(value, value + value_len));
    if (status) *status = r.status;
    if (cb)
      for (const auto& [log, pos] : r.positions) cb(userdata, log, pos);
    return MRP_OK;
  });
}

int mrp_dlog_read(mrp_dlog* dl, uint32_t log, uint64_t position, mrp_dlog_value_cb cb,
                  void* userdata, int* status) {
  if (!dl) return invalid("null argument");
  return guard([&] {
    auto r = dl->client->read(log, position);
    if (status) *status = r.status;
    if (r.status == MRP_STATUS_OK && cb) cb(userdata, r.value.data(), r.value.size());
    return MRP_OK;
  });
}

int mrp_dlog_trim(mrp_dlog* dl, uint32_t log, uint64_t position, int* status) {
  if (!dl) return invalid("null argument");
  return guard([&] {
    auto r = dl->client->trim(log, position);
    if (status) *status = r.status;
    return MRP_OK;
  });
}

int mrp_sim_run(const char* scenario_path, uint64_t seed, int check, mrp_sim_result* out,
                char** report) {
  if (!scenario_path) return invalid("null scenario path");
  return guard([&] {
    Scenario s = load_scenario(scenario_path);
    if (s.config_path.empty())
      throw ConfigError("scenario has no `config <path>` directive");
    ClusterConfig cfg = load_config_file(s.config_path);
    SimNet net(cfg, seed);
    net.play(s.events, 5'000'000);

    std::ostringstream os;
    uint64_t replied = 0;
    for (const auto& [cid, cmd] : net.commands()) replied += cmd.replied ? 1 : 0;
    os << "commands " << net.commands().size() << ", replied " << replied << ", trace events "
       << net.trace().size() << ", messages " << net.messages_delivered() << "\n";
    int checks_ok = 1;
    if (check) {
      CheckResult r = check_all(cfg, net);
      checks_ok = r.ok ? 1 : 0;
      os << (r.ok ? "checks: ok" : "checks: FAILED") << "\n";
      for (const auto& p : r.problems) os << "  " << p << "\n";
    }
    if (out) {
      out->commands = net.commands().size();
      out->replied = replied;
      out->trace_events = net.trace().size();
      out->messages = net.messages_delivered();
      out->checks_ok = checks_ok;
    }
    if (report) {
      std::string text = os.str();
      *report = static_cast<char*>(malloc(text.size() + 1));
      memcpy(*report, text.c_str(), text.size() + 1);
    }
    return MRP_OK;
  });
}

void mrp_string_free(char* s) { free(s); }

int mrp_bench_run(const mrp_config* cfg, const mrp_bench_options* opt, mrp_bench_report* out) {
  if (!cfg || !opt || !opt->mode || !out) return invalid("null argument");
  return guard([&] {
    BenchOptions bo;
    bo.mode = opt->mode;
    bo.clients = opt->clients;
    bo.size = opt->size;
    bo.duration_s = opt->duration_s;
    if (opt->csv_path) bo.csv_path = opt->csv_path;
    bo.seed = opt->seed ? opt->seed : 1;
    MetricsReport r = run_bench(cfg->cfg, bo);
    if (!bo.csv_path.empty()) write_csv(r, bo.csv_path);
    out->ops = r.ops;
    out->errors = r.errors;
    out->bytes = r.bytes;
    out->duration_s = r.duration_s;
    out->throughput = r.throughput;
    out->mbytes_per_s = r.mbytes_per_s;
    out->p50_us = r.p50_us;
    out->p95_us = r.p95_us;
    out->p99_us = r.p99_us;
    out->max_us = r.max_us;
    return MRP_OK;
  });
}

}  // extern "C"
