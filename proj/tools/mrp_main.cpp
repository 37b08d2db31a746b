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

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "mrp.h"

namespace {

volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }

bool verbose() {
  const char* v = std::getenv("MRP_VERBOSE");
  return v && *v && strcmp(v, "0") != 0;
}

int die(int rc) {
  fprintf(stderr, "error: %s\n", mrp_last_error());
  return rc == MRP_OK ? 1 : rc;
}

struct ConfigHandle {
  mrp_config* cfg = nullptr;
  ~ConfigHandle() { mrp_config_free(cfg); }
  int load(const std::string& path) { return mrp_config_load(path.c_str(), &cfg); }
};

void print_value(const uint8_t* v, size_t n) {
  fwrite(v, 1, n, stdout);
  fputc('\n', stdout);
}

int run_node(const std::string& config, uint16_t id, std::string data_dir) {
  ConfigHandle c;
  if (int rc = c.load(config)) return die(rc);
  if (data_dir.empty()) data_dir = "mrp-node-" + std::to_string(id);
  mrp_node* node = nullptr;
  if (int rc = mrp_node_start(c.cfg, id, data_dir.c_str(), &node)) return die(rc);
  fprintf(stderr, "node %u serving, data in %s\n", id, data_dir.c_str());
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  int ticks = 0;
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    if (verbose() && ++ticks % 50 == 0) {
      mrp_node_stats v{};
      mrp_node_get_stats(node, &v);
      fprintf(stderr, "node %u: decided %llu, delivered %llu, replies %llu\n", id,
              (unsigned long long)v.decided, (unsigned long long)v.delivered,
              (unsigned long long)v.replies_sent);
    }
  }
  mrp_node_stats s{};
  mrp_node_get_stats(node, &s);
  mrp_node_stop(node);
  fprintf(stderr,
          "node %u stopped: proposals %llu, decided %llu, delivered %llu, checkpoints %llu, "
          "trims %llu, replies %llu\n",
          id, (unsigned long long)s.proposals, (unsigned long long)s.decided,
          (unsigned long long)s.delivered, (unsigned long long)s.checkpoints,
          (unsigned long long)s.trims, (unsigned long long)s.replies_sent);
  return 0;
}

int run_bench(const std::string& config, const mrp_bench_options& opt) {
  ConfigHandle c;
  if (int rc = c.load(config)) return die(rc);
  mrp_bench_report r{};
  if (int rc = mrp_bench_run(c.cfg, &opt, &r)) return die(rc);
  printf("ops %llu, errors %llu, %.2f s\n", (unsigned long long)r.ops,
         (unsigned long long)r.errors, r.duration_s);
  printf("throughput %.1f cmd/s, %.3f MB/s\n", r.throughput, r.mbytes_per_s);
  printf("latency us p50 %llu p95 %llu p99 %llu max %llu\n", (unsigned long long)r.p50_us,
         (unsigned long long)r.p95_us, (unsigned long long)r.p99_us,
         (unsigned long long)r.max_us);
  return 0;
}

int run_sim(const std::string& scenario, uint64_t seed, bool check) {
  mrp_sim_result res{};
  char* report = nullptr;
  int rc = mrp_sim_run(scenario.c_str(), seed, check ? 1 : 0, &res, &report);
  if (rc) return die(rc);
  if (report) {
    fputs(report, stdout);
    mrp_string_free(report);
  }
  if (check && !res.checks_ok) return 2;
  return 0;
}

const char* status_name(int s) {
  switch (s) {
    case MRP_STATUS_OK: return "ok";
    case MRP_STATUS_NOT_FOUND: return "not found";
    case MRP_STATUS_ALREADY_EXISTS: return "already exists";
    case MRP_STATUS_TRIMMED: return "trimmed";
    case MRP_STATUS_NOT_YET_WRITTEN: return "not yet written";
    case MRP_STATUS_BAD_REQUEST: return "bad request";
    default: return "unknown status";
  }
}

int finish(int status) {
  if (status == MRP_STATUS_OK) return 0;
  fprintf(stderr, "%s\n", status_name(status));
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-ring atomic multicast node, clients and tools"};
  app.require_subcommand(1);

  std::string config, data_dir, scenario, csv, mode = "kv";
  uint16_t id = 0;
  uint64_t seed = 1;
  bool check = false;
  mrp_bench_options bopt{};
  uint32_t clients = 8, size = 512, duration = 10;

  auto* node = app.add_subcommand("node", "run one process of the cluster");
  node->add_option("--config", config, "cluster configuration file")->required();
  node->add_option("--id", id, "process id")->required();
  node->add_option("--data-dir", data_dir, "durable state directory");

  auto* bench = app.add_subcommand("bench", "closed-loop load generator");
  bench->add_option("--config", config)->required();
  bench->add_option("--clients", clients, "closed-loop client count");
  bench->add_option("--size", size, "value bytes per command");
  bench->add_option("--duration", duration, "seconds");
  bench->add_option("--mode", mode, "kv | dlog | dummy");
  bench->add_option("--csv", csv, "per-second csv output path");
  bench->add_option("--seed", seed);

  auto* sim = app.add_subcommand("sim", "deterministic scenario player");
  sim->add_option("--scenario", scenario, "scenario file with a config directive")->required();
  sim->add_option("--seed", seed);
  sim->add_flag("--check", check, "run the property checkers");

  auto* kv = app.add_subcommand("kv", "kv store client");
  kv->add_option("--config", config)->required();
  kv->require_subcommand(1);
  std::string key, key2, value;
  auto* kget = kv->add_subcommand("get");
  kget->add_option("key", key)->required();
  auto* kput = kv->add_subcommand("put");
  kput->add_option("key", key)->required();
  kput->add_option("value", value)->required();
  auto* kdel = kv->add_subcommand("del");
  kdel->add_option("key", key)->required();
  auto* kscan = kv->add_subcommand("scan");
  kscan->add_option("from", key)->required();
  kscan->add_option("to", key2)->required();

  auto* dlog = app.add_subcommand("dlog", "shared log client");
  dlog->add_option("--config", config)->required();
  dlog->require_subcommand(1);
  uint32_t log = 0;
  uint64_t position = 0;
  std::vector<uint32_t> logs;
  auto* dapp = dlog->add_subcommand("append");
  dapp->add_option("log", log)->required();
  dapp->add_option("value", value)->required();
  auto* dmapp = dlog->add_subcommand("mappend");
  dmapp->add_option("logs", logs, "target log ids")->required();
  dmapp->add_option("value", value)->required();
  auto* dread = dlog->add_subcommand("read");
  dread->add_option("log", log)->required();
  dread->add_option("position", position)->required();
  auto* dtrim = dlog->add_subcommand("trim");
  dtrim->add_option("log", log)->required();
  dtrim->add_option("position", position)->required();

  CLI11_PARSE(app, argc, argv);

  if (node->parsed()) return run_node(config, id, data_dir);
  if (bench->parsed()) {
    bopt.mode = mode.c_str();
    bopt.clients = clients;
    bopt.size = size;
    bopt.duration_s = duration;
    bopt.csv_path = csv.empty() ? nullptr : csv.c_str();
    bopt.seed = seed;
    return run_bench(config, bopt);
  }
  if (sim->parsed()) return run_sim(scenario, seed, check);

  ConfigHandle c;
  if (int rc = c.load(config)) return die(rc);

  if (kv->parsed()) {
    mrp_kv* h = nullptr;
    if (int rc = mrp_kv_open(c.cfg, &h)) return die(rc);
    int status = 0, rc = MRP_OK;
    if (kget->parsed()) {
      rc = mrp_kv_get(
          h, key.c_str(),
          [](void*, const char*, const uint8_t* v, size_t n) { print_value(v, n); }, nullptr,
          &status);
    } else if (kput->parsed()) {
      rc = mrp_kv_put(h, key.c_str(), reinterpret_cast<const uint8_t*>(value.data()),
                      value.size(), &status);
    } else if (kdel->parsed()) {
      rc = mrp_kv_del(h, key.c_str(), &status);
    } else if (kscan->parsed()) {
      rc = mrp_kv_scan(
          h, key.c_str(), key2.c_str(),
          [](void*, const char* k, const uint8_t* v, size_t n) {
            printf("%s\t", k);
            print_value(v, n);
          },
          nullptr, &status);
    }
    mrp_kv_close(h);
    if (rc) return die(rc);
    return finish(status);
  }

  if (dlog->parsed()) {
    mrp_dlog* h = nullptr;
    if (int rc = mrp_dlog_open(c.cfg, &h)) return die(rc);
    int status = 0, rc = MRP_OK;
    if (dapp->parsed()) {
      uint64_t pos = 0;
      rc = mrp_dlog_append(h, log, reinterpret_cast<const uint8_t*>(value.data()), value.size(),
                           &pos, &status);
      if (rc == MRP_OK && status == MRP_STATUS_OK) printf("%llu\n", (unsigned long long)pos);
    } else if (dmapp->parsed()) {
      rc = mrp_dlog_mappend(
          h, logs.data(), logs.size(), reinterpret_cast<const uint8_t*>(value.data()),
          value.size(),
          [](void*, uint32_t l, uint64_t p) { printf("%u\t%llu\n", l, (unsigned long long)p); },
          nullptr, &status);
    } else if (dread->parsed()) {
      rc = mrp_dlog_read(
          h, log, position, [](void*, const uint8_t* v, size_t n) { print_value(v, n); },
          nullptr, &status);
    } else if (dtrim->parsed()) {
      rc = mrp_dlog_trim(h, log, position, &status);
    }
    mrp_dlog_close(h);
    if (rc) return die(rc);
    return finish(status);
  }

  return 0;
}
