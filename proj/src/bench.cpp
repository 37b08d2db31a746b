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

#include "mrp/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "mrp/client.hpp"
#include "mrp/dlog.hpp"
#include "mrp/kvstore.hpp"

namespace mrp {

namespace {

struct Sample {
  uint64_t at_us = 0;   // since bench start
  uint64_t lat_us = 0;
  uint64_t bytes = 0;
};

uint64_t pct(std::vector<uint64_t>& sorted, double p) {
  if (sorted.empty()) return 0;
  size_t idx = static_cast<size_t>(p * static_cast<double>(sorted.size() - 1));
  return sorted[idx];
}

std::vector<uint8_t> filler(std::mt19937_64& rng, size_t n) {
  std::vector<uint8_t> out(n);
  for (auto& b : out) b = static_cast<uint8_t>(rng());
  return out;
}

struct Worker {
  const ClusterConfig* cfg;
  const BenchOptions* opt;
  uint64_t seed;
  std::atomic<bool>* stop;
  std::vector<Sample> samples;
  uint64_t errors = 0;

  void run() {
    std::mt19937_64 rng(seed);
    ClientSession session(*cfg);
    std::vector<GroupId> dummy_groups;
    for (const auto& r : cfg->rings) dummy_groups.push_back(r.group);
    std::vector<uint32_t> logs;
    if (cfg->dlog)
      for (const auto& [id, g] : cfg->dlog->logs) logs.push_back(id);

    auto start = std::chrono::steady_clock::now();
    auto us_since_start = [&] {
      return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::microseconds>(
                                       std::chrono::steady_clock::now() - start)
                                       .count());
    };
    uint64_t i = 0;
    while (!stop->load(std::memory_order_relaxed)) {
      std::vector<uint8_t> body;
      ServiceKind kind;
      if (opt->mode == "kv") {
        kind = ServiceKind::Kv;
        KvCommand cmd;
        cmd.key = "bench" + std::to_string(rng() % 100000);
        if (rng() & 1) {
          cmd.op = KvOp::Insert;
          cmd.value = filler(rng, opt->size);
        } else {
          cmd.op = KvOp::Read;
        }
        body = cmd.encode();
      } else if (opt->mode == "dlog") {
        kind = ServiceKind::Dlog;
        DlogCommand cmd;
        cmd.op = DlogOp::Append;
        cmd.logs = {logs[i % logs.size()]};
        cmd.value = filler(rng, opt->size);
        body = cmd.encode();
      } else {
        kind = ServiceKind::Dummy;
        GroupId g = dummy_groups[i % dummy_groups.size()];
        body.push_back(static_cast<uint8_t>(g >> 8));
        body.push_back(static_cast<uint8_t>(g));
        auto f = filler(rng, opt->size);
        body.insert(body.end(), f.begin(), f.end());
      }
      i++;
      uint64_t sz = body.size();
      uint64_t before = us_since_start();
      try {
        auto reply = session.request(kind, std::move(body), 5000);
        uint64_t after = us_since_start();
        // kAlreadyExists / kNotFound are normal outcomes for the kv mix
        if (reply.status == kBadRequest) {
          errors++;
        } else {
          samples.push_back({after, after - before, sz});
        }
      } catch (const TimeoutError&) {
        errors++;
      } catch (const ProtocolError&) {
        errors++;
        return;  // misconfigured target set, do not spin
      }
    }
  }
};

}  // namespace

MetricsReport run_bench(const ClusterConfig& cfg, const BenchOptions& opt) {
  MetricsReport r;
  if (opt.duration_s == 0 || opt.clients == 0) return r;
  if (opt.mode == "kv" && !cfg.kvstore)
    throw ConfigError("kv bench needs a [kvstore] section");
  if (opt.mode == "dlog" && (!cfg.dlog || cfg.dlog->logs.empty()))
    throw ConfigError("dlog bench needs a [dlog] section with logs");
  if (opt.mode != "kv" && opt.mode != "dlog" && opt.mode != "dummy")
    throw ConfigError("unknown bench mode: " + opt.mode);

  std::atomic<bool> stop{false};
  std::vector<Worker> workers(opt.clients);
  std::vector<std::thread> threads;
  for (uint32_t c = 0; c < opt.clients; ++c) {
    workers[c].cfg = &cfg;
    workers[c].opt = &opt;
    workers[c].seed = opt.seed * 1000003 + c;
    workers[c].stop = &stop;
  }
  auto start = std::chrono::steady_clock::now();
  for (uint32_t c = 0; c < opt.clients; ++c)
    threads.emplace_back([&workers, c] { workers[c].run(); });
  std::this_thread::sleep_for(std::chrono::seconds(opt.duration_s));
  stop = true;
  for (auto& t : threads) t.join();
  r.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::vector<uint64_t> lats;
  std::map<uint32_t, std::vector<Sample>> by_second;
  for (const auto& w : workers) {
    r.errors += w.errors;
    for (const auto& s : w.samples) {
      r.ops++;
      r.bytes += s.bytes;
      lats.push_back(s.lat_us);
      by_second[static_cast<uint32_t>(s.at_us / 1'000'000)].push_back(s);
    }
  }
  std::sort(lats.begin(), lats.end());
  r.p50_us = pct(lats, 0.50);
  r.p95_us = pct(lats, 0.95);
  r.p99_us = pct(lats, 0.99);
  r.max_us = lats.empty() ? 0 : lats.back();
  if (r.duration_s > 0) {
    r.throughput = static_cast<double>(r.ops) / r.duration_s;
    r.mbytes_per_s = static_cast<double>(r.bytes) / r.duration_s / 1e6;
  }
  for (auto& [sec, samples] : by_second) {
    MetricsReport::Second row;
    row.second = sec;
    std::vector<uint64_t> sl;
    for (const auto& s : samples) {
      row.ops++;
      row.bytes += s.bytes;
      sl.push_back(s.lat_us);
    }
    std::sort(sl.begin(), sl.end());
    row.p50_us = pct(sl, 0.50);
    row.p99_us = pct(sl, 0.99);
    r.seconds.push_back(row);
  }
  return r;
}

void write_csv(const MetricsReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw StorageError("cannot write csv: " + path);
  out << "second,ops,bytes,p50_us,p99_us\n";
  for (const auto& s : r.seconds)
    out << s.second << ',' << s.ops << ',' << s.bytes << ',' << s.p50_us << ',' << s.p99_us
        << '\n';
}

std::string format_report(const MetricsReport& r) {
  std::ostringstream os;
  os << "ops " << r.ops << ", errors " << r.errors << ", " << r.duration_s << " s\n"
     << "throughput " << r.throughput << " cmd/s, " << r.mbytes_per_s << " MB/s\n"
     << "latency us p50 " << r.p50_us << " p95 " << r.p95_us << " p99 " << r.p99_us << " max "
     << r.max_us << "\n";
  return os.str();
}

}  // namespace mrp
