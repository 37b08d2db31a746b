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

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "mrp/config.hpp"
#include "mrp/node.hpp"
#include "mrp/storage.hpp"

namespace mrp {

// Every stream (node or client) opens with this preamble; the digest pins
// the configuration both sides loaded.
//   magic "MRPH"(4) || config_digest(8 BE)
constexpr size_t kHelloBytes = 12;
std::vector<uint8_t> encode_hello(uint64_t config_digest);
bool check_hello(const uint8_t* buf, uint64_t config_digest);

// Splits "host:port"; throws ConfigError on malformed input.
std::pair<std::string, uint16_t> split_address(const std::string& address);

// Blocking TCP connect with a bounded wait; -1 on failure.
int tcp_connect(const std::string& host, uint16_t port, int timeout_ms = 250);

// One real process: TCP listener, reader threads feeding a single protocol
// thread that owns the ProcessCore, durable state under `data_dir`.
class NodeRuntime {
 public:
  NodeRuntime(const ClusterConfig& cfg, ProcessId self, std::string data_dir);
  ~NodeRuntime();

  void start();
  void stop();
  void wait();  // blocks until stop() is called from elsewhere

  const NodeStats& stats();
  ProcessId id() const { return self_; }

 private:
  class Ctx;
  friend class Ctx;

  void listener_loop();
  void reader_loop(int fd);
  void protocol_loop();
  void maintenance_loop();

  void enqueue(Envelope e);
  void do_send(ProcessId to, const Envelope& e);
  void do_send_client(uint64_t client_id, const Envelope& e);
  bool connect_peer(ProcessId p);
  void drop_peer(ProcessId p);

  const ClusterConfig& cfg_;
  ProcessId self_;
  std::string data_dir_;
  DirStorageEnv env_;
  std::unique_ptr<Ctx> ctx_;
  std::unique_ptr<ProcessCore> core_;

  std::atomic<bool> running_{false};
  int listen_fd_ = -1;
  std::thread listener_;
  std::thread protocol_;
  std::thread maintenance_;
  std::mutex readers_mu_;
  std::vector<std::thread> readers_;
  std::vector<int> reader_fds_;

  std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::deque<Envelope> queue_;
  std::map<uint32_t, uint64_t> timers_;  // token -> deadline us

  std::mutex peers_mu_;
  std::map<ProcessId, int> peer_fds_;      // outbound
  std::map<ProcessId, uint64_t> next_try_;  // reconnect backoff, us
  std::mutex clients_mu_;
  std::map<uint64_t, int> client_fds_;

  std::mutex stats_mu_;
  NodeStats stats_snapshot_;
};

}  // namespace mrp
