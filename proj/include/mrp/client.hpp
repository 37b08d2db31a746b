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
#include <optional>
#include <string>
#include <vector>

#include "mrp/config.hpp"
#include "mrp/dlog.hpp"
#include "mrp/envelope.hpp"
#include "mrp/kvstore.hpp"
#include "mrp/service.hpp"

namespace mrp {

// One TCP stream to one node; sends the config hello on connect.
class ClientConnection {
 public:
  ClientConnection(const std::string& address, uint64_t config_digest);
  ~ClientConnection();
  ClientConnection(const ClientConnection&) = delete;
  ClientConnection& operator=(const ClientConnection&) = delete;

  bool ok() const { return fd_ >= 0; }
  bool send(const Envelope& e);
  // next frame within the timeout, nullopt on timeout or broken stream
  std::optional<Envelope> recv(int timeout_ms);

 private:
  int fd_ = -1;
  FrameReader frames_;
};

// Request/reply session: routes each command to a replica of its group,
// retries with the same sequence number so replays are deduplicated.
class ClientSession {
 public:
  // client_id 0 picks a random one
  explicit ClientSession(const ClusterConfig& cfg, uint64_t client_id = 0);

  // Throws TimeoutError when no node answers within the deadline.
  ClientReplyPayload request(ServiceKind service, std::vector<uint8_t> body,
                             int timeout_ms = 10000);

  uint64_t client_id() const { return client_id_; }
  uint64_t last_seq() const { return seq_; }

 private:
  std::vector<ProcessId> targets_for(ServiceKind service, const std::vector<uint8_t>& body) const;
  ClientConnection& connection(ProcessId p);

  const ClusterConfig& cfg_;
  uint64_t client_id_;
  uint64_t seq_ = 0;
  std::map<ProcessId, std::unique_ptr<ClientConnection>> conns_;
};

struct KvResult {
  uint8_t status = kOk;
  std::vector<uint8_t> value;   // get
  KvEntries entries;            // scan
};

class KvClient {
 public:
  explicit KvClient(const ClusterConfig& cfg, uint64_t client_id = 0);

  KvResult get(const std::string& key);
  KvResult put(const std::string& key, std::vector<uint8_t> value);     // insert
  KvResult update(const std::string& key, std::vector<uint8_t> value);
  KvResult del(const std::string& key);
  KvResult scan(const std::string& from, const std::string& to);

 private:
  KvResult run(const KvCommand& cmd);
  ClientSession session_;
};

struct DlogResult {
  uint8_t status = kOk;
  uint64_t position = 0;                                   // append
  std::vector<std::pair<uint32_t, uint64_t>> positions;    // multi-append
  std::vector<uint8_t> value;                              // read
};

class DlogClient {
 public:
  explicit DlogClient(const ClusterConfig& cfg, uint64_t client_id = 0);

  DlogResult append(uint32_t log, std::vector<uint8_t> value);
  DlogResult mappend(std::vector<uint32_t> logs, std::vector<uint8_t> value);
  DlogResult read(uint32_t log, uint64_t position);
  DlogResult trim(uint32_t log, uint64_t position);

 private:
  DlogResult run(const DlogCommand& cmd);
  ClientSession session_;
};

}  // namespace mrp
