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

#include "mrp/client.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <random>

#include "mrp/runtime.hpp"

namespace mrp {

namespace {

uint64_t mono_ms() {
  return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                   std::chrono::steady_clock::now().time_since_epoch())
                                   .count());
}

uint64_t random_client_id() {
  std::random_device rd;
  std::mt19937_64 rng((static_cast<uint64_t>(rd()) << 32) ^ rd());
  uint64_t id;
  do {
    id = rng();
  } while (id == 0);
  return id;
}

// declared in runtime.cpp as well; small enough to repeat here
bool write_all_fd(int fd, const uint8_t* data, size_t len) {
  while (len > 0) {
    ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += n;
    len -= static_cast<size_t>(n);
  }
  return true;
}

}  // namespace

ClientConnection::ClientConnection(const std::string& address, uint64_t config_digest) {
  auto [host, port] = split_address(address);
  fd_ = tcp_connect(host, port);
  if (fd_ < 0) return;
  auto hello = encode_hello(config_digest);
  if (!write_all_fd(fd_, hello.data(), hello.size())) {
    ::close(fd_);
    fd_ = -1;
  }
}

ClientConnection::~ClientConnection() {
  if (fd_ >= 0) ::close(fd_);
}

bool ClientConnection::send(const Envelope& e) {
  if (fd_ < 0) return false;
  auto frame = encode(e);
  if (!write_all_fd(fd_, frame.data(), frame.size())) {
    ::close(fd_);
    fd_ = -1;
    return false;
  }
  return true;
}

std::optional<Envelope> ClientConnection::recv(int timeout_ms) {
  if (fd_ < 0) return std::nullopt;
  uint64_t deadline = mono_ms() + static_cast<uint64_t>(std::max(timeout_ms, 0));
  uint8_t buf[1 << 16];
  for (;;) {
    try {
      if (auto e = frames_.next()) return e;
    } catch (const CodecError&) {
      ::close(fd_);
      fd_ = -1;
      return std::nullopt;
    }
    uint64_t now = mono_ms();
    if (now >= deadline) return std::nullopt;
    pollfd pfd{fd_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(deadline - now));
    if (rc == 0) return std::nullopt;
    if (rc < 0) {
      if (errno == EINTR) continue;
      ::close(fd_);
      fd_ = -1;
      return std::nullopt;
    }
    ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      ::close(fd_);
      fd_ = -1;
      return std::nullopt;
    }
    frames_.feed(buf, static_cast<size_t>(n));
  }
}

ClientSession::ClientSession(const ClusterConfig& cfg, uint64_t client_id)
    : cfg_(cfg), client_id_(client_id ? client_id : random_client_id()) {}

std::vector<ProcessId> ClientSession::targets_for(ServiceKind service,
                                                  const std::vector<uint8_t>& body) const {
  GroupId g = 0;
  try {
    g = route_command(service, body, cfg_);
  } catch (const std::exception&) {
    // unroutable bodies fall through to any proposer
  }
  std::vector<ProcessId> subscribed, rest;
  for (const auto& [pid, info] : cfg_.processes) {
    if (info.address.empty() || !info.has_role(Role::Proposer)) continue;
    if (g && info.subscriptions.count(g))
      subscribed.push_back(pid);
    else
      rest.push_back(pid);
  }
  // replicas of the routed group answer without extra forwarding
  subscribed.insert(subscribed.end(), rest.begin(), rest.end());
  return subscribed;
}

ClientConnection& ClientSession::connection(ProcessId p) {
  auto it = conns_.find(p);
  if (it == conns_.end() || !it->second->ok()) {
    conns_[p] =
        std::make_unique<ClientConnection>(cfg_.process(p).address, cfg_.digest);
    it = conns_.find(p);
  }
  return *it->second;
}

ClientReplyPayload ClientSession::request(ServiceKind service, std::vector<uint8_t> body,
                                          int timeout_ms) {
  uint64_t seq = ++seq_;
  ClientRequestPayload req;
  req.client_id = client_id_;
  req.seq = seq;
  req.service = static_cast<uint8_t>(service);
  req.command = std::move(body);
  Envelope e = make_envelope(MsgType::ClientRequest, 0, kClientOrigin, req);

  auto targets = targets_for(service, req.command);
  if (targets.empty()) throw ProtocolError("no proposer with an address in the configuration");

  uint64_t deadline = mono_ms() + static_cast<uint64_t>(std::max(timeout_ms, 1));
  size_t attempt = 0;
  while (mono_ms() < deadline) {
    ProcessId target = targets[attempt++ % targets.size()];
    ClientConnection& conn = connection(target);
    if (!conn.send(e)) continue;
    // bounded per-attempt wait so a dead node does not eat the deadline
    uint64_t now = mono_ms();
    int wait = static_cast<int>(std::min<uint64_t>(deadline - now, 1000));
    uint64_t attempt_end = now + static_cast<uint64_t>(wait);
    for (;;) {
      now = mono_ms();
      if (now >= attempt_end) break;
      auto reply = conn.recv(static_cast<int>(attempt_end - now));
      if (!reply) break;
      if (reply->msg_type != MsgType::ClientReply) continue;
      auto p = decode_client_reply(reply->payload);
      if (p.client_id != client_id_ || p.seq != seq) continue;  // stale retry answer
      return p;
    }
  }
  throw TimeoutError("no reply for seq " + std::to_string(seq) + " within " +
                     std::to_string(timeout_ms) + " ms");
}

KvClient::KvClient(const ClusterConfig& cfg, uint64_t client_id) : session_(cfg, client_id) {}

KvResult KvClient::run(const KvCommand& cmd) {
  auto reply = session_.request(ServiceKind::Kv, cmd.encode());
  KvResult out;
  out.status = reply.status;
  if (cmd.op == KvOp::Scan) {
    if (!reply.result.empty()) out.entries = decode_scan_slice(reply.result);
  } else {
    out.value = std::move(reply.result);
  }
  return out;
}

KvResult KvClient::get(const std::string& key) { return run({KvOp::Read, key, {}, {}}); }
KvResult KvClient::put(const std::string& key, std::vector<uint8_t> value) {
  return run({KvOp::Insert, key, {}, std::move(value)});
}
KvResult KvClient::update(const std::string& key, std::vector<uint8_t> value) {
  return run({KvOp::Update, key, {}, std::move(value)});
}
KvResult KvClient::del(const std::string& key) { return run({KvOp::Delete, key, {}, {}}); }
KvResult KvClient::scan(const std::string& from, const std::string& to) {
  return run({KvOp::Scan, from, to, {}});
}

DlogClient::DlogClient(const ClusterConfig& cfg, uint64_t client_id) : session_(cfg, client_id) {}

DlogResult DlogClient::run(const DlogCommand& cmd) {
  auto reply = session_.request(ServiceKind::Dlog, cmd.encode());
  DlogResult out;
  out.status = reply.status;
  if (reply.status != kOk && reply.status != kTrimmed && reply.status != kNotYetWritten) return out;
  switch (cmd.op) {
    case DlogOp::Append: {
      ByteReader r(reply.result);
      out.position = r.u64();
      break;
    }
    case DlogOp::MultiAppend: {
      ByteReader r(reply.result);
      uint32_t n = r.u32();
      for (uint32_t i = 0; i < n; ++i) {
        uint32_t log = r.u32();
        out.positions.emplace_back(log, r.u64());
      }
      break;
    }
    case DlogOp::Read:
      out.value = std::move(reply.result);
      break;
    case DlogOp::Trim:
      break;
  }
  return out;
}

DlogResult DlogClient::append(uint32_t log, std::vector<uint8_t> value) {
  return run({DlogOp::Append, {log}, 0, std::move(value)});
}
DlogResult DlogClient::mappend(std::vector<uint32_t> logs, std::vector<uint8_t> value) {
  return run({DlogOp::MultiAppend, std::move(logs), 0, std::move(value)});
}
DlogResult DlogClient::read(uint32_t log, uint64_t position) {
  return run({DlogOp::Read, {log}, position, {}});
}
DlogResult DlogClient::trim(uint32_t log, uint64_t position) {
  return run({DlogOp::Trim, {log}, position, {}});
}

}  // namespace mrp
