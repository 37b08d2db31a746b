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

#include "mrp/runtime.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <set>

#include "mrp/envelope.hpp"
#include "mrp/types.hpp"

namespace mrp {

namespace {

constexpr uint8_t kHelloMagic[4] = {'M', 'R', 'P', 'H'};
constexpr uint64_t kReconnectBackoffUs = 500'000;

uint64_t mono_us() {
  return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::microseconds>(
                                   std::chrono::steady_clock::now().time_since_epoch())
                                   .count());
}

bool write_all(int fd, const uint8_t* data, size_t len) {
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

bool read_exact(int fd, uint8_t* data, size_t len) {
  while (len > 0) {
    ssize_t n = ::recv(fd, data, len, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    data += n;
    len -= static_cast<size_t>(n);
  }
  return true;
}

}  // namespace

int tcp_connect(const std::string& host, uint16_t port, int timeout_ms) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) return -1;
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd pfd{fd, POLLOUT, 0};
      rc = ::poll(&pfd, 1, timeout_ms) == 1 ? 0 : -1;
      if (rc == 0) {
        int err = 0;
        socklen_t len = sizeof(err);
        getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) rc = -1;
      }
    }
    if (rc == 0) {
      fcntl(fd, F_SETFL, flags);
      int one = 1;
      setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      break;
    }
    ::close(fd);
    fd = -1;
  }
  freeaddrinfo(res);
  return fd;
}

std::vector<uint8_t> encode_hello(uint64_t config_digest) {
  std::vector<uint8_t> out(kHelloBytes);
  memcpy(out.data(), kHelloMagic, 4);
  for (int i = 0; i < 8; ++i) out[4 + i] = static_cast<uint8_t>(config_digest >> (56 - 8 * i));
  return out;
}

bool check_hello(const uint8_t* buf, uint64_t config_digest) {
  if (memcmp(buf, kHelloMagic, 4) != 0) return false;
  uint64_t d = 0;
  for (int i = 0; i < 8; ++i) d = d << 8 | buf[4 + i];
  return d == config_digest;
}

std::pair<std::string, uint16_t> split_address(const std::string& address) {
  size_t colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size())
    throw ConfigError("malformed address, want host:port: " + address);
  unsigned long port = 0;
  try {
    port = std::stoul(address.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("malformed port in address: " + address);
  }
  if (port == 0 || port > 65535) throw ConfigError("port out of range in address: " + address);
  return {address.substr(0, colon), static_cast<uint16_t>(port)};
}

// NodeContext bound to the runtime; called only from the protocol thread.
class NodeRuntime::Ctx : public NodeContext {
 public:
  explicit Ctx(NodeRuntime& rt) : rt_(rt) {}

  void send(ProcessId to, const Envelope& e) override { rt_.do_send(to, e); }
  void send_client(uint64_t client_id, const Envelope& e) override {
    rt_.do_send_client(client_id, e);
  }
  void set_timer(uint32_t token, uint64_t delay_us) override {
    std::lock_guard<std::mutex> l(rt_.queue_mu_);
    rt_.timers_[token] = mono_us() + delay_us;
    rt_.queue_cv_.notify_all();
  }
  void cancel_timer(uint32_t token) override {
    std::lock_guard<std::mutex> l(rt_.queue_mu_);
    rt_.timers_.erase(token);
  }
  uint64_t now_us() override { return mono_us(); }
  StorageEnv& storage() override { return rt_.env_; }
  bool is_reachable(ProcessId p) override {
    if (p == rt_.self_) return true;
    std::lock_guard<std::mutex> l(rt_.peers_mu_);
    // optimistic until a connect or send has actually failed
    return rt_.peer_fds_.count(p) || !rt_.next_try_.count(p);
  }

 private:
  NodeRuntime& rt_;
};

NodeRuntime::NodeRuntime(const ClusterConfig& cfg, ProcessId self, std::string data_dir)
    : cfg_(cfg), self_(self), data_dir_(std::move(data_dir)), env_(data_dir_) {
  cfg_.process(self_);  // throws if unknown
}

NodeRuntime::~NodeRuntime() { stop(); }

void NodeRuntime::start() {
  if (running_.exchange(true)) return;

  auto [host, port] = split_address(cfg_.process(self_).address);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw ProtocolError("socket: " + std::string(strerror(errno)));
  int one = 1;
  setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr =
      host == "0.0.0.0" ? INADDR_ANY : inet_addr(host == "localhost" ? "127.0.0.1" : host.c_str());
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listen_fd_, 128) != 0) {
    std::string err = strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    running_ = false;
    throw ProtocolError("bind/listen " + cfg_.process(self_).address + ": " + err);
  }

  ctx_ = std::make_unique<Ctx>(*this);
  core_ = std::make_unique<ProcessCore>(cfg_, self_, *ctx_);

  listener_ = std::thread([this] { listener_loop(); });
  protocol_ = std::thread([this] { protocol_loop(); });
  maintenance_ = std::thread([this] { maintenance_loop(); });
}

void NodeRuntime::stop() {
  if (!running_.exchange(false)) return;
  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
  {
    std::lock_guard<std::mutex> l(queue_mu_);
    queue_cv_.notify_all();
  }
  {
    std::lock_guard<std::mutex> l(readers_mu_);
    for (int fd : reader_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  if (listener_.joinable()) listener_.join();
  if (protocol_.joinable()) protocol_.join();
  if (maintenance_.joinable()) maintenance_.join();
  std::vector<std::thread> readers;
  {
    std::lock_guard<std::mutex> l(readers_mu_);
    readers.swap(readers_);
  }
  for (auto& t : readers)
    if (t.joinable()) t.join();
  {
    std::lock_guard<std::mutex> l(readers_mu_);
    for (int fd : reader_fds_) ::close(fd);
    reader_fds_.clear();
  }
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  {
    std::lock_guard<std::mutex> l(peers_mu_);
    for (auto& [p, fd] : peer_fds_) ::close(fd);
    peer_fds_.clear();
  }
  {
    std::lock_guard<std::mutex> l(stats_mu_);
    if (core_) stats_snapshot_ = core_->stats();
  }
  core_.reset();
  ctx_.reset();
}

void NodeRuntime::wait() {
  std::unique_lock<std::mutex> l(queue_mu_);
  queue_cv_.wait(l, [this] { return !running_.load(); });
}

const NodeStats& NodeRuntime::stats() {
  std::lock_guard<std::mutex> l(stats_mu_);
  return stats_snapshot_;
}

void NodeRuntime::listener_loop() {
  while (running_) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;  // listener shut down
    }
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard<std::mutex> l(readers_mu_);
    if (!running_) {
      ::close(fd);
      break;
    }
    reader_fds_.push_back(fd);
    readers_.emplace_back([this, fd] { reader_loop(fd); });
  }
}

void NodeRuntime::reader_loop(int fd) {
  uint8_t hello[kHelloBytes];
  if (!read_exact(fd, hello, sizeof(hello)) || !check_hello(hello, cfg_.digest)) {
    ::shutdown(fd, SHUT_RDWR);
    return;
  }
  FrameReader frames;
  std::vector<uint8_t> buf(1 << 16);
  uint64_t conn_client = 0;  // client id seen on this stream, if any
  try {
    while (running_) {
      ssize_t n = ::recv(fd, buf.data(), buf.size(), 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      frames.feed(buf.data(), static_cast<size_t>(n));
      while (auto e = frames.next()) {
        if (e->msg_type == MsgType::ClientRequest) {
          uint64_t cid = decode_client_request(e->payload).client_id;
          std::lock_guard<std::mutex> l(clients_mu_);
          client_fds_[cid] = fd;
          conn_client = cid;
        }
        enqueue(std::move(*e));
      }
    }
  } catch (const CodecError&) {
    // malformed stream, drop the connection
  }
  ::shutdown(fd, SHUT_RDWR);
  if (conn_client) {
    std::lock_guard<std::mutex> l(clients_mu_);
    auto it = client_fds_.find(conn_client);
    if (it != client_fds_.end() && it->second == fd) client_fds_.erase(it);
  }
}

void NodeRuntime::enqueue(Envelope e) {
  std::lock_guard<std::mutex> l(queue_mu_);
  queue_.push_back(std::move(e));
  queue_cv_.notify_all();
}

void NodeRuntime::protocol_loop() {
  core_->start();
  std::vector<Envelope> msgs;
  std::vector<uint32_t> due;
  while (running_) {
    msgs.clear();
    due.clear();
    {
      std::unique_lock<std::mutex> l(queue_mu_);
      auto ready = [&] {
        if (!running_ || !queue_.empty()) return true;
        uint64_t now = mono_us();
        for (const auto& [tok, at] : timers_)
          if (at <= now) return true;
        return false;
      };
      if (!ready()) {
        uint64_t nearest = UINT64_MAX;
        for (const auto& [tok, at] : timers_) nearest = std::min(nearest, at);
        if (nearest == UINT64_MAX) {
          queue_cv_.wait(l, ready);
        } else {
          queue_cv_.wait_until(
              l, std::chrono::steady_clock::time_point(std::chrono::microseconds(nearest)), ready);
        }
      }
      if (!running_) break;
      uint64_t now = mono_us();
      for (auto it = timers_.begin(); it != timers_.end();) {
        if (it->second <= now) {
          due.push_back(it->first);
          it = timers_.erase(it);
        } else {
          ++it;
        }
      }
      while (!queue_.empty() && msgs.size() < 64) {
        msgs.push_back(std::move(queue_.front()));
        queue_.pop_front();
      }
    }
    for (uint32_t tok : due) core_->on_timer(tok);
    for (const auto& e : msgs) core_->on_message(e);
    {
      std::lock_guard<std::mutex> l(stats_mu_);
      stats_snapshot_ = core_->stats();
    }
  }
}

void NodeRuntime::maintenance_loop() {
  // background reconnect so reachability recovers without send pressure
  while (running_) {
    std::vector<ProcessId> retry;
    uint64_t now = mono_us();
    {
      std::lock_guard<std::mutex> l(peers_mu_);
      for (const auto& [p, at] : next_try_)
        if (!peer_fds_.count(p) && at <= now) retry.push_back(p);
    }
    for (ProcessId p : retry) connect_peer(p);
    std::unique_lock<std::mutex> l(queue_mu_);
    queue_cv_.wait_for(l, std::chrono::milliseconds(200), [this] { return !running_.load(); });
  }
}

bool NodeRuntime::connect_peer(ProcessId p) {
  const auto& info = cfg_.process(p);
  if (info.address.empty()) return false;
  auto [host, port] = split_address(info.address);
  int fd = tcp_connect(host, port, 250);
  if (fd >= 0) {
    auto hello = encode_hello(cfg_.digest);
    if (!write_all(fd, hello.data(), hello.size())) {
      ::close(fd);
      fd = -1;
    }
  }
  std::lock_guard<std::mutex> l(peers_mu_);
  if (fd < 0) {
    next_try_[p] = mono_us() + kReconnectBackoffUs;
    return false;
  }
  auto it = peer_fds_.find(p);
  if (it != peer_fds_.end()) {
    ::close(fd);  // raced with another connect
    return true;
  }
  peer_fds_[p] = fd;
  next_try_.erase(p);
  return true;
}

void NodeRuntime::drop_peer(ProcessId p) {
  std::lock_guard<std::mutex> l(peers_mu_);
  auto it = peer_fds_.find(p);
  if (it != peer_fds_.end()) {
    ::close(it->second);
    peer_fds_.erase(it);
  }
  next_try_[p] = mono_us() + kReconnectBackoffUs;
}

void NodeRuntime::do_send(ProcessId to, const Envelope& e) {
  if (to == self_) {
    enqueue(e);
    return;
  }
  int fd = -1;
  {
    std::lock_guard<std::mutex> l(peers_mu_);
    auto it = peer_fds_.find(to);
    if (it != peer_fds_.end()) fd = it->second;
  }
  if (fd < 0) {
    if (!connect_peer(to)) return;  // drop; protocol retransmits recover
    std::lock_guard<std::mutex> l(peers_mu_);
    fd = peer_fds_.at(to);
  }
  auto frame = encode(e);
  if (!write_all(fd, frame.data(), frame.size())) drop_peer(to);
}

void NodeRuntime::do_send_client(uint64_t client_id, const Envelope& e) {
  int fd = -1;
  {
    std::lock_guard<std::mutex> l(clients_mu_);
    auto it = client_fds_.find(client_id);
    if (it != client_fds_.end()) fd = it->second;
  }
  if (fd < 0) return;  // client gone; it will retry elsewhere
  auto frame = encode(e);
  if (!write_all(fd, frame.data(), frame.size())) {
    std::lock_guard<std::mutex> l(clients_mu_);
    auto it = client_fds_.find(client_id);
    if (it != client_fds_.end() && it->second == fd) client_fds_.erase(it);
  }
}

}  // namespace mrp
