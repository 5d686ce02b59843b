// Copyright 2026 The pipebft Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pipebft/transport/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/uio.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <mutex>

#include <spdlog/spdlog.h>

namespace pipebft::transport {

namespace {

constexpr std::size_t kReadChunk = 64 * 1024;

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

bool write_all(int fd, const std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

// Writes the frames back to back with sendmsg, resuming after short writes.
bool write_frames(int fd, std::span<const Frame* const> frames) {
  constexpr std::size_t kMaxIov = 64;
  std::size_t idx = 0;
  std::size_t offset = 0;  // into frames[idx]
  while (idx < frames.size()) {
    iovec iov[kMaxIov];
    std::size_t cnt = 0;
    for (std::size_t i = idx; i < frames.size() && cnt < kMaxIov; ++i) {
      const Bytes& b = **frames[i];
      const std::size_t skip = i == idx ? offset : 0;
      iov[cnt].iov_base = const_cast<std::uint8_t*>(b.data() + skip);
      iov[cnt].iov_len = b.size() - skip;
      ++cnt;
    }
    msghdr msg{};
    msg.msg_iov = iov;
    msg.msg_iovlen = cnt;
    ssize_t n = ::sendmsg(fd, &msg, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    auto left = static_cast<std::size_t>(n);
    while (idx < frames.size() && left > 0) {
      const std::size_t rem = (*frames[idx])->size() - offset;
      if (left >= rem) {
        left -= rem;
        ++idx;
        offset = 0;
      } else {
        offset += left;
        left = 0;
      }
    }
  }
  return true;
}

bool read_exact(int fd, std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::recv(fd, data, len, 0);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      return false;
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

std::uint32_t load_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

}  // namespace

struct Transport::Connection {
  Connection(int fd_, NodeId peer_, bool client) : fd(fd_), peer(peer_), from_client(client) {}
  ~Connection() { ::close(fd); }

  int fd;
  NodeId peer;
  bool from_client;
  std::size_t output = 0;
  std::atomic<bool> alive{true};
  Bytes rbuf;
  std::size_t rpos = 0;
};

struct Transport::InputThread {
  InputThread() {
    if (::pipe(wake) != 0) throw std::runtime_error("pipe failed");
  }
  ~InputThread() {
    ::close(wake[0]);
    ::close(wake[1]);
  }
  void poke() {
    const char c = 'x';
    [[maybe_unused]] auto r = ::write(wake[1], &c, 1);
  }

  int wake[2];
  std::mutex mu;
  std::vector<std::shared_ptr<Connection>> adds;
  std::vector<std::shared_ptr<Connection>> conns;  // owned by the thread
};

struct Transport::AtomicCounters {
  std::atomic<std::uint64_t> frames_sent{0}, bytes_sent{0}, frames_received{0},
      bytes_received{0}, peer_down{0}, malformed{0}, duplicates_rejected{0},
      connections_accepted{0}, connections_dialed{0}, disconnects{0}, local_deliveries{0};
};

std::vector<std::uint16_t> reserve_ports(std::size_t count) {
  std::vector<int> fds;
  std::vector<std::uint16_t> ports;
  for (std::size_t i = 0; i < count; ++i) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (fd < 0 || ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      throw std::runtime_error("cannot reserve a port");
    }
    socklen_t len = sizeof(addr);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ports.push_back(ntohs(addr.sin_port));
    fds.push_back(fd);
  }
  for (int fd : fds) ::close(fd);
  return ports;
}

Transport::Transport(TransportConfig config, Handler handler)
    : config_(std::move(config)), handler_(std::move(handler)),
      counters_(std::make_unique<AtomicCounters>()) {
  listens_ = is_replica(config_.self);
  config_.replica_input_threads = std::max(1, config_.replica_input_threads);
  config_.output_threads = std::max(1, config_.output_threads);
}

Transport::~Transport() { stop(); }

bool Transport::is_replica(NodeId id) const {
  return std::any_of(config_.replicas.begin(), config_.replicas.end(),
                     [&](const PeerAddress& p) { return p.id == id; });
}

void Transport::start() {
  if (running_.exchange(true)) return;
  if (listens_) {
    const auto me = std::find_if(config_.replicas.begin(), config_.replicas.end(),
                                 [&](const PeerAddress& p) { return p.id == config_.self; });
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(me->port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listen_fd_, 256) != 0) {
      const std::string err = std::strerror(errno);
      ::close(listen_fd_);
      listen_fd_ = -1;
      running_ = false;
      throw std::runtime_error("cannot listen on port " + std::to_string(me->port) + ": " + err);
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    listen_port_ = ntohs(addr.sin_port);
  }
  for (int i = 0; i < 1 + config_.replica_input_threads; ++i) {
    inputs_.push_back(std::make_unique<InputThread>());
  }
  for (int i = 0; i < config_.output_threads; ++i) {
    out_queues_.push_back(std::make_unique<pipeline::WorkQueue<OutItem>>());
  }
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    threads_.emplace_back([this, i] { input_loop(*inputs_[i], i == 0); });
  }
  for (auto& q : out_queues_) threads_.emplace_back([this, p = q.get()] { output_loop(*p); });
  if (listens_) threads_.emplace_back([this] { accept_loop(); });
  threads_.emplace_back([this] { maintenance_loop(); });
}

void Transport::stop() {
  if (!running_.exchange(false)) return;
  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
  for (auto& in : inputs_) in->poke();
  for (auto& q : out_queues_) q->close();
  for (auto& t : threads_) t.join();
  threads_.clear();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
  std::unique_lock lock(conns_mu_);
  for (auto& [id, c] : conns_) ::shutdown(c->fd, SHUT_RDWR);
  conns_.clear();
  for (auto& in : inputs_) {
    in->conns.clear();
    in->adds.clear();
  }
}

std::shared_ptr<Transport::Connection> Transport::dial(const PeerAddress& peer) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(peer.port);
  if (::getaddrinfo(peer.host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
    return nullptr;
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const bool ok = fd >= 0 && ::connect(fd, res->ai_addr, res->ai_addrlen) == 0;
  ::freeaddrinfo(res);
  if (!ok) {
    if (fd >= 0) ::close(fd);
    return nullptr;
  }
  set_nodelay(fd);
  const Bytes hello = messages::encode_message(messages::Hello{config_.self});
  if (!write_all(fd, hello.data(), hello.size())) {
    ::close(fd);
    return nullptr;
  }
  counters_->connections_dialed++;
  return std::make_shared<Connection>(fd, peer.id, false);
}

bool Transport::register_connection(const std::shared_ptr<Connection>& conn) {
  InputThread* in = nullptr;
  {
    std::unique_lock lock(conns_mu_);
    auto it = conns_.find(conn->peer);
    if (it != conns_.end() && it->second->alive.load()) {
      counters_->duplicates_rejected++;
      return false;
    }
    auto [slot, fresh] = output_assignment_.try_emplace(conn->peer, next_output_);
    if (fresh) next_output_ = (next_output_ + 1) % out_queues_.size();
    conn->output = slot->second;
    conns_[conn->peer] = conn;
    if (conn->from_client) {
      in = inputs_[0].get();
    } else {
      in = inputs_[1 + next_replica_input_ % config_.replica_input_threads].get();
      ++next_replica_input_;
    }
  }
  {
    std::lock_guard lock(in->mu);
    in->adds.push_back(conn);
  }
  in->poke();
  return true;
}

void Transport::drop_connection(const std::shared_ptr<Connection>& conn, bool malformed) {
  if (!conn->alive.exchange(false)) return;
  ::shutdown(conn->fd, SHUT_RDWR);
  counters_->disconnects++;
  if (malformed) counters_->malformed++;
  std::unique_lock lock(conns_mu_);
  auto it = conns_.find(conn->peer);
  if (it != conns_.end() && it->second == conn) conns_.erase(it);
}

void Transport::accept_loop() {
  while (running_.load()) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 200) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    set_nodelay(fd);
    timeval tv{};
    tv.tv_sec = config_.handshake_timeout.count() / 1000;
    tv.tv_usec = (config_.handshake_timeout.count() % 1000) * 1000;
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    std::uint8_t header[messages::kFrameHeaderSize];
    std::optional<NodeId> who;
    if (read_exact(fd, header, sizeof(header))) {
      const std::uint32_t len = load_be32(header);
      if (len >= 1 && len <= 64) {
        Bytes body(len - 1);
        if (read_exact(fd, body.data(), body.size())) {
          try {
            auto msg = messages::decode_body(header[4], as_view(body));
            if (auto* h = std::get_if<messages::Hello>(&msg)) who = h->node;
          } catch (const messages::MalformedFrame&) {
          }
        }
      }
    }
    if (!who || *who == config_.self) {
      counters_->malformed++;
      ::close(fd);
      continue;
    }
    timeval zero{};
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &zero, sizeof(zero));
    auto conn = std::make_shared<Connection>(fd, *who, !is_replica(*who));
    counters_->connections_accepted++;
    if (!register_connection(conn)) ::shutdown(fd, SHUT_RDWR);
  }
}

void Transport::maintenance_loop() {
  while (running_.load()) {
    for (const auto& peer : config_.replicas) {
      if (!running_.load()) break;
      if (peer.id == config_.self || (listens_ && peer.id > config_.self)) continue;
      if (connected(peer.id)) continue;
      if (auto conn = dial(peer)) {
        if (!register_connection(conn)) ::shutdown(conn->fd, SHUT_RDWR);
      }
    }
    const auto until = std::chrono::steady_clock::now() + config_.redial_interval;
    while (running_.load() && std::chrono::steady_clock::now() < until) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
}

void Transport::input_loop(InputThread& in, bool client_facing) {
  pipeline::ThreadStats scratch("unused");
  pipeline::ThreadStats& stats =
      config_.utilization && (listens_ || !client_facing)
          ? config_.utilization->register_thread(client_facing ? "input_client" : "input_replica")
          : scratch;
  std::vector<pollfd> fds;
  while (running_.load()) {
    fds.clear();
    fds.push_back({in.wake[0], POLLIN, 0});
    for (auto& c : in.conns) fds.push_back({c->fd, POLLIN, 0});
    const int ready = ::poll(fds.data(), fds.size(), 200);
    if (ready < 0 && errno != EINTR) break;
    if (fds[0].revents & POLLIN) {
      char buf[64];
      while (::read(in.wake[0], buf, sizeof(buf)) == sizeof(buf)) {
      }
      std::lock_guard lock(in.mu);
      for (auto& c : in.adds) in.conns.push_back(std::move(c));
      in.adds.clear();
    }
    for (std::size_t i = 1; i < fds.size(); ++i) {
      if (fds[i].revents == 0) continue;
      const auto& conn = in.conns[i - 1];
      if (!conn->alive.load()) continue;
      pipeline::BusyScope busy(stats);
      Bytes& buf = conn->rbuf;
      const std::size_t old = buf.size();
      buf.resize(old + kReadChunk);
      const ssize_t n = ::recv(conn->fd, buf.data() + old, kReadChunk, MSG_DONTWAIT);
      if (n <= 0) {
        buf.resize(old);
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)) continue;
        drop_connection(conn, false);
        continue;
      }
      buf.resize(old + static_cast<std::size_t>(n));
      counters_->bytes_received += static_cast<std::uint64_t>(n);
      bool bad = false;
      while (buf.size() - conn->rpos >= messages::kFrameHeaderSize) {
        const std::uint8_t* p = buf.data() + conn->rpos;
        const std::uint32_t len = load_be32(p);
        if (len < 1 || len > messages::kMaxFrameBody) {
          bad = true;
          break;
        }
        if (buf.size() - conn->rpos < 4 + std::size_t{len}) break;
        try {
          auto msg = messages::decode_body(p[4], ByteView(p + messages::kFrameHeaderSize, len - 1));
          counters_->frames_received++;
          if (!std::holds_alternative<messages::Hello>(msg) && !muted_.load()) {
            handler_(Inbound{conn->peer, conn->from_client, std::move(msg)});
          }
        } catch (const messages::MalformedFrame&) {
          bad = true;
          break;
        }
        conn->rpos += 4 + std::size_t{len};
      }
      if (bad) {
        spdlog::debug("dropping connection to {}: malformed frame", conn->peer);
        drop_connection(conn, true);
        continue;
      }
      if (conn->rpos == buf.size()) {
        buf.clear();
        conn->rpos = 0;
      } else if (conn->rpos > buf.size() / 2) {
        buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(conn->rpos));
        conn->rpos = 0;
      }
    }
    std::erase_if(in.conns, [](const auto& c) { return !c->alive.load(); });
  }
}

void Transport::output_loop(pipeline::WorkQueue<OutItem>& queue) {
  pipeline::ThreadStats scratch("unused");
  pipeline::ThreadStats& stats =
      config_.utilization ? config_.utilization->register_thread("output") : scratch;
  std::vector<OutItem> batch;
  while (running_.load() || queue.size() > 0) {
    batch.clear();
    queue.pop_many(batch, 128, std::chrono::milliseconds(100));
    if (batch.empty() && queue.closed()) break;
    pipeline::BusyScope busy(stats);
    std::vector<const Frame*> run;
    for (std::size_t i = 0; i < batch.size();) {
      // Coalesce consecutive frames for the same connection.
      const auto& conn = batch[i].conn;
      std::size_t j = i;
      run.clear();
      std::uint64_t bytes = 0;
      for (; j < batch.size() && batch[j].conn == conn; ++j) {
        run.push_back(&batch[j].frame);
        bytes += batch[j].frame->size();
      }
      const std::size_t count = j - i;
      i = j;
      if (!conn->alive.load()) {
        counters_->peer_down += count;
        continue;
      }
      if (!write_frames(conn->fd, run)) {
        counters_->peer_down += count;
        drop_connection(conn, false);
        continue;
      }
      counters_->frames_sent += count;
      counters_->bytes_sent += bytes;
    }
  }
}

bool Transport::send(NodeId to, const Frame& frame) {
  if (muted_.load() || !running_.load()) return false;
  if (to == config_.self) {
    counters_->local_deliveries++;
    handler_(Inbound{to, !listens_, messages::decode_message(as_view(*frame))});
    return true;
  }
  std::shared_ptr<Connection> conn;
  {
    std::shared_lock lock(conns_mu_);
    auto it = conns_.find(to);
    if (it != conns_.end()) conn = it->second;
  }
  if (!conn || !conn->alive.load()) {
    counters_->peer_down++;
    return false;
  }
  out_queues_[conn->output]->push(OutItem{std::move(conn), frame});
  return true;
}

std::size_t Transport::broadcast(std::span<const NodeId> group, const Frame& frame) {
  std::size_t sent = 0;
  for (NodeId id : group) {
    if (id != config_.self && send(id, frame)) ++sent;
  }
  return sent;
}

bool Transport::inject_raw_for_test(NodeId peer, const Bytes& bytes) {
  return send(peer, std::make_shared<const Bytes>(bytes));
}

bool Transport::connected(NodeId peer) const {
  std::shared_lock lock(conns_mu_);
  auto it = conns_.find(peer);
  return it != conns_.end() && it->second->alive.load();
}

std::size_t Transport::connection_count() const {
  std::shared_lock lock(conns_mu_);
  return static_cast<std::size_t>(std::count_if(
      conns_.begin(), conns_.end(), [](const auto& kv) { return kv.second->alive.load(); }));
}

std::size_t Transport::output_thread_of(NodeId peer) const {
  std::shared_lock lock(conns_mu_);
  auto it = output_assignment_.find(peer);
  return it == output_assignment_.end() ? SIZE_MAX : it->second;
}

std::vector<NodeId> Transport::wait_for_replicas(std::chrono::milliseconds timeout) const {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::vector<NodeId> missing;
  do {
    missing.clear();
    for (const auto& p : config_.replicas) {
      if (p.id != config_.self && !connected(p.id)) missing.push_back(p.id);
    }
    if (missing.empty()) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  } while (std::chrono::steady_clock::now() < deadline);
  return missing;
}

void Transport::require_replicas(std::chrono::milliseconds timeout) const {
  auto missing = wait_for_replicas(timeout);
  if (missing.empty()) return;
  std::string what = "unreachable peers:";
  for (NodeId id : missing) what += " " + std::to_string(id);
  throw PeerUnreachable(std::move(missing), what);
}

TransportCounters Transport::counters() const {
  const auto& c = *counters_;
  return {c.frames_sent.load(),        c.bytes_sent.load(),        c.frames_received.load(),
          c.bytes_received.load(),     c.peer_down.load(),         c.malformed.load(),
          c.duplicates_rejected.load(), c.connections_accepted.load(),
          c.connections_dialed.load(), c.disconnects.load(),       c.local_deliveries.load()};
}

}  // namespace pipebft::transport
