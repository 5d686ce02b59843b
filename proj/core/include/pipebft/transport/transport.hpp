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

#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "pipebft/messages/messages.hpp"
#include "pipebft/pipeline/utilization.hpp"
#include "pipebft/pipeline/work_queue.hpp"

namespace pipebft::transport {

struct PeerAddress {
  NodeId id = 0;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

struct TransportConfig {
  NodeId self = 0;
  // Replica endpoints. A replica listens on its own entry and dials every
  // replica with a lower id; a client (self not listed) dials all of them.
  std::vector<PeerAddress> replicas;
  int replica_input_threads = 2;
  int output_threads = 2;
  std::chrono::milliseconds redial_interval{100};
  std::chrono::milliseconds handshake_timeout{2000};
  // Optional; input and output threads report busy time here.
  pipeline::UtilizationTracker* utilization = nullptr;
};

using Frame = std::shared_ptr<const Bytes>;

inline Frame make_frame(const messages::Message& m) {
  return std::make_shared<const Bytes>(messages::encode_message(m));
}

struct Inbound {
  NodeId from = 0;
  bool from_client = false;
  messages::Message msg;
};

class PeerUnreachable : public std::runtime_error {
 public:
  PeerUnreachable(std::vector<NodeId> peers, const std::string& what)
      : std::runtime_error(what), peers_(std::move(peers)) {}
  const std::vector<NodeId>& peers() const { return peers_; }

 private:
  std::vector<NodeId> peers_;
};

struct TransportCounters {
  std::uint64_t frames_sent = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t frames_received = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t peer_down = 0;        // sends dropped for lack of a connection
  std::uint64_t malformed = 0;        // connections dropped for bad frames
  std::uint64_t duplicates_rejected = 0;
  std::uint64_t connections_accepted = 0;
  std::uint64_t connections_dialed = 0;
  std::uint64_t disconnects = 0;
  std::uint64_t local_deliveries = 0;
};

// Reserves `count` distinct free loopback ports.
std::vector<std::uint16_t> reserve_ports(std::size_t count);

// TCP mesh with identity handshake and length-prefixed frames. Input
// threads own socket reads (one thread for clients, the rest split the
// replicas); output threads own socket writes, with peers assigned round
// robin. The handler runs on input threads and must not block.
class Transport {
 public:
  using Handler = std::function<void(Inbound&&)>;

  Transport(TransportConfig config, Handler handler);
  ~Transport();
  Transport(const Transport&) = delete;
  Transport& operator=(const Transport&) = delete;

  void start();
  void stop();

  // Waits for a connection to every other replica; returns those still
  // missing after `timeout`.
  std::vector<NodeId> wait_for_replicas(std::chrono::milliseconds timeout) const;
  // Same, but throws PeerUnreachable naming the missing peers.
  void require_replicas(std::chrono::milliseconds timeout) const;

  // Enqueues on the peer's output thread. Frames to self are decoded and
  // handed straight to the handler. Returns false when the peer is down.
  bool send(NodeId to, const Frame& frame);
  // Sends to every member of `group` except self.
  std::size_t broadcast(std::span<const NodeId> group, const Frame& frame);

  // Failure injection: a muted transport neither sends nor delivers.
  void mute(bool on) { muted_.store(on); }
  bool muted() const { return muted_.load(); }

  bool connected(NodeId peer) const;
  std::size_t connection_count() const;
  std::size_t output_thread_of(NodeId peer) const;
  bool is_replica_endpoint() const { return listens_; }
  std::uint16_t listen_port() const { return listen_port_; }
  TransportCounters counters() const;

  // Test hook: writes raw bytes on the connection to `peer`.
  bool inject_raw_for_test(NodeId peer, const Bytes& bytes);

 private:
  struct Connection;
  struct InputThread;
  struct OutItem {
    std::shared_ptr<Connection> conn;
    Frame frame;
  };

  void accept_loop();
  void maintenance_loop();
  void input_loop(InputThread& in, bool client_facing);
  void output_loop(pipeline::WorkQueue<OutItem>& queue);
  std::shared_ptr<Connection> dial(const PeerAddress& peer);
  bool register_connection(const std::shared_ptr<Connection>& conn);
  void drop_connection(const std::shared_ptr<Connection>& conn, bool malformed);
  bool is_replica(NodeId id) const;

  TransportConfig config_;
  Handler handler_;
  bool listens_ = false;
  int listen_fd_ = -1;
  std::uint16_t listen_port_ = 0;
  std::atomic<bool> running_{false};
  std::atomic<bool> muted_{false};

  mutable std::shared_mutex conns_mu_;
  std::map<NodeId, std::shared_ptr<Connection>> conns_;
  std::map<NodeId, std::size_t> output_assignment_;
  std::size_t next_output_ = 0;
  std::size_t next_replica_input_ = 0;

  std::vector<std::unique_ptr<InputThread>> inputs_;  // [0] serves clients
  std::vector<std::unique_ptr<pipeline::WorkQueue<OutItem>>> out_queues_;
  std::vector<std::thread> threads_;

  struct AtomicCounters;
  std::unique_ptr<AtomicCounters> counters_;
};

}  // namespace pipebft::transport
