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

#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <mutex>
#include <thread>

#include "pipebft/transport/transport.hpp"

namespace pipebft::transport {
namespace {

using namespace std::chrono_literals;

class Inbox {
 public:
  void push(Inbound&& in) {
    {
      std::lock_guard lock(mu_);
      items_.push_back(std::move(in));
    }
    cv_.notify_all();
  }
  bool wait_for(std::size_t count, std::chrono::milliseconds timeout = 10s) {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] { return items_.size() >= count; });
  }
  std::vector<Inbound> items() {
    std::lock_guard lock(mu_);
    return items_;
  }
  std::size_t size() {
    std::lock_guard lock(mu_);
    return items_.size();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Inbound> items_;
};

class Mesh {
 public:
  explicit Mesh(std::size_t n, std::set<NodeId> skip = {}) : inboxes_(n + 1) {
    const auto ports = reserve_ports(n);
    for (std::size_t i = 0; i < n; ++i) {
      peers_.push_back({static_cast<NodeId>(i), "127.0.0.1", ports[i]});
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (skip.contains(static_cast<NodeId>(i))) {
        nodes_.push_back(nullptr);
        continue;
      }
      nodes_.push_back(make(static_cast<NodeId>(i), inboxes_[i]));
    }
  }

  std::unique_ptr<Transport> make(NodeId id, Inbox& box) {
    TransportConfig cfg;
    cfg.self = id;
    cfg.replicas = peers_;
    cfg.redial_interval = 20ms;
    auto t = std::make_unique<Transport>(cfg, [&box](Inbound&& in) { box.push(std::move(in)); });
    t->start();
    return t;
  }

  Transport& node(NodeId id) { return *nodes_[id]; }
  Inbox& inbox(NodeId id) { return inboxes_[id]; }
  std::vector<PeerAddress>& peers() { return peers_; }
  std::vector<NodeId> ids() const {
    std::vector<NodeId> out;
    for (auto& p : peers_) out.push_back(p.id);
    return out;
  }

 private:
  std::vector<PeerAddress> peers_;
  std::deque<Inbox> inboxes_;
  std::vector<std::unique_ptr<Transport>> nodes_;
};

messages::Prepare stamped(NodeId from, SeqNum seq) {
  return messages::Prepare{0, seq, Digest{}, from, {}};
}

int raw_hello(std::uint16_t port, NodeId claim) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) return -1;
  const Bytes hello = messages::encode_message(messages::Hello{claim});
  EXPECT_EQ(::send(fd, hello.data(), hello.size(), MSG_NOSIGNAL), static_cast<ssize_t>(hello.size()));
  return fd;
}

TEST(Transport, FourReplicasFormSixConnections) {
  Mesh mesh(4);
  std::uint64_t dialed = 0;
  for (NodeId i = 0; i < 4; ++i) {
    EXPECT_TRUE(mesh.node(i).wait_for_replicas(5s).empty()) << i;
  }
  for (NodeId i = 0; i < 4; ++i) {
    EXPECT_EQ(mesh.node(i).connection_count(), 3u);
    dialed += mesh.node(i).counters().connections_dialed;
  }
  EXPECT_EQ(dialed, 6u);
}

TEST(Transport, BroadcastExcludesSelf) {
  Mesh mesh(4);
  for (NodeId i = 0; i < 4; ++i) ASSERT_TRUE(mesh.node(i).wait_for_replicas(5s).empty());
  const auto ids = mesh.ids();
  EXPECT_EQ(mesh.node(1).broadcast(ids, make_frame(stamped(1, 9))), 3u);
  for (NodeId i : {0u, 2u, 3u}) {
    ASSERT_TRUE(mesh.inbox(i).wait_for(1));
    auto got = mesh.inbox(i).items();
    EXPECT_EQ(got[0].from, 1u);
    EXPECT_FALSE(got[0].from_client);
    EXPECT_EQ(std::get<messages::Prepare>(got[0].msg).seq, 9u);
  }
  std::this_thread::sleep_for(50ms);
  EXPECT_EQ(mesh.inbox(1).size(), 0u);
}

TEST(Transport, SelfDeliveryBypassesSockets) {
  Mesh mesh(4);
  ASSERT_TRUE(mesh.node(2).wait_for_replicas(5s).empty());
  const auto before = mesh.node(2).counters();
  EXPECT_TRUE(mesh.node(2).send(2, make_frame(stamped(2, 1))));
  ASSERT_TRUE(mesh.inbox(2).wait_for(1, 1s));
  const auto after = mesh.node(2).counters();
  EXPECT_EQ(after.local_deliveries, 1u);
  EXPECT_EQ(after.frames_sent, before.frames_sent);
}

TEST(Transport, OneMegabyteMessageRoundTrips) {
  Mesh mesh(2);
  ASSERT_TRUE(mesh.node(1).wait_for_replicas(5s).empty());
  messages::ClientSubmit big;
  messages::ClientRequest r;
  r.client_id = 1;
  r.operations.push_back({messages::OpKind::kWrite, 5, 6});
  r.payload.resize(1 << 20);
  for (std::size_t i = 0; i < r.payload.size(); ++i) r.payload[i] = static_cast<std::uint8_t>(i * 31);
  big.requests.push_back(r);
  ASSERT_TRUE(mesh.node(1).send(0, make_frame(big)));
  ASSERT_TRUE(mesh.inbox(0).wait_for(1));
  EXPECT_EQ(std::get<messages::ClientSubmit>(mesh.inbox(0).items()[0].msg), big);
}

TEST(Transport, PerConnectionFifo) {
  Mesh mesh(2);
  ASSERT_TRUE(mesh.node(1).wait_for_replicas(5s).empty());
  constexpr SeqNum kCount = 3000;
  for (SeqNum s = 0; s < kCount; ++s) mesh.node(1).send(0, make_frame(stamped(1, s)));
  ASSERT_TRUE(mesh.inbox(0).wait_for(kCount));
  const auto got = mesh.inbox(0).items();
  for (SeqNum s = 0; s < kCount; ++s) ASSERT_EQ(std::get<messages::Prepare>(got[s].msg).seq, s);
}

TEST(Transport, InterleavedPeersAllDelivered) {
  Mesh mesh(4);
  for (NodeId i = 0; i < 4; ++i) ASSERT_TRUE(mesh.node(i).wait_for_replicas(5s).empty());
  constexpr SeqNum kEach = 1500;
  std::vector<std::thread> senders;
  for (NodeId from = 1; from < 4; ++from) {
    senders.emplace_back([&, from] {
      for (SeqNum s = 0; s < kEach; ++s) mesh.node(from).send(0, make_frame(stamped(from, s)));
    });
  }
  for (auto& t : senders) t.join();
  ASSERT_TRUE(mesh.inbox(0).wait_for(3 * kEach));
  std::map<NodeId, SeqNum> next;
  for (const auto& in : mesh.inbox(0).items()) {
    const auto& p = std::get<messages::Prepare>(in.msg);
    EXPECT_EQ(p.sender_id, in.from);
    ASSERT_EQ(p.seq, next[in.from]++);
  }
}

TEST(Transport, GarbageDropsConnectionThenPeerReconnects) {
  Mesh mesh(2);
  ASSERT_TRUE(mesh.node(1).wait_for_replicas(5s).empty());
  mesh.node(1).send(0, make_frame(stamped(1, 0)));
  Bytes garbage = {0x00, 0x00, 0x00, 0x03, 0xee, 0x01, 0x02};
  mesh.node(1).inject_raw_for_test(0, garbage);
  const auto deadline = std::chrono::steady_clock::now() + 5s;
  while (mesh.node(0).counters().malformed == 0 && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(5ms);
  }
  EXPECT_EQ(mesh.node(0).counters().malformed, 1u);
  // The dialer notices the drop and reconnects; traffic flows again.
  bool delivered = false;
  for (int attempt = 0; attempt < 200 && !delivered; ++attempt) {
    mesh.node(1).send(0, make_frame(stamped(1, 1)));
    std::this_thread::sleep_for(25ms);
    for (const auto& in : mesh.inbox(0).items()) {
      delivered |= std::get<messages::Prepare>(in.msg).seq == 1;
    }
  }
  EXPECT_TRUE(delivered);
  EXPECT_GE(mesh.node(1).counters().connections_dialed, 2u);
}

TEST(Transport, MissingReplicaReportedAlone) {
  Mesh mesh(4, {3});
  EXPECT_EQ(mesh.node(0).wait_for_replicas(500ms), (std::vector<NodeId>{3}));
  try {
    mesh.node(1).require_replicas(300ms);
    FAIL() << "expected PeerUnreachable";
  } catch (const PeerUnreachable& e) {
    EXPECT_EQ(e.peers(), (std::vector<NodeId>{3}));
  }
  EXPECT_FALSE(mesh.node(0).send(3, make_frame(stamped(0, 0))));
  EXPECT_GE(mesh.node(0).counters().peer_down, 1u);
}

TEST(Transport, DuplicateIdentityRejectedWhileAlive) {
  Mesh mesh(2);
  ASSERT_TRUE(mesh.node(0).wait_for_replicas(5s).empty());
  const int impostor = raw_hello(mesh.peers()[0].port, 1);
  ASSERT_GE(impostor, 0);
  const auto deadline = std::chrono::steady_clock::now() + 5s;
  while (mesh.node(0).counters().duplicates_rejected == 0 &&
         std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(5ms);
  }
  EXPECT_EQ(mesh.node(0).counters().duplicates_rejected, 1u);
  ::close(impostor);
  mesh.node(0).send(1, make_frame(stamped(0, 4)));
  ASSERT_TRUE(mesh.inbox(1).wait_for(1));
}

TEST(Transport, SimultaneousDialsDeduplicated) {
  Mesh mesh(1);
  std::vector<int> fds(8, -1);
  std::vector<std::thread> dialers;
  for (std::size_t i = 0; i < fds.size(); ++i) {
    dialers.emplace_back([&, i] { fds[i] = raw_hello(mesh.peers()[0].port, 77); });
  }
  for (auto& t : dialers) t.join();
  const auto deadline = std::chrono::steady_clock::now() + 5s;
  while (mesh.node(0).counters().connections_accepted < fds.size() &&
         std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(5ms);
  }
  EXPECT_EQ(mesh.node(0).connection_count(), 1u);
  EXPECT_EQ(mesh.node(0).counters().duplicates_rejected, fds.size() - 1);
  for (int fd : fds) ::close(fd);
}

TEST(Transport, ClientsConnectToEveryReplica) {
  Mesh mesh(4);
  Inbox client_box;
  auto client = mesh.make(500, client_box);
  EXPECT_FALSE(client->is_replica_endpoint());
  ASSERT_TRUE(client->wait_for_replicas(5s).empty());
  for (NodeId r = 0; r < 4; ++r) {
    const auto deadline = std::chrono::steady_clock::now() + 5s;
    while (!mesh.node(r).connected(500) && std::chrono::steady_clock::now() < deadline) {
      std::this_thread::sleep_for(5ms);
    }
    ASSERT_TRUE(mesh.node(r).send(500, make_frame(stamped(r, r))));
  }
  ASSERT_TRUE(client_box.wait_for(4));
  client->send(0, make_frame(messages::ClientSubmit{}));
  ASSERT_TRUE(mesh.inbox(0).wait_for(1));
  EXPECT_TRUE(mesh.inbox(0).items()[0].from_client);
}

TEST(Transport, PeersSplitEvenlyAcrossOutputThreads) {
  Mesh mesh(5);
  for (NodeId i = 0; i < 5; ++i) ASSERT_TRUE(mesh.node(i).wait_for_replicas(5s).empty());
  for (NodeId i = 0; i < 5; ++i) {
    std::array<int, 2> load{};
    for (NodeId p = 0; p < 5; ++p) {
      if (p == i) continue;
      const std::size_t o = mesh.node(i).output_thread_of(p);
      ASSERT_LT(o, 2u);
      ++load[o];
    }
    EXPECT_EQ(load[0], 2);
    EXPECT_EQ(load[1], 2);
  }
}

TEST(Transport, MutedNodeGoesSilent) {
  Mesh mesh(2);
  ASSERT_TRUE(mesh.node(1).wait_for_replicas(5s).empty());
  mesh.node(1).mute(true);
  EXPECT_FALSE(mesh.node(1).send(0, make_frame(stamped(1, 0))));
  mesh.node(0).send(1, make_frame(stamped(0, 0)));
  std::this_thread::sleep_for(100ms);
  EXPECT_EQ(mesh.inbox(0).size(), 0u);
  EXPECT_EQ(mesh.inbox(1).size(), 0u);
  mesh.node(1).mute(false);
  mesh.node(1).send(0, make_frame(stamped(1, 1)));
  EXPECT_TRUE(mesh.inbox(0).wait_for(1));
}

TEST(Transport, IdleConnectionPersists) {
  Mesh mesh(2);
  ASSERT_TRUE(mesh.node(1).wait_for_replicas(5s).empty());
  std::this_thread::sleep_for(600ms);
  EXPECT_TRUE(mesh.node(0).connected(1));
  EXPECT_EQ(mesh.node(1).counters().connections_dialed, 1u);
}

}  // namespace
}  // namespace pipebft::transport
