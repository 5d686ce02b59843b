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

#include <memory>
#include <optional>
#include <vector>

#include "pipebft/crypto/crypto.hpp"
#include "pipebft/pipeline/replica.hpp"
#include "pipebft/workload/client.hpp"

namespace pipebft::testing {

// n replicas and one client endpoint over loopback inside one process.
struct LocalClusterConfig {
  std::size_t n = 4;
  std::size_t f = 1;
  Protocol protocol = Protocol::kPbft;
  pipeline::ThreadTopology topology;
  crypto::SchemeConfig schemes;
  std::size_t batch_size = 10;
  std::chrono::microseconds batch_timeout{1000};
  std::uint64_t checkpoint_interval = 5;
  std::size_t pool_capacity = 1024;
  workload::WorkloadConfig workload;
  std::chrono::milliseconds spec_timeout{50};
  std::optional<crypto::Scheme> client_scheme;  // what the client actually signs with
};

class LocalCluster {
 public:
  explicit LocalCluster(const LocalClusterConfig& cfg, const crypto::KeyStore* keys = nullptr)
      : cfg_(cfg) {
    const auto ports = pipebft::transport::reserve_ports(cfg.n);
    std::vector<transport::PeerAddress> peers;
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < cfg.n; ++i) {
      peers.push_back({static_cast<NodeId>(i), "127.0.0.1", ports[i]});
      ids.push_back(static_cast<NodeId>(i));
    }
    const auto client_id = static_cast<NodeId>(cfg.n);
    ids.push_back(client_id);
    keys_ = keys ? *keys : crypto::KeyStore::generate(ids, cfg.schemes.needs_rsa());
    for (std::size_t i = 0; i < cfg.n; ++i) {
      pipeline::ReplicaOptions o;
      o.cluster = {cfg.n, cfg.f, static_cast<NodeId>(i)};
      o.protocol = cfg.protocol;
      o.topology = cfg.topology;
      o.schemes = cfg.schemes;
      o.batch_size = cfg.batch_size;
      o.batch_timeout = cfg.batch_timeout;
      o.checkpoint_interval = cfg.checkpoint_interval;
      o.active_set = cfg.workload.active_set;
      o.pool_capacity = cfg.pool_capacity;
      transport::TransportConfig net;
      net.replicas = peers;
      replicas_.push_back(std::make_unique<pipeline::Replica>(o, net, keys_));
    }
    workload::ClientOptions co;
    co.cluster = {cfg.n, cfg.f, 0};
    co.protocol = cfg.protocol;
    co.schemes = cfg.schemes;
    if (cfg.client_scheme) co.schemes.client = *cfg.client_scheme;
    co.workload = cfg.workload;
    co.spec_timeout = cfg.spec_timeout;
    transport::TransportConfig net;
    net.self = client_id;
    net.replicas = peers;
    client_ = std::make_unique<workload::ClientEndpoint>(co, net, keys_);
  }

  ~LocalCluster() { stop(); }

  bool start(std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
    for (auto& r : replicas_) r->start();
    client_->start();
    for (auto& r : replicas_) {
      if (!r->wait_for_mesh(timeout)) return false;
    }
    return client_->wait_for_replicas(timeout).empty();
  }

  void stop() {
    if (stopped_) return;
    stopped_ = true;
    for (auto& r : replicas_) r->quiesce(std::chrono::milliseconds(200), std::chrono::seconds(10));
    client_->stop();
    for (auto& r : replicas_) r->stop();
  }

  pipeline::Replica& replica(std::size_t i) { return *replicas_[i]; }
  workload::ClientEndpoint& client() { return *client_; }
  std::size_t size() const { return replicas_.size(); }

 private:
  LocalClusterConfig cfg_;
  crypto::KeyStore keys_;
  std::vector<std::unique_ptr<pipeline::Replica>> replicas_;
  std::unique_ptr<workload::ClientEndpoint> client_;
  bool stopped_ = false;
};

}  // namespace pipebft::testing
