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

#include <chrono>
#include <memory>

#include "pipebft/common/cluster.hpp"
#include "pipebft/transport/transport.hpp"
#include "pipebft/workload/generator.hpp"
#include "pipebft/workload/latency.hpp"

namespace pipebft::workload {

struct ClientOptions {
  ClusterConfig cluster;  // `self` is ignored; the endpoint id comes from the transport
  Protocol protocol = Protocol::kPbft;
  crypto::SchemeConfig schemes;
  WorkloadConfig workload;
  // PBFT: a request without f+1 matching replies by then is recorded as a
  // timeout and replaced by a fresh one.
  std::chrono::milliseconds request_timeout{1000};
  // Zyzzyva: wait for all n responses, then for acks on the certificate.
  std::chrono::milliseconds spec_timeout{50};
};

struct RunLimits {
  std::chrono::nanoseconds duration{std::chrono::seconds(10)};
  // Stop after this many completed requests (0 = no limit).
  std::uint64_t max_completions = 0;
};

struct ClientCounters {
  std::uint64_t submitted = 0;
  std::uint64_t frames = 0;
  std::uint64_t completed = 0;
  std::uint64_t timeouts = 0;
  std::uint64_t failed = 0;
  std::uint64_t resubmits = 0;
  std::uint64_t certificates = 0;
  std::uint64_t bad_response_signatures = 0;
  std::uint64_t stale_responses = 0;
  std::uint64_t spec_mismatches = 0;
};

struct RunResult {
  std::vector<LatencyRecord> records;  // timestamps relative to the run start
  ClientCounters counters;
  bool safety_violation = false;
  std::string violation;
};

// One client endpoint hosting `num_clients` logical clients, each keeping
// `num_req` requests outstanding. Submissions go to the primary in frames
// of `client_batch` requests; responses come from every replica. A single
// thread drives all logical clients.
class ClientEndpoint {
 public:
  ClientEndpoint(ClientOptions options, transport::TransportConfig net,
                 const crypto::KeyStore& keys);
  ~ClientEndpoint();
  ClientEndpoint(const ClientEndpoint&) = delete;
  ClientEndpoint& operator=(const ClientEndpoint&) = delete;

  void start();
  void stop();
  // Waits until connected to every replica; returns the missing ones.
  std::vector<NodeId> wait_for_replicas(std::chrono::milliseconds timeout) const;

  // Runs the closed loop. PBFT reply mismatches abort the run and set
  // `safety_violation`.
  RunResult run(RunLimits limits);

  NodeId id() const { return self_; }
  transport::TransportCounters transport_counters() const { return transport_->counters(); }

 private:
  ClientOptions options_;
  NodeId self_;
  std::unique_ptr<crypto::Authenticator> auth_;
  pipeline::WorkQueue<transport::Inbound> inbound_;
  std::unique_ptr<transport::Transport> transport_;
  std::unique_ptr<RequestGenerator> generator_;  // request_seq spans runs
};

}  // namespace pipebft::workload
