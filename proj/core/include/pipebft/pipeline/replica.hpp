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
#include <filesystem>
#include <memory>
#include <thread>
#include <variant>

#include "pipebft/common/cluster.hpp"
#include "pipebft/ledger/state_store.hpp"
#include "pipebft/pipeline/buffer_pool.hpp"
#include "pipebft/pipeline/checkpoint.hpp"
#include "pipebft/pipeline/execution_queue_array.hpp"
#include "pipebft/pipeline/executor.hpp"
#include "pipebft/pipeline/sequencer.hpp"
#include "pipebft/pipeline/topology.hpp"
#include "pipebft/pipeline/utilization.hpp"
#include "pipebft/transport/transport.hpp"

namespace pipebft::pbft {
class Engine;
}
namespace pipebft::zyzzyva {
class ReplicaEngine;
}

namespace pipebft::pipeline {

struct ReplicaOptions {
  ClusterConfig cluster;
  Protocol protocol = Protocol::kPbft;
  ThreadTopology topology;
  crypto::SchemeConfig schemes;
  std::size_t batch_size = 100;
  std::chrono::microseconds batch_timeout{2000};
  std::uint64_t checkpoint_interval = 100;  // blocks
  ledger::Backend backend = ledger::Backend::kInMemory;
  std::filesystem::path state_file;  // required for the file-backed store
  std::uint64_t active_set = ledger::kDefaultActiveSet;
  // Queue-array size (see queue_count); also bounds the consensus window.
  std::size_t queue_count = 4096;
  std::size_t pool_capacity = 1024;  // pooled frame buffers; 0 disables reuse
  bool keep_audit = true;            // remember executed operations for replay
};

// Operations of one executed batch, for the reference replay.
struct AuditBatch {
  messages::RequestBatch batch;  // payloads and signatures stripped
};

struct ReplicaMetrics {
  std::uint64_t executed_batches = 0;
  std::uint64_t executed_txns = 0;
  std::uint64_t proposed_batches = 0;
  std::uint64_t bad_client_signatures = 0;
  std::uint64_t forwarded_requests = 0;
  std::uint64_t stable_checkpoints = 0;
  std::uint64_t unroutable = 0;
  std::uint64_t window_overflows = 0;
  std::map<std::string, std::uint64_t> sent;      // frames by message kind
  std::map<std::string, std::uint64_t> received;  // frames by message kind
  std::map<std::string, std::uint64_t> engine;    // consensus counters
  PoolStats pool;
  transport::TransportCounters transport;
};

// audit.bin: each batch as a u32 big-endian length followed by
// encode_batch() bytes.
void write_audit(const std::vector<AuditBatch>& audit, const std::filesystem::path& path);
std::vector<messages::RequestBatch> read_audit(const std::filesystem::path& path);

// One replica: a staged thread pipeline around a consensus engine.
// input threads -> batch threads (primary) -> worker -> execute -> output,
// plus a checkpoint thread. execute_threads = 0 runs execution on the worker,
// batch_threads = 0 runs batching on the worker.
class Replica {
 public:
  Replica(ReplicaOptions options, transport::TransportConfig net, const crypto::KeyStore& keys);
  ~Replica();
  Replica(const Replica&) = delete;
  Replica& operator=(const Replica&) = delete;

  void start();
  // Waits until no work has been processed for `idle`, bounded by `limit`.
  bool quiesce(std::chrono::milliseconds idle, std::chrono::milliseconds limit);
  void stop();

  bool wait_for_mesh(std::chrono::milliseconds timeout) const;
  void mute(bool on) { transport_->mute(on); }

  // Only meaningful after stop() (or from the execute thread).
  const ledger::Blockchain& chain() const { return executor_->chain(); }
  const ledger::StateStore& state() const { return executor_->state(); }
  const std::vector<AuditBatch>& audit() const { return audit_; }

  // Engine counters are owned by the worker; read them after stop().
  ReplicaMetrics metrics() const;
  UtilizationTracker& utilization() { return utilization_; }
  const ReplicaOptions& options() const { return options_; }
  NodeId id() const { return options_.cluster.self; }
  bool is_primary() const { return options_.cluster.primary(0) == options_.cluster.self; }

  // Writes chain.dump, state.csv, audit.bin and metrics.csv into `dir`.
  void write_outputs(const std::filesystem::path& dir,
                     const std::vector<double>& utilization_fractions = {}) const;

 private:
  struct LocalProposal {
    messages::PrePrepare pp;
  };
  struct StableNotice {
    SeqNum txn_seq;
  };
  using WorkItem = std::variant<transport::Inbound, LocalProposal, StableNotice>;

  void on_inbound(transport::Inbound&& in);
  void batch_loop(ThreadStats& stats);
  void worker_loop(ThreadStats& stats);
  void execute_loop(ThreadStats& stats);
  void checkpoint_loop(ThreadStats& stats);

  // Batching shared by batch threads and (B = 0) the worker.
  struct Pending {
    std::vector<messages::ClientRequest> requests;
    SteadyClock::time_point first_arrival{};
  };
  bool fill_batch(Pending& pending, std::chrono::microseconds wait);
  void propose(std::vector<messages::ClientRequest> requests);

  void handle_work(WorkItem& item);
  void on_preprepare(const messages::PrePrepare& pp, bool local);
  void schedule(ExecuteDirective directive);
  void execute_ready();
  void execute_one(const ExecuteDirective& d);

  transport::Frame frame_of(const messages::Message& m);
  void broadcast(const messages::Message& m);
  void send_to(NodeId to, const messages::Message& m);
  void touch() { last_activity_ns_.store(SteadyClock::now().time_since_epoch().count()); }

  ReplicaOptions options_;
  std::vector<NodeId> replicas_;
  std::vector<NodeId> peers_;
  std::unique_ptr<crypto::Authenticator> auth_;
  UtilizationTracker utilization_;
  BufferPool<Bytes> frames_;
  std::unique_ptr<transport::Transport> transport_;

  WorkQueue<messages::ClientRequest> requests_;
  WorkQueue<WorkItem> work_;
  WorkQueue<messages::CheckpointMsg> checkpoints_;
  ExecutionQueueArray exec_queues_;
  SequenceAssigner sequencer_;

  std::unique_ptr<pbft::Engine> pbft_;
  std::unique_ptr<zyzzyva::ReplicaEngine> zyzzyva_;
  std::unique_ptr<Executor> executor_;
  CheckpointTracker checkpoint_tracker_;
  std::vector<AuditBatch> audit_;

  std::atomic<bool> running_{false};
  std::atomic<std::int64_t> last_activity_ns_{0};
  std::vector<std::thread> threads_;
  Pending worker_pending_;  // B = 0 only

  struct Counters;
  std::unique_ptr<Counters> counters_;
};

}  // namespace pipebft::pipeline
