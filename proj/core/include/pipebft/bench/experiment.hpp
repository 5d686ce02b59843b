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

#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipebft/common/cluster.hpp"
#include "pipebft/crypto/crypto.hpp"
#include "pipebft/ledger/state_store.hpp"
#include "pipebft/pipeline/topology.hpp"
#include "pipebft/workload/generator.hpp"

namespace pipebft::bench {

class CannotFailPrimary : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ClusterStartFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Replicas disagree on the chain or the state, or a client saw conflicting
// replies.
class SafetyViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FailureSpec {
  NodeId replica = 0;
  double at_s = 0;  // offset from the client's start
  bool operator==(const FailureSpec&) const = default;
};

struct ExperimentConfig {
  std::string name = "default";
  Protocol protocol = Protocol::kPbft;
  std::size_t n = 4;
  std::size_t f = 1;
  pipeline::ThreadTopology topology;
  std::size_t batch_size = 100;
  std::uint32_t batch_timeout_us = 2000;
  std::uint64_t checkpoint_interval = 100;
  crypto::SchemeConfig schemes;
  ledger::Backend storage = ledger::Backend::kInMemory;
  workload::WorkloadConfig workload;
  // Total run length; the first warmup_s seconds are not measured.
  double duration_s = 10;
  double warmup_s = 2;
  int repetitions = 3;
  std::vector<FailureSpec> failures;
  std::uint32_t spec_timeout_ms = 50;
  std::uint32_t request_timeout_ms = 2000;
  std::size_t max_queue_count = std::size_t{1} << 16;
  std::size_t pool_capacity = 1024;
  // Replica host names by id; empty means every replica on loopback.
  std::vector<std::string> hosts;

  // Throws std::invalid_argument (CannotFailPrimary for a primary failure).
  void validate() const;
  std::size_t queue_count() const;
  // "pbft 1E 2B"; marks the zyzzyva 0E 0B run as the protocol-centric
  // baseline approximation.
  std::string label() const;
  bool operator==(const ExperimentConfig&) const = default;
};

// JSON object with the ExperimentConfig fields; missing keys keep defaults
// and unknown keys are rejected. See README, "Experiment config".
ExperimentConfig parse_config(const std::string& json);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_json(const ExperimentConfig& cfg);

// Named scheme presets: nosig, mac_ds (MAC between replicas, Ed25519
// clients), ds_fast, ds_slow.
crypto::SchemeConfig scheme_preset(std::string_view name);
std::string scheme_label(const crypto::SchemeConfig& s);

// Sweepable parameters: batch_size, ops_per_txn, payload_bytes, scheme,
// storage, num_clients, topology, protocol, failures, num_req,
// spec_timeout_ms, client_batch, n. `failures` takes a count of backups
// stopped at time 0 or a list like "3@2.5+2@4".
void apply_parameter(ExperimentConfig& cfg, std::string_view param, std::string_view value);
std::vector<std::string> split_values(std::string_view list);

struct MetricsReport {
  std::string experiment;
  std::string run;
  std::string label;
  std::string param;  // sweep parameter and value, empty for plain runs
  std::string value;
  double measured_s = 0;
  double throughput_txns_per_s = 0;
  double throughput_ops_per_s = 0;
  double latency_mean_ms = 0;
  double latency_p50_ms = 0;
  double latency_p99_ms = 0;
  std::uint64_t completed = 0;
  std::uint64_t ops = 0;
  std::uint64_t failed = 0;
  std::uint64_t fast = 0;
  std::uint64_t certified = 0;
  std::uint64_t resubmits = 0;
  std::uint64_t chain_height = 0;
  // Whole-process CPU seconds over the run (backups averaged).
  double cpu_primary_s = 0;
  double cpu_backup_s = 0;
  double cpu_client_s = 0;
  std::map<std::string, std::uint64_t> messages;  // frames sent, all replicas
  std::map<std::string, double> utilization;      // "primary.worker" -> busy fraction
};

// Column order of every results CSV.
std::vector<std::string> report_columns();
std::vector<std::string> report_row(const MetricsReport& r);
void write_reports(const std::filesystem::path& path, const std::vector<MetricsReport>& rows);

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<MetricsReport> runs;
  MetricsReport median;  // per-field median over the repetitions
};

struct RunnerOptions {
  // Binary providing the `replica` and `client` subcommands.
  std::filesystem::path executable;
  std::filesystem::path results_dir = "results";
  bool keep_run_dirs = true;
  std::function<void(const std::string&)> log;
};

// Spawns a local cluster per repetition, injects failures, checks chains and
// state at shutdown (throws SafetyViolation) and writes
// results/<name>/<run>.csv plus results/<name>/summary.csv.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunnerOptions& runner);

// One experiment per value; writes results/<name>/sweep_<param>.csv with the
// median row of each.
std::vector<ExperimentResult> sweep(const ExperimentConfig& base, std::string_view param,
                                    const std::vector<std::string>& values,
                                    const RunnerOptions& runner);

// Child process bodies, driven by files in `run_dir`.
int replica_process(const std::filesystem::path& run_dir, NodeId id);
int client_process(const std::filesystem::path& run_dir);

}  // namespace pipebft::bench
