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


#include <csignal>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "run_files.hpp"
#include "pipebft/bench/experiment.hpp"
#include "pipebft/pipeline/replica.hpp"
#include "pipebft/workload/client.hpp"

namespace pipebft::bench {

namespace {

// Blocks SIGTERM/SIGINT in every thread started afterwards so the main
// thread can collect them with sigtimedwait.
sigset_t block_termination() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGTERM);
  sigaddset(&set, SIGINT);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

bool wait_signal(const sigset_t& set, std::chrono::milliseconds timeout) {
  timespec ts{};
  ts.tv_sec = timeout.count() / 1000;
  ts.tv_nsec = (timeout.count() % 1000) * 1'000'000;
  return sigtimedwait(&set, nullptr, &ts) > 0;
}

std::vector<transport::PeerAddress> peers_of(const RunFiles& files) {
  std::vector<transport::PeerAddress> peers;
  const auto endpoints = files.endpoints();
  for (std::size_t i = 0; i < endpoints.size(); ++i) {
    peers.push_back({static_cast<NodeId>(i), endpoints[i].first, endpoints[i].second});
  }
  return peers;
}

}  // namespace

int replica_process(const std::filesystem::path& run_dir, NodeId id) {
  const sigset_t signals = block_termination();
  const RunFiles files(run_dir);
  const ExperimentConfig cfg = load_config(files.config());
  const auto keys = crypto::KeyStore::load(files.keys()).restricted_to(id);
  const auto out_dir = files.replica_dir(id);
  std::filesystem::create_directories(out_dir);

  pipeline::ReplicaOptions o;
  o.cluster = {cfg.n, cfg.f, id};
  o.protocol = cfg.protocol;
  o.topology = cfg.topology;
  o.schemes = cfg.schemes;
  o.batch_size = cfg.batch_size;
  o.batch_timeout = std::chrono::microseconds(cfg.batch_timeout_us);
  o.checkpoint_interval = cfg.checkpoint_interval;
  o.backend = cfg.storage;
  o.state_file = out_dir / "state.sqlite";
  o.active_set = cfg.workload.active_set;
  o.queue_count = cfg.queue_count();
  o.pool_capacity = cfg.pool_capacity;
  transport::TransportConfig net;
  net.replicas = peers_of(files);

  pipeline::Replica replica(o, net, keys);
  replica.start();
  if (!replica.wait_for_mesh(std::chrono::seconds(30))) {
    spdlog::error("replica {}: mesh incomplete", id);
    return 2;
  }
  write_marker(files.replica_ready(id), std::to_string(workload::monotonic_ns()));

  // Utilization samples every 100 ms until told to stop.
  std::vector<std::pair<std::int64_t, pipeline::UtilizationSample>> samples;
  samples.emplace_back(workload::monotonic_ns(), replica.utilization().sample());
  while (!wait_signal(signals, std::chrono::milliseconds(100))) {
    samples.emplace_back(workload::monotonic_ns(), replica.utilization().sample());
  }
  samples.emplace_back(workload::monotonic_ns(), replica.utilization().sample());

  replica.quiesce(std::chrono::milliseconds(300), std::chrono::seconds(15));
  replica.stop();

  std::vector<double> fractions;
  if (auto window = read_window(files.window())) {
    auto nearest = [&](std::int64_t t) -> const pipeline::UtilizationSample& {
      const auto* best = &samples.front();
      for (const auto& s : samples) {
        if (std::llabs(s.first - t) < std::llabs(best->first - t)) best = &s;
      }
      return best->second;
    };
    const auto& from = nearest(window->first);
    const auto& to = nearest(window->second);
    fractions = replica.utilization().per_thread(from, to);
  }
  replica.write_outputs(out_dir, fractions);
  std::ofstream util(out_dir / "utilization.csv");
  util << "thread,role,busy_fraction\n";
  const auto all_roles = replica.utilization().thread_roles();
  for (std::size_t i = 0; i < fractions.size() && i < all_roles.size(); ++i) {
    util << i << ',' << all_roles[i] << ',' << fractions[i] << '\n';
  }
  return 0;
}

int client_process(const std::filesystem::path& run_dir) {
  block_termination();
  const RunFiles files(run_dir);
  const ExperimentConfig cfg = load_config(files.config());
  const auto self = static_cast<NodeId>(cfg.n);
  const auto keys = crypto::KeyStore::load(files.keys()).restricted_to(self);

  workload::ClientOptions o;
  o.cluster = {cfg.n, cfg.f, 0};
  o.protocol = cfg.protocol;
  o.schemes = cfg.schemes;
  o.workload = cfg.workload;
  o.request_timeout = std::chrono::milliseconds(cfg.request_timeout_ms);
  o.spec_timeout = std::chrono::milliseconds(cfg.spec_timeout_ms);
  transport::TransportConfig net;
  net.self = self;
  net.replicas = peers_of(files);
  net.replica_input_threads = 1;
  net.output_threads = 1;

  workload::ClientEndpoint client(o, net, keys);
  client.start();
  if (auto missing = client.wait_for_replicas(std::chrono::seconds(30)); !missing.empty()) {
    spdlog::error("client: {} replicas unreachable", missing.size());
    return 2;
  }
  const std::int64_t t0 = workload::monotonic_ns();
  write_marker(files.client_started(), std::to_string(t0));
  const auto duration = std::chrono::duration_cast<std::chrono::nanoseconds>(
      std::chrono::duration<double>(cfg.duration_s));
  workload::RunResult res = client.run({duration, 0});
  client.stop();

  std::filesystem::create_directories(files.client_dir());
  workload::write_latency_csv(files.client_dir() / "latency.csv", res.records);
  const auto& c = res.counters;
  nlohmann::json j = {
      {"t0_ns", t0},
      {"submitted", c.submitted},
      {"frames", c.frames},
      {"completed", c.completed},
      {"timeouts", c.timeouts},
      {"failed", c.failed},
      {"resubmits", c.resubmits},
      {"certificates", c.certificates},
      {"bad_response_signatures", c.bad_response_signatures},
      {"stale_responses", c.stale_responses},
      {"spec_mismatches", c.spec_mismatches},
      {"safety_violation", res.safety_violation},
      {"violation", res.violation},
  };
  std::ofstream(files.client_dir() / "client.json") << j.dump(2) << '\n';
  if (res.safety_violation) {
    spdlog::error("client: {}", res.violation);
    return 3;
  }
  return 0;
}

}  // namespace pipebft::bench
