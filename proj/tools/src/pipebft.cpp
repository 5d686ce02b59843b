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
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "pipebft/bench/experiment.hpp"
#include "pipebft/ledger/blockchain.hpp"

namespace {

using namespace pipebft;

std::filesystem::path self_executable() { return std::filesystem::read_symlink("/proc/self/exe"); }

bench::RunnerOptions runner_for(const std::string& results) {
  bench::RunnerOptions r;
  r.executable = self_executable();
  r.results_dir = results;
  r.log = [](const std::string& m) { spdlog::info("{}", m); };
  return r;
}

void print_reports(const std::vector<bench::MetricsReport>& rows) {
  for (const auto& r : rows) {
    std::cout << r.experiment << " " << r.run << " [" << r.label << "]";
    if (!r.param.empty()) std::cout << " " << r.param << "=" << r.value;
    std::cout << "  " << r.throughput_txns_per_s << " txn/s  " << r.throughput_ops_per_s
              << " ops/s  p50 " << r.latency_p50_ms << " ms  p99 " << r.latency_p99_ms
              << " ms\n";
  }
}

int check_chains(const std::vector<std::string>& files) {
  std::optional<std::string> first;
  int rc = 0;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    std::istringstream parse(text);
    const auto blocks = ledger::read_chain_dump(parse);
    // The genesis link names the first primary; replica 0 by convention.
    const bool valid = ledger::validate_chain(blocks, 0);
    std::cout << f << ": " << blocks.size() << " blocks, " << (valid ? "valid" : "INVALID");
    if (!first) {
      first = text;
    } else if (text != *first) {
      std::cout << ", DIFFERS from " << files.front();
      rc = 3;
    }
    std::cout << '\n';
    if (!valid) rc = 3;
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pipebft: pipelined BFT replicas and benchmark harness"};
  app.require_subcommand(1);

  auto* bench_cmd = app.add_subcommand("bench", "Run experiments on a local cluster");
  bench_cmd->require_subcommand(1);
  std::string config_path, results = "results", param, values;
  int reps = 0;
  double duration = 0;

  auto* run = bench_cmd->add_subcommand("run", "Run one experiment");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--results", results, "Results directory");
  run->add_option("--repetitions", reps, "Override the repetition count");
  run->add_option("--duration", duration, "Override duration_s");

  auto* sweep = bench_cmd->add_subcommand("sweep", "Sweep one parameter over a list of values");
  sweep->add_option("--config", config_path, "Base experiment config (JSON)");
  sweep->add_option("--param", param, "Parameter to vary")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--results", results, "Results directory");
  sweep->add_option("--repetitions", reps, "Override the repetition count");
  sweep->add_option("--duration", duration, "Override duration_s");

  std::string run_dir;
  std::uint32_t replica_id = 0;
  auto* replica = app.add_subcommand("replica", "Run one replica of a bench run")->group("");
  replica->add_option("--run-dir", run_dir)->required();
  replica->add_option("--id", replica_id)->required();
  auto* client = app.add_subcommand("client", "Run the client endpoint of a bench run")->group("");
  client->add_option("--run-dir", run_dir)->required();

  std::size_t key_ids = 5;
  bool with_rsa = false;
  std::string key_out;
  auto* keygen = app.add_subcommand("keygen", "Generate a key file for ids 0..N-1");
  keygen->add_option("--ids", key_ids, "Number of identities (replicas + clients)");
  keygen->add_option("--out", key_out, "Output path")->required();
  keygen->add_flag("--rsa", with_rsa, "Also provision RSA-2048 keys");

  std::vector<std::string> dumps;
  auto* chain = app.add_subcommand("check-chains", "Validate chain dumps and compare them");
  chain->add_option("dumps", dumps, "chain.dump files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*replica) return bench::replica_process(run_dir, replica_id);
    if (*client) return bench::client_process(run_dir);
    if (*keygen) {
      std::vector<NodeId> ids;
      for (std::size_t i = 0; i < key_ids; ++i) ids.push_back(static_cast<NodeId>(i));
      crypto::KeyStore::generate(ids, with_rsa).save(key_out);
      return 0;
    }
    if (*chain) return check_chains(dumps);

    bench::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = bench::load_config(config_path);
    if (reps > 0) cfg.repetitions = reps;
    if (duration > 0) cfg.duration_s = duration;
    cfg.validate();
    if (*run) {
      const auto res = bench::run_experiment(cfg, runner_for(results));
      auto rows = res.runs;
      rows.push_back(res.median);
      print_reports(rows);
      return 0;
    }
    if (*sweep) {
      std::vector<bench::MetricsReport> rows;
      for (const auto& r : bench::sweep(cfg, param, bench::split_values(values), runner_for(results))) {
        rows.push_back(r.median);
      }
      print_reports(rows);
      return 0;
    }
  } catch (const bench::SafetyViolation& e) {
    std::cerr << "SAFETY VIOLATION: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
