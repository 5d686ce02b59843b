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


#include <fcntl.h>
#include <spawn.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <set>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "pipebft/bench/experiment.hpp"
#include "pipebft/ledger/blockchain.hpp"
#include "pipebft/pipeline/executor.hpp"
#include "pipebft/pipeline/replica.hpp"
#include "pipebft/transport/transport.hpp"
#include "pipebft/workload/latency.hpp"
#include "run_files.hpp"

extern char** environ;

namespace pipebft::bench {

namespace {

using Clock = std::chrono::steady_clock;
using namespace std::chrono_literals;

class Child {
 public:
  Child(const std::filesystem::path& exe, const std::vector<std::string>& args,
        const std::filesystem::path& log) {
    std::vector<std::string> argv_s{exe.string()};
    argv_s.insert(argv_s.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_s) argv.push_back(a.data());
    argv.push_back(nullptr);
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_addopen(&fa, STDOUT_FILENO, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC,
                                     0644);
    posix_spawn_file_actions_adddup2(&fa, STDOUT_FILENO, STDERR_FILENO);
    const int rc = posix_spawn(&pid_, exe.c_str(), &fa, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&fa);
    if (rc != 0) throw ClusterStartFailure("cannot spawn " + exe.string() + ": " + std::strerror(rc));
  }
  ~Child() {
    if (running()) {
      ::kill(pid_, SIGKILL);
      wait_for(5s);
    }
  }
  Child(const Child&) = delete;
  Child& operator=(const Child&) = delete;

  bool running() {
    poll();
    return !status_.has_value();
  }
  // Exit code, or 128 + signal.
  std::optional<int> wait_for(std::chrono::milliseconds timeout) {
    const auto deadline = Clock::now() + timeout;
    while (running() && Clock::now() < deadline) std::this_thread::sleep_for(10ms);
    return status_;
  }
  void signal(int sig) {
    if (running()) ::kill(pid_, sig);
  }
  pid_t pid() const { return pid_; }

  // User + system CPU seconds, from /proc while running and from the
  // reaped rusage afterwards.
  double cpu_seconds() {
    poll();
    if (status_) return cpu_at_exit_;
    std::ifstream in("/proc/" + std::to_string(pid_) + "/stat");
    std::string stat;
    std::getline(in, stat);
    const auto close = stat.rfind(')');
    if (close == std::string::npos) return 0;
    std::istringstream fields(stat.substr(close + 2));
    std::string tok;
    double utime = 0, stime = 0;
    for (int i = 3; fields >> tok; ++i) {
      if (i == 14) utime = std::stod(tok);
      if (i == 15) {
        stime = std::stod(tok);
        break;
      }
    }
    return (utime + stime) / static_cast<double>(::sysconf(_SC_CLK_TCK));
  }

 private:
  void poll() {
    if (status_) return;
    int st = 0;
    rusage ru{};
    if (::wait4(pid_, &st, WNOHANG, &ru) == pid_) {
      status_ = WIFEXITED(st) ? WEXITSTATUS(st) : 128 + WTERMSIG(st);
      cpu_at_exit_ = static_cast<double>(ru.ru_utime.tv_sec + ru.ru_stime.tv_sec) +
                     static_cast<double>(ru.ru_utime.tv_usec + ru.ru_stime.tv_usec) / 1e6;
    }
  }
  pid_t pid_ = -1;
  std::optional<int> status_;
  double cpu_at_exit_ = 0;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("missing " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> read_metrics(const std::filesystem::path& p) {
  std::map<std::string, std::string> out;
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma != std::string::npos) out[line.substr(0, comma)] = line.substr(comma + 1);
  }
  return out;
}

std::vector<std::pair<std::uint64_t, std::int64_t>> read_state_csv(const std::filesystem::path& p) {
  std::vector<std::pair<std::uint64_t, std::int64_t>> out;
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    out.emplace_back(std::stoull(line.substr(0, comma)), std::stoll(line.substr(comma + 1)));
  }
  return out;
}

constexpr const char* kRoles[] = {"input_client", "input_replica", "output",    "batch",
                                  "worker",       "execute",       "checkpoint"};
constexpr const char* kTags[] = {"hello",     "client_submit", "preprepare",      "prepare",
                                 "commit",    "checkpoint",    "spec_response",   "client_response",
                                 "commit_certificate", "cert_ack"};

double median_of(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2;
}

std::string fmt_double(double v) {
  std::ostringstream o;
  o.precision(6);
  o << std::fixed << v;
  std::string s = o.str();
  s.erase(s.find_last_not_of('0') + 1);
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

// Checks the surviving replicas' outputs and fills the chain/message/
// utilization parts of the report.
void verify_and_collect(const RunFiles& files, const ExperimentConfig& cfg,
                        const std::set<NodeId>& failed, MetricsReport& report) {
  std::optional<NodeId> reference;
  std::string reference_dump;
  std::map<std::string, std::vector<double>> util_samples;
  for (NodeId id = 0; id < cfg.n; ++id) {
    if (failed.contains(id)) continue;
    const auto dir = files.replica_dir(id);
    const std::string dump = slurp(dir / "chain.dump");
    if (!reference) {
      reference = id;
      reference_dump = dump;
    } else if (dump != reference_dump) {
      throw SafetyViolation("chain dumps of replicas " + std::to_string(*reference) + " and " +
                            std::to_string(id) + " differ");
    }
    std::istringstream in(dump);
    const auto blocks = ledger::read_chain_dump(in);
    if (!ledger::validate_chain(blocks, ClusterConfig{cfg.n, cfg.f, 0}.primary(0))) {
      throw SafetyViolation("chain of replica " + std::to_string(id) + " does not validate");
    }
    // Ordering oracle: replay the executed batches single-threaded.
    auto batches = pipeline::read_audit(dir / "audit.bin");
    if (batches.size() != blocks.size()) {
      throw SafetyViolation("audit of replica " + std::to_string(id) + " does not match its chain");
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (batches[i].first_seq != blocks[i].seq || batches[i].size() != blocks[i].txn_count) {
        throw SafetyViolation("audit of replica " + std::to_string(id) +
                              " does not match its chain");
      }
    }
    auto ref = pipeline::reference_replay(std::move(batches), cfg.workload.active_set);
    if (ref->modified_records() != read_state_csv(dir / "state.csv")) {
      throw SafetyViolation("state of replica " + std::to_string(id) +
                            " differs from the reference replay");
    }
    report.chain_height = blocks.size();

    for (const auto& [k, v] : read_metrics(dir / "metrics.csv")) {
      if (k.rfind("sent.", 0) == 0) report.messages[k.substr(5)] += std::stoull(v);
    }
    std::ifstream util(dir / "utilization.csv");
    std::string line;
    std::getline(util, line);
    const std::string who = id == ClusterConfig{cfg.n, cfg.f, 0}.primary(0) ? "primary" : "backup";
    while (std::getline(util, line)) {
      std::istringstream row(line);
      std::string idx, role, frac;
      std::getline(row, idx, ',');
      std::getline(row, role, ',');
      std::getline(row, frac, ',');
      util_samples[who + "." + role].push_back(std::stod(frac));
    }
  }
  for (auto& [k, v] : util_samples) {
    double sum = 0;
    for (double x : v) sum += x;
    report.utilization[k] = sum / static_cast<double>(v.size());
  }
}

MetricsReport run_once(const ExperimentConfig& cfg, int rep, const RunnerOptions& runner) {
  const std::string run_id = "run" + std::to_string(rep + 1);
  const auto exp_dir = runner.results_dir / cfg.name;
  const RunFiles files(exp_dir / "runs" / run_id);
  std::filesystem::remove_all(files.dir());
  std::filesystem::create_directories(files.dir());
  auto log = [&](const std::string& msg) {
    if (runner.log) runner.log(cfg.name + "/" + run_id + ": " + msg);
  };

  std::ofstream(files.config()) << to_json(cfg) << '\n';
  {
    std::ofstream ports(files.ports_file());
    const auto reserved = transport::reserve_ports(cfg.n);
    for (std::size_t i = 0; i < reserved.size(); ++i) {
      ports << (cfg.hosts.empty() ? std::string("127.0.0.1") : cfg.hosts[i]) << ' ' << reserved[i]
            << '\n';
    }
  }
  std::vector<NodeId> ids;
  for (NodeId i = 0; i <= cfg.n; ++i) ids.push_back(i);
  crypto::KeyStore::generate(ids, cfg.schemes.needs_rsa()).save(files.keys());

  std::vector<std::unique_ptr<Child>> replicas;
  for (NodeId id = 0; id < cfg.n; ++id) {
    replicas.push_back(std::make_unique<Child>(
        runner.executable,
        std::vector<std::string>{"replica", "--run-dir", files.dir().string(), "--id",
                                 std::to_string(id)},
        files.replica_log(id)));
  }
  const auto ready_deadline = Clock::now() + 60s;
  for (NodeId id = 0; id < cfg.n; ++id) {
    while (!std::filesystem::exists(files.replica_ready(id))) {
      if (!replicas[id]->running() || Clock::now() > ready_deadline) {
        throw ClusterStartFailure("replica " + std::to_string(id) + " did not come up (see " +
                                  files.replica_log(id).string() + ")");
      }
      std::this_thread::sleep_for(10ms);
    }
  }
  Child client(runner.executable, {"client", "--run-dir", files.dir().string()},
               files.client_log());
  std::optional<std::string> started;
  const auto start_deadline = Clock::now() + 60s;
  while (!(started = read_marker(files.client_started()))) {
    if (!client.running() || Clock::now() > start_deadline) {
      throw ClusterStartFailure("client did not start (see " + files.client_log().string() + ")");
    }
    std::this_thread::sleep_for(5ms);
  }
  const std::int64_t t0 = std::stoll(*started);
  log("started " + cfg.label());

  auto failures = cfg.failures;
  std::sort(failures.begin(), failures.end(),
            [](const auto& a, const auto& b) { return a.at_s < b.at_s; });
  std::set<NodeId> failed;
  for (const auto& fs : failures) {
    const auto at = t0 + static_cast<std::int64_t>(fs.at_s * 1e9);
    while (workload::monotonic_ns() < at && client.running()) std::this_thread::sleep_for(1ms);
    replicas[fs.replica]->signal(SIGKILL);
    replicas[fs.replica]->wait_for(5s);
    failed.insert(fs.replica);
    log("stopped replica " + std::to_string(fs.replica));
  }

  const auto run_ns = static_cast<std::int64_t>(cfg.duration_s * 1e9);
  const auto client_exit = client.wait_for(std::chrono::milliseconds(
      static_cast<std::int64_t>(cfg.duration_s * 1000) + 120'000));
  {
    std::ofstream w(files.window());
    w << t0 + static_cast<std::int64_t>(cfg.warmup_s * 1e9) << ' ' << t0 + run_ns << '\n';
  }
  double cpu_primary = 0, cpu_backups = 0;
  std::size_t live_backups = 0;
  for (NodeId id = 0; id < cfg.n; ++id) {
    if (failed.contains(id)) continue;
    const double cpu = replicas[id]->cpu_seconds();
    if (id == ClusterConfig{cfg.n, cfg.f, 0}.primary(0)) {
      cpu_primary = cpu;
    } else {
      cpu_backups += cpu;
      ++live_backups;
    }
  }
  for (NodeId id = 0; id < cfg.n; ++id) {
    if (!failed.contains(id)) replicas[id]->signal(SIGTERM);
  }
  for (NodeId id = 0; id < cfg.n; ++id) {
    if (failed.contains(id)) continue;
    const auto code = replicas[id]->wait_for(60s);
    if (!code || *code != 0) {
      throw ClusterStartFailure("replica " + std::to_string(id) + " did not shut down cleanly");
    }
  }
  if (!client_exit) throw ClusterStartFailure("client did not finish");
  if (*client_exit == 3) throw SafetyViolation("client saw conflicting replies");
  if (*client_exit != 0) {
    throw ClusterStartFailure("client exited with " + std::to_string(*client_exit));
  }

  MetricsReport r;
  r.experiment = cfg.name;
  r.run = run_id;
  r.label = cfg.label();
  r.cpu_primary_s = cpu_primary;
  r.cpu_backup_s = live_backups ? cpu_backups / static_cast<double>(live_backups) : 0;
  r.cpu_client_s = client.cpu_seconds();
  verify_and_collect(files, cfg, failed, r);

  const auto records = workload::read_latency_csv(files.client_dir() / "latency.csv");
  const auto warm_ns = static_cast<std::int64_t>(cfg.warmup_s * 1e9);
  const auto s = workload::summarize(records, warm_ns, run_ns);
  r.measured_s = cfg.duration_s - cfg.warmup_s;
  r.throughput_txns_per_s = static_cast<double>(s.completed) / r.measured_s;
  r.throughput_ops_per_s = static_cast<double>(s.ops) / r.measured_s;
  r.latency_mean_ms = s.mean_ms;
  r.latency_p50_ms = s.p50_ms;
  r.latency_p99_ms = s.p99_ms;
  r.completed = s.completed;
  r.ops = s.ops;
  r.failed = s.failed;
  r.fast = s.fast;
  r.certified = s.certified;
  const auto cj = nlohmann::json::parse(slurp(files.client_dir() / "client.json"));
  r.resubmits = cj.value("resubmits", std::uint64_t{0});

  write_reports(exp_dir / (run_id + ".csv"), {r});
  if (!runner.keep_run_dirs) std::filesystem::remove_all(files.dir());
  log("throughput " + fmt_double(r.throughput_txns_per_s) + " txn/s, p50 " +
      fmt_double(r.latency_p50_ms) + " ms");
  return r;
}

MetricsReport median_report(const std::vector<MetricsReport>& runs) {
  MetricsReport m = runs.front();
  m.run = "median";
  auto med = [&](auto field) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(static_cast<double>(r.*field));
    return median_of(v);
  };
  m.measured_s = med(&MetricsReport::measured_s);
  m.throughput_txns_per_s = med(&MetricsReport::throughput_txns_per_s);
  m.throughput_ops_per_s = med(&MetricsReport::throughput_ops_per_s);
  m.latency_mean_ms = med(&MetricsReport::latency_mean_ms);
  m.latency_p50_ms = med(&MetricsReport::latency_p50_ms);
  m.latency_p99_ms = med(&MetricsReport::latency_p99_ms);
  m.completed = static_cast<std::uint64_t>(med(&MetricsReport::completed));
  m.ops = static_cast<std::uint64_t>(med(&MetricsReport::ops));
  m.failed = static_cast<std::uint64_t>(med(&MetricsReport::failed));
  m.fast = static_cast<std::uint64_t>(med(&MetricsReport::fast));
  m.certified = static_cast<std::uint64_t>(med(&MetricsReport::certified));
  m.resubmits = static_cast<std::uint64_t>(med(&MetricsReport::resubmits));
  m.chain_height = static_cast<std::uint64_t>(med(&MetricsReport::chain_height));
  m.cpu_primary_s = med(&MetricsReport::cpu_primary_s);
  m.cpu_backup_s = med(&MetricsReport::cpu_backup_s);
  m.cpu_client_s = med(&MetricsReport::cpu_client_s);
  for (auto& [k, v] : m.messages) {
    std::vector<double> xs;
    for (const auto& r : runs) xs.push_back(static_cast<double>(r.messages.count(k) ? r.messages.at(k) : 0));
    v = static_cast<std::uint64_t>(median_of(xs));
  }
  for (auto& [k, v] : m.utilization) {
    std::vector<double> xs;
    for (const auto& r : runs) xs.push_back(r.utilization.count(k) ? r.utilization.at(k) : 0.0);
    v = median_of(xs);
  }
  return m;
}

}  // namespace

std::vector<std::string> report_columns() {
  std::vector<std::string> cols = {
      "experiment", "run", "label", "param", "value", "measured_s", "throughput_txns_per_s",
      "throughput_ops_per_s", "latency_mean_ms", "latency_p50_ms", "latency_p99_ms", "completed",
      "ops", "failed", "fast", "certified", "resubmits", "chain_height", "cpu_primary_s",
      "cpu_backup_s", "cpu_client_s"};
  for (const char* t : kTags) cols.push_back(std::string("msgs_") + t);
  for (const char* who : {"primary", "backup"}) {
    for (const char* role : kRoles) cols.push_back(std::string("util_") + who + "_" + role);
  }
  return cols;
}

std::vector<std::string> report_row(const MetricsReport& r) {
  std::vector<std::string> row = {r.experiment,
                                  r.run,
                                  r.label,
                                  r.param,
                                  r.value,
                                  fmt_double(r.measured_s),
                                  fmt_double(r.throughput_txns_per_s),
                                  fmt_double(r.throughput_ops_per_s),
                                  fmt_double(r.latency_mean_ms),
                                  fmt_double(r.latency_p50_ms),
                                  fmt_double(r.latency_p99_ms),
                                  std::to_string(r.completed),
                                  std::to_string(r.ops),
                                  std::to_string(r.failed),
                                  std::to_string(r.fast),
                                  std::to_string(r.certified),
                                  std::to_string(r.resubmits),
                                  std::to_string(r.chain_height),
                                  fmt_double(r.cpu_primary_s),
                                  fmt_double(r.cpu_backup_s),
                                  fmt_double(r.cpu_client_s)};
  for (const char* t : kTags) {
    auto it = r.messages.find(t);
    row.push_back(std::to_string(it == r.messages.end() ? 0 : it->second));
  }
  for (const char* who : {"primary", "backup"}) {
    for (const char* role : kRoles) {
      auto it = r.utilization.find(std::string(who) + "." + role);
      row.push_back(it == r.utilization.end() ? "" : fmt_double(it->second));
    }
  }
  return row;
}

void write_reports(const std::filesystem::path& path, const std::vector<MetricsReport>& rows) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  auto emit = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const bool quote = cells[i].find_first_of(",\"") != std::string::npos;
      if (i) out << ',';
      if (quote) {
        out << '"';
        for (char ch : cells[i]) out << (ch == '"' ? "\"\"" : std::string(1, ch));
        out << '"';
      } else {
        out << cells[i];
      }
    }
    out << '\n';
  };
  emit(report_columns());
  for (const auto& r : rows) emit(report_row(r));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunnerOptions& runner) {
  cfg.validate();
  if (runner.executable.empty()) throw std::invalid_argument("runner executable not set");
  ExperimentResult result;
  result.config = cfg;
  for (int rep = 0; rep < cfg.repetitions; ++rep) result.runs.push_back(run_once(cfg, rep, runner));
  result.median = median_report(result.runs);
  auto rows = result.runs;
  rows.push_back(result.median);
  write_reports(runner.results_dir / cfg.name / "summary.csv", rows);
  return result;
}

std::vector<ExperimentResult> sweep(const ExperimentConfig& base, std::string_view param,
                                    const std::vector<std::string>& values,
                                    const RunnerOptions& runner) {
  std::vector<ExperimentResult> out;
  std::vector<MetricsReport> rows;
  for (const auto& v : values) {
    ExperimentConfig cfg = base;
    apply_parameter(cfg, param, v);
    cfg.name = base.name + "_" + std::string(param) + "_" + v;
    std::replace_if(cfg.name.begin(), cfg.name.end(),
                    [](char c) { return !(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'); },
                    '_');
    auto res = run_experiment(cfg, runner);
    res.median.param = std::string(param);
    res.median.value = v;
    rows.push_back(res.median);
    out.push_back(std::move(res));
  }
  write_reports(runner.results_dir / base.name / ("sweep_" + std::string(param) + ".csv"), rows);
  return out;
}

}  // namespace pipebft::bench
