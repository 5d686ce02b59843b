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


#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pipebft/bench/experiment.hpp"
#include "pipebft/pipeline/execution_queue_array.hpp"

namespace pipebft::bench {

using nlohmann::json;

namespace {

template <typename T>
T parse_number(std::string_view s, std::string_view what) {
  T v{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("bad " + std::string(what) + ": " + std::string(s));
  }
  return v;
}

double parse_double(std::string_view s, std::string_view what) {
  try {
    std::size_t used = 0;
    const std::string str(s);
    const double v = std::stod(str, &used);
    if (used != str.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad " + std::string(what) + ": " + std::string(s));
  }
}

std::vector<FailureSpec> parse_failures(std::string_view value, std::size_t n) {
  std::vector<FailureSpec> out;
  if (value.find('@') == std::string_view::npos) {
    const auto count = parse_number<std::size_t>(value, "failure count");
    if (count >= n) throw std::invalid_argument("cannot stop every replica");
    for (std::size_t i = 0; i < count; ++i) out.push_back({static_cast<NodeId>(n - 1 - i), 0.0});
    return out;
  }
  std::size_t pos = 0;
  while (pos <= value.size()) {
    std::size_t next = value.find('+', pos);
    if (next == std::string_view::npos) next = value.size();
    const auto item = value.substr(pos, next - pos);
    const auto at = item.find('@');
    if (at == std::string_view::npos) throw std::invalid_argument("bad failure: " + std::string(item));
    out.push_back({parse_number<NodeId>(item.substr(0, at), "failure replica"),
                   parse_double(item.substr(at + 1), "failure time")});
    pos = next + 1;
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  ClusterConfig{n, f, 0}.validate();
  topology.validate();
  schemes.validate();
  workload.validate();
  if (name.empty() || name.find('/') != std::string::npos) {
    throw std::invalid_argument("experiment name must be a plain file name");
  }
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (checkpoint_interval == 0) throw std::invalid_argument("checkpoint_interval must be positive");
  if (!(warmup_s >= 0) || !(duration_s > warmup_s)) {
    throw std::invalid_argument("need duration_s > warmup_s >= 0");
  }
  if (repetitions < 1) throw std::invalid_argument("repetitions must be positive");
  if (spec_timeout_ms == 0 || request_timeout_ms == 0) {
    throw std::invalid_argument("timeouts must be positive");
  }
  std::set<NodeId> seen;
  for (const auto& fs : failures) {
    if (fs.replica >= n) throw std::invalid_argument("failure of unknown replica");
    if (fs.replica == ClusterConfig{n, f, 0}.primary(0)) {
      throw CannotFailPrimary("replica " + std::to_string(fs.replica) +
                              " is the primary; primary failure needs a view change");
    }
    if (!seen.insert(fs.replica).second) throw std::invalid_argument("replica failed twice");
    if (!(fs.at_s >= 0) || !(fs.at_s < duration_s)) {
      throw std::invalid_argument("failure time outside the run");
    }
  }
  if (!hosts.empty() && hosts.size() != n) {
    throw std::invalid_argument("hosts must list one entry per replica");
  }
  if (failures.size() > f) {
    throw std::invalid_argument("more than f failures: no quorum can form");
  }
}

std::size_t ExperimentConfig::queue_count() const {
  return pipeline::queue_count(workload.num_clients, workload.num_req, max_queue_count);
}

std::string ExperimentConfig::label() const {
  std::string out = std::string(protocol_name(protocol)) + " " + topology.label();
  if (protocol == Protocol::kZyzzyva && topology.execute_threads == 0 &&
      topology.batch_threads == 0) {
    out += " (protocol-centric baseline approximation)";
  }
  return out;
}

crypto::SchemeConfig scheme_preset(std::string_view name) {
  using crypto::Scheme;
  if (name == "nosig") return {Scheme::kNone, Scheme::kNone};
  if (name == "mac_ds" || name == "mac") return {Scheme::kFastSig, Scheme::kMac};
  if (name == "ds_fast") return {Scheme::kFastSig, Scheme::kFastSig};
  if (name == "ds_slow") return {Scheme::kSlowSig, Scheme::kSlowSig};
  throw std::invalid_argument("unknown scheme preset: " + std::string(name));
}

std::string scheme_label(const crypto::SchemeConfig& s) {
  for (const char* p : {"nosig", "mac_ds", "ds_fast", "ds_slow"}) {
    if (scheme_preset(p) == s) return p;
  }
  return std::string(crypto::scheme_name(s.client)) + "/" +
         std::string(crypto::scheme_name(s.replica));
}

ExperimentConfig parse_config(const std::string& text) {
  const json j = json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("experiment config must be a JSON object");
  ExperimentConfig c;
  auto& w = c.workload;
  for (const auto& [key, v] : j.items()) {
    if (key == "name") c.name = v.get<std::string>();
    else if (key == "protocol") c.protocol = parse_protocol(v.get<std::string>());
    else if (key == "n") c.n = v.get<std::size_t>();
    else if (key == "f") c.f = v.get<std::size_t>();
    else if (key == "topology") {
      const auto t = pipeline::parse_topology(v.get<std::string>());
      c.topology.execute_threads = t.execute_threads;
      c.topology.batch_threads = t.batch_threads;
    } else if (key == "input_threads") c.topology.input_threads = v.get<int>();
    else if (key == "output_threads") c.topology.output_threads = v.get<int>();
    else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
    else if (key == "batch_timeout_us") c.batch_timeout_us = v.get<std::uint32_t>();
    else if (key == "checkpoint_interval") c.checkpoint_interval = v.get<std::uint64_t>();
    else if (key == "scheme") c.schemes = scheme_preset(v.get<std::string>());
    else if (key == "client_scheme") c.schemes.client = crypto::parse_scheme(v.get<std::string>());
    else if (key == "replica_scheme") c.schemes.replica = crypto::parse_scheme(v.get<std::string>());
    else if (key == "storage") c.storage = ledger::parse_backend(v.get<std::string>());
    else if (key == "active_set") w.active_set = v.get<std::uint64_t>();
    else if (key == "zipf_skew") w.zipf_skew = v.get<double>();
    else if (key == "ops_per_txn") w.ops_per_txn = v.get<std::uint32_t>();
    else if (key == "payload_bytes") w.payload_bytes = v.get<std::uint32_t>();
    else if (key == "client_batch") w.client_batch = v.get<std::uint32_t>();
    else if (key == "num_clients") w.num_clients = v.get<std::uint32_t>();
    else if (key == "num_req") w.num_req = v.get<std::uint32_t>();
    else if (key == "seed") w.seed = v.get<std::uint64_t>();
    else if (key == "duration_s") c.duration_s = v.get<double>();
    else if (key == "warmup_s") c.warmup_s = v.get<double>();
    else if (key == "repetitions") c.repetitions = v.get<int>();
    else if (key == "spec_timeout_ms") c.spec_timeout_ms = v.get<std::uint32_t>();
    else if (key == "request_timeout_ms") c.request_timeout_ms = v.get<std::uint32_t>();
    else if (key == "max_queue_count") c.max_queue_count = v.get<std::size_t>();
    else if (key == "pool_capacity") c.pool_capacity = v.get<std::size_t>();
    else if (key == "hosts") c.hosts = v.get<std::vector<std::string>>();
    else if (key == "failures") {
      c.failures.clear();
      for (const auto& e : v) c.failures.push_back({e.at("replica").get<NodeId>(), e.value("at_s", 0.0)});
    } else {
      throw std::invalid_argument("unknown config key: " + key);
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const ExperimentConfig& c) {
  const auto& w = c.workload;
  json j = {
      {"name", c.name},
      {"protocol", protocol_name(c.protocol)},
      {"n", c.n},
      {"f", c.f},
      {"topology", c.topology.label()},
      {"input_threads", c.topology.input_threads},
      {"output_threads", c.topology.output_threads},
      {"batch_size", c.batch_size},
      {"batch_timeout_us", c.batch_timeout_us},
      {"checkpoint_interval", c.checkpoint_interval},
      {"client_scheme", crypto::scheme_name(c.schemes.client)},
      {"replica_scheme", crypto::scheme_name(c.schemes.replica)},
      {"storage", ledger::backend_name(c.storage)},
      {"active_set", w.active_set},
      {"zipf_skew", w.zipf_skew},
      {"ops_per_txn", w.ops_per_txn},
      {"payload_bytes", w.payload_bytes},
      {"client_batch", w.client_batch},
      {"num_clients", w.num_clients},
      {"num_req", w.num_req},
      {"seed", w.seed},
      {"duration_s", c.duration_s},
      {"warmup_s", c.warmup_s},
      {"repetitions", c.repetitions},
      {"spec_timeout_ms", c.spec_timeout_ms},
      {"request_timeout_ms", c.request_timeout_ms},
      {"max_queue_count", c.max_queue_count},
      {"pool_capacity", c.pool_capacity},
  };
  json failures = json::array();
  for (const auto& fs : c.failures) failures.push_back({{"replica", fs.replica}, {"at_s", fs.at_s}});
  j["failures"] = failures;
  if (!c.hosts.empty()) j["hosts"] = c.hosts;
  return j.dump(2);
}

std::vector<std::string> split_values(std::string_view list) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    std::size_t next = list.find(',', pos);
    if (next == std::string_view::npos) next = list.size();
    std::string item(list.substr(pos, next - pos));
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
    pos = next + 1;
  }
  return out;
}

void apply_parameter(ExperimentConfig& c, std::string_view param, std::string_view value) {
  auto& w = c.workload;
  if (param == "batch_size") c.batch_size = parse_number<std::size_t>(value, param);
  else if (param == "ops_per_txn") w.ops_per_txn = parse_number<std::uint32_t>(value, param);
  else if (param == "payload_bytes") w.payload_bytes = parse_number<std::uint32_t>(value, param);
  else if (param == "scheme") c.schemes = scheme_preset(value);
  else if (param == "storage") c.storage = ledger::parse_backend(value);
  else if (param == "num_clients") w.num_clients = parse_number<std::uint32_t>(value, param);
  else if (param == "num_req") w.num_req = parse_number<std::uint32_t>(value, param);
  else if (param == "client_batch") w.client_batch = parse_number<std::uint32_t>(value, param);
  else if (param == "spec_timeout_ms") c.spec_timeout_ms = parse_number<std::uint32_t>(value, param);
  else if (param == "topology") {
    const auto t = pipeline::parse_topology(value);
    c.topology.execute_threads = t.execute_threads;
    c.topology.batch_threads = t.batch_threads;
  } else if (param == "protocol") c.protocol = parse_protocol(value);
  else if (param == "failures") c.failures = parse_failures(value, c.n);
  else if (param == "n") {
    c.n = parse_number<std::size_t>(value, param);
    c.f = (c.n - 1) / 3;
  } else {
    throw std::invalid_argument("unknown sweep parameter: " + std::string(param));
  }
  c.validate();
}

}  // namespace pipebft::bench
