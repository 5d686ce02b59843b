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

#include "pipebft/workload/latency.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pipebft::workload {

std::string_view outcome_label(RequestOutcome o) {
  switch (o) {
    case RequestOutcome::kCommitted: return "committed";
    case RequestOutcome::kFast: return "fast";
    case RequestOutcome::kCertified: return "cert";
    case RequestOutcome::kFailed: return "failed";
    case RequestOutcome::kTimeout: return "timeout";
  }
  return "?";
}

RequestOutcome parse_outcome(std::string_view label) {
  for (auto o : {RequestOutcome::kCommitted, RequestOutcome::kFast, RequestOutcome::kCertified,
                 RequestOutcome::kFailed, RequestOutcome::kTimeout}) {
    if (outcome_label(o) == label) return o;
  }
  throw std::invalid_argument("unknown outcome: " + std::string(label));
}

void write_latency_csv(const std::filesystem::path& path, const std::vector<LatencyRecord>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "client_id,request_seq,submit_ns,complete_ns,outcome,ops\n";
  for (const auto& r : rows) {
    out << r.client_id << ',' << r.request_seq << ',' << r.submit_ns << ',' << r.complete_ns << ','
        << outcome_label(r.outcome) << ',' << r.ops << '\n';
  }
}

std::vector<LatencyRecord> read_latency_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<LatencyRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field[6];
    for (auto& f : field) std::getline(ss, f, ',');
    LatencyRecord r;
    r.client_id = static_cast<std::uint32_t>(std::stoul(field[0]));
    r.request_seq = std::stoull(field[1]);
    r.submit_ns = std::stoll(field[2]);
    r.complete_ns = std::stoll(field[3]);
    r.outcome = parse_outcome(field[4]);
    r.ops = field[5].empty() ? 1 : static_cast<std::uint32_t>(std::stoul(field[5]));
    rows.push_back(r);
  }
  return rows;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

LatencySummary summarize(const std::vector<LatencyRecord>& rows, std::int64_t from_ns,
                         std::int64_t to_ns) {
  LatencySummary s;
  std::vector<double> lat;
  double total = 0;
  for (const auto& r : rows) {
    if (r.complete_ns < from_ns || r.complete_ns >= to_ns) continue;
    if (r.outcome == RequestOutcome::kFailed || r.outcome == RequestOutcome::kTimeout) {
      ++s.failed;
      continue;
    }
    ++s.completed;
    s.ops += r.ops;
    if (r.outcome == RequestOutcome::kFast) ++s.fast;
    if (r.outcome == RequestOutcome::kCertified) ++s.certified;
    const double ms = static_cast<double>(r.latency_ns()) / 1e6;
    lat.push_back(ms);
    total += ms;
  }
  if (!lat.empty()) {
    s.mean_ms = total / static_cast<double>(lat.size());
    s.p50_ms = percentile(lat, 0.50);
    s.p99_ms = percentile(std::move(lat), 0.99);
  }
  return s;
}

std::int64_t monotonic_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace pipebft::workload
