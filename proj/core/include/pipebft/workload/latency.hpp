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
#include <string>
#include <vector>

#include "pipebft/common/types.hpp"

namespace pipebft::workload {

// Completion outcome of one request as recorded by the client.
enum class RequestOutcome { kCommitted, kFast, kCertified, kFailed, kTimeout };

std::string_view outcome_label(RequestOutcome o);
RequestOutcome parse_outcome(std::string_view label);

struct LatencyRecord {
  std::uint32_t client_id = 0;  // logical client
  std::uint64_t request_seq = 0;
  std::int64_t submit_ns = 0;  // monotonic clock
  std::int64_t complete_ns = 0;
  RequestOutcome outcome = RequestOutcome::kCommitted;
  std::uint32_t ops = 1;

  std::int64_t latency_ns() const { return complete_ns - submit_ns; }
  bool operator==(const LatencyRecord&) const = default;
};

// CSV columns: client_id,request_seq,submit_ns,complete_ns,outcome,ops
void write_latency_csv(const std::filesystem::path& path, const std::vector<LatencyRecord>& rows);
std::vector<LatencyRecord> read_latency_csv(const std::filesystem::path& path);

struct LatencySummary {
  std::uint64_t completed = 0;  // successful outcomes
  std::uint64_t ops = 0;
  std::uint64_t failed = 0;     // kFailed and kTimeout
  std::uint64_t fast = 0;
  std::uint64_t certified = 0;
  double mean_ms = 0, p50_ms = 0, p99_ms = 0;
};

// Summarizes records whose completion falls in [from_ns, to_ns).
LatencySummary summarize(const std::vector<LatencyRecord>& rows, std::int64_t from_ns,
                         std::int64_t to_ns);

// Nearest-rank percentile of a sample (q in [0, 1]); 0 for an empty one.
double percentile(std::vector<double> values, double q);

std::int64_t monotonic_ns();

}  // namespace pipebft::workload
