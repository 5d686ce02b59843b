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

#include <map>
#include <memory>
#include <optional>
#include <random>

#include "pipebft/crypto/crypto.hpp"
#include "pipebft/messages/messages.hpp"

namespace pipebft::workload {

struct WorkloadConfig {
  std::uint64_t active_set = 600'000;
  double zipf_skew = 0.0;  // 0 draws keys uniformly
  std::uint32_t ops_per_txn = 1;
  std::uint32_t payload_bytes = 0;
  std::uint32_t client_batch = 1;  // requests per submission frame
  std::uint32_t num_clients = 8;   // logical clients
  std::uint32_t num_req = 16;      // outstanding requests per logical client
  std::uint64_t seed = 1;

  // Throws std::invalid_argument on out-of-range fields.
  void validate() const;
  std::uint64_t window() const { return std::uint64_t{num_clients} * num_req; }
  bool operator==(const WorkloadConfig&) const = default;
};

// Zipf-distributed ranks in [0, n): P(k) is proportional to 1 / (k+1)^skew.
class ZipfGenerator {
 public:
  ZipfGenerator(std::uint64_t n, double skew);

  template <typename Rng>
  std::uint64_t operator()(Rng& rng) {
    if (uniform_) return (*uniform_)(rng);
    return (*weighted_)(rng);
  }

  std::uint64_t size() const { return n_; }
  double skew() const { return skew_; }

 private:
  std::uint64_t n_;
  double skew_;
  std::optional<std::uniform_int_distribution<std::uint64_t>> uniform_;
  std::optional<std::discrete_distribution<std::uint64_t>> weighted_;
};

// Deterministic request stream for one client endpoint: the same seed yields
// the same operations and payloads.
class RequestGenerator {
 public:
  RequestGenerator(const WorkloadConfig& cfg, NodeId endpoint);

  // Unsigned request with the next request_seq.
  messages::ClientRequest next();

  // Signs in place; `scheme` kNone leaves the signature empty.
  static void sign(messages::ClientRequest& r, const crypto::Authenticator& auth,
                   crypto::Scheme scheme, NodeId primary);

  std::uint64_t issued() const { return next_seq_; }

 private:
  WorkloadConfig cfg_;
  NodeId endpoint_;
  std::mt19937_64 rng_;
  std::shared_ptr<ZipfGenerator> keys_;
  std::uint64_t next_seq_ = 0;
};

enum class ReplyStatus { kPending, kComplete, kMismatch };

// PBFT completion rule: f+1 identical results from distinct replicas. Any
// disagreement between replicas is a safety violation.
class ReplyCollector {
 public:
  ReplyCollector(std::size_t f, NodeId client_id, std::uint64_t request_seq);

  ReplyStatus add(const messages::ClientResponse& r);
  ReplyStatus status() const { return status_; }
  const std::vector<std::int64_t>* result() const;
  std::size_t responses() const { return by_replica_.size(); }

 private:
  std::size_t f_;
  NodeId client_id_;
  std::uint64_t request_seq_;
  std::map<NodeId, std::vector<std::int64_t>> by_replica_;
  ReplyStatus status_ = ReplyStatus::kPending;
};

}  // namespace pipebft::workload
