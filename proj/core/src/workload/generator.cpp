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

#include "pipebft/workload/generator.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>

namespace pipebft::workload {

void WorkloadConfig::validate() const {
  if (active_set == 0) throw std::invalid_argument("active_set must be positive");
  if (zipf_skew < 0) throw std::invalid_argument("zipf_skew must be >= 0");
  if (ops_per_txn < 1 || ops_per_txn > 50) throw std::invalid_argument("ops_per_txn must be in [1, 50]");
  if (payload_bytes > 65536) throw std::invalid_argument("payload_bytes must be <= 65536");
  if (client_batch < 1) throw std::invalid_argument("client_batch must be positive");
  if (num_clients < 1 || num_req < 1) throw std::invalid_argument("num_clients and num_req must be positive");
}

ZipfGenerator::ZipfGenerator(std::uint64_t n, double skew) : n_(n), skew_(skew) {
  if (n == 0) throw std::invalid_argument("empty key space");
  if (skew == 0.0) {
    uniform_.emplace(0, n - 1);
    return;
  }
  std::vector<double> weights(n);
  for (std::uint64_t k = 0; k < n; ++k) weights[k] = std::pow(static_cast<double>(k + 1), -skew);
  weighted_.emplace(weights.begin(), weights.end());
}

namespace {

// Endpoints sharing a config share one table (building it for 600K keys
// takes a while under skew).
std::shared_ptr<ZipfGenerator> shared_zipf(std::uint64_t n, double skew) {
  static std::mutex mu;
  static std::map<std::pair<std::uint64_t, double>, std::weak_ptr<ZipfGenerator>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[{n, skew}];
  if (auto hit = slot.lock()) return hit;
  auto made = std::make_shared<ZipfGenerator>(n, skew);
  slot = made;
  return made;
}

}  // namespace

RequestGenerator::RequestGenerator(const WorkloadConfig& cfg, NodeId endpoint)
    : cfg_(cfg), endpoint_(endpoint),
      rng_(cfg.seed * 0x9e3779b97f4a7c15ULL + endpoint),
      keys_(shared_zipf(cfg.active_set, cfg.zipf_skew)) {
  cfg_.validate();
}

messages::ClientRequest RequestGenerator::next() {
  messages::ClientRequest r;
  r.client_id = endpoint_;
  r.request_seq = next_seq_++;
  r.operations.reserve(cfg_.ops_per_txn);
  for (std::uint32_t i = 0; i < cfg_.ops_per_txn; ++i) {
    r.operations.push_back(
        {messages::OpKind::kWrite, (*keys_)(rng_), static_cast<std::int64_t>(rng_() >> 1)});
  }
  r.payload.resize(cfg_.payload_bytes);
  for (std::size_t i = 0; i < r.payload.size(); i += 8) {
    const std::uint64_t word = rng_();
    for (std::size_t j = 0; j < 8 && i + j < r.payload.size(); ++j) {
      r.payload[i + j] = static_cast<std::uint8_t>(word >> (8 * j));
    }
  }
  return r;
}

void RequestGenerator::sign(messages::ClientRequest& r, const crypto::Authenticator& auth,
                            crypto::Scheme scheme, NodeId primary) {
  r.client_signature = auth.sign(primary, messages::signing_bytes(r), scheme);
}

ReplyCollector::ReplyCollector(std::size_t f, NodeId client_id, std::uint64_t request_seq)
    : f_(f), client_id_(client_id), request_seq_(request_seq) {}

ReplyStatus ReplyCollector::add(const messages::ClientResponse& r) {
  if (status_ == ReplyStatus::kMismatch) return status_;
  if (r.client_id != client_id_ || r.request_seq != request_seq_) return status_;
  if (!by_replica_.emplace(r.replica_id, r.result).second) return status_;
  for (const auto& [id, result] : by_replica_) {
    if (result != r.result) {
      status_ = ReplyStatus::kMismatch;
      return status_;
    }
  }
  if (by_replica_.size() >= f_ + 1) status_ = ReplyStatus::kComplete;
  return status_;
}

const std::vector<std::int64_t>* ReplyCollector::result() const {
  if (status_ != ReplyStatus::kComplete) return nullptr;
  return &by_replica_.begin()->second;
}

}  // namespace pipebft::workload
