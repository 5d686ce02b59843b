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

#include "pipebft/pipeline/executor.hpp"

#include <algorithm>
#include <stdexcept>

#include "pipebft/pipeline/checkpoint.hpp"

namespace pipebft::pipeline {

CheckpointTracker::CheckpointTracker(std::size_t /*n*/, std::size_t f, std::uint64_t interval)
    : quorum_(2 * f + 1), interval_(interval == 0 ? 1 : interval) {}

std::optional<messages::CheckpointMsg> CheckpointTracker::on_checkpoint(
    const messages::CheckpointMsg& msg) {
  if (stable_ && msg.seq <= stable_->seq) return std::nullopt;
  Height& h = votes_[msg.seq];
  if (!h.senders.insert(msg.sender_id).second) return std::nullopt;
  auto& agreeing = h.by_state[Key{msg.txn_seq, msg.chain_digest}];
  agreeing.insert(msg.sender_id);
  if (agreeing.size() < quorum_) return std::nullopt;
  stable_ = msg;
  votes_.erase(votes_.begin(), votes_.upper_bound(msg.seq));
  return stable_;
}

Executor::Executor(NodeId first_primary, std::unique_ptr<ledger::StateStore> state,
                   std::uint64_t checkpoint_interval)
    : chain_(first_primary), state_(std::move(state)), interval_(checkpoint_interval) {
  if (!state_) throw std::invalid_argument("executor needs a state store");
}

ExecutionResult Executor::execute(const ExecuteDirective& directive) {
  if (!directive.batch) throw std::invalid_argument("directive without a batch");
  if (directive.first_seq != chain_.next_seq()) {
    throw ledger::OutOfOrderAppend("executor expected " + std::to_string(chain_.next_seq()) +
                                   ", got " + std::to_string(directive.first_seq));
  }
  ExecutionResult out;
  out.results.reserve(directive.batch->requests.size());
  for (const auto& req : directive.batch->requests) {
    out.results.push_back(state_->apply_operations(req.operations));
  }
  out.block = chain_.append_block(directive.first_seq, directive.digest, directive.view,
                                  directive.txn_count());
  executed_txns_ += directive.txn_count();
  out.checkpoint_due = interval_ > 0 && chain_.height() % interval_ == 0;
  return out;
}

std::unique_ptr<ledger::StateStore> reference_replay(std::vector<messages::RequestBatch> batches,
                                                     std::uint64_t active_set) {
  std::sort(batches.begin(), batches.end(),
            [](const auto& a, const auto& b) { return a.first_seq < b.first_seq; });
  auto store = ledger::make_state_store(ledger::Backend::kInMemory, active_set);
  SeqNum expected = 0;
  for (const auto& batch : batches) {
    if (batch.first_seq != expected) {
      throw std::runtime_error("replay gap at sequence " + std::to_string(expected));
    }
    for (const auto& req : batch.requests) store->apply_operations(req.operations);
    expected = batch.last_seq + 1;
  }
  return store;
}

}  // namespace pipebft::pipeline
