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

#include <memory>
#include <vector>

#include "pipebft/ledger/blockchain.hpp"
#include "pipebft/ledger/state_store.hpp"
#include "pipebft/pipeline/execute_directive.hpp"

namespace pipebft::pipeline {

struct ExecutionResult {
  ledger::Block block;
  // One entry per request: the values its writes replaced.
  std::vector<std::vector<std::int64_t>> results;
  bool checkpoint_due = false;
};

// Applies committed batches in order, appends their blocks and reports when a
// checkpoint is due. Sole writer of the chain and the state.
class Executor {
 public:
  Executor(NodeId first_primary, std::unique_ptr<ledger::StateStore> state,
           std::uint64_t checkpoint_interval);

  // Throws ledger::OutOfOrderAppend if the directive does not start at the
  // next expected sequence.
  ExecutionResult execute(const ExecuteDirective& directive);

  const ledger::Blockchain& chain() const { return chain_; }
  ledger::StateStore& state() { return *state_; }
  const ledger::StateStore& state() const { return *state_; }
  std::uint64_t executed_txns() const { return executed_txns_; }

 private:
  ledger::Blockchain chain_;
  std::unique_ptr<ledger::StateStore> state_;
  std::uint64_t interval_;
  std::uint64_t executed_txns_ = 0;
};

// Single-threaded reference: replays batches sorted by first sequence into a
// fresh in-memory store. Used to audit replicas after a run.
std::unique_ptr<ledger::StateStore> reference_replay(std::vector<messages::RequestBatch> batches,
                                                     std::uint64_t active_set);

}  // namespace pipebft::pipeline
